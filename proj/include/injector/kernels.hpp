#pragma once

#include <cstddef>

// Dense inner loops on raw double arrays. Every kernel has a scalar reference
// implementation and may have an AVX2 variant; the active set is picked once at
// runtime from CPU capabilities (override with INJECTOR_KERNELS=scalar|avx2).
// Matmul kernels accumulate into C; callers zero-fill when they want C = A*B.

namespace injector::kernels {

struct KernelSet {
    const char* name;

    // C[m*n] += A[m*k] * B[k*n]
    void (*matmul_nn)(double* c, const double* a, const double* b, int m, int k, int n);
    // C[m*n] += A[m*k] * B^T, B stored [n*k]
    void (*matmul_nt)(double* c, const double* a, const double* b, int m, int k, int n);
    // C[m*n] += A^T * B, A stored [k*m], B stored [k*n]
    void (*matmul_tn)(double* c, const double* a, const double* b, int m, int k, int n);

    // y[i] += alpha * x[i]
    void (*axpy)(double* y, const double* x, double alpha, int n);
    void (*add)(double* out, const double* a, const double* b, int n);
    void (*mul)(double* out, const double* a, const double* b, int n);
    void (*scale)(double* out, const double* x, double alpha, int n);

    void (*tanh_fwd)(double* y, const double* x, int n);
    // dx[i] += dy[i] * (1 - y[i]^2), y = tanh(x)
    void (*tanh_bwd)(double* dx, const double* dy, const double* y, int n);
    void (*relu_fwd)(double* y, const double* x, int n);
    void (*relu_bwd)(double* dx, const double* dy, const double* x, int n);
    void (*gelu_fwd)(double* y, const double* x, int n);
    void (*gelu_bwd)(double* dx, const double* dy, const double* x, int n);

    double (*dot)(const double* a, const double* b, int n);
    double (*sum)(const double* x, int n);

    // Decoupled-weight-decay Adam update on one flat parameter array.
    // bc1/bc2 are the precomputed bias corrections 1-beta^t.
    void (*adamw)(double* p, double* m, double* v, const double* g, int n,
                  double lr, double beta1, double beta2, double eps,
                  double weight_decay, double bc1, double bc2);
};

const KernelSet& scalar();
// nullptr when the binary lacks AVX2 code or the CPU cannot run it.
const KernelSet* avx2();
const KernelSet& active();

}  // namespace injector::kernels

#include "injector/kernels.hpp"

#include <cmath>

namespace injector::kernels {
namespace {

void matmul_nn(double* c, const double* a, const double* b, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        for (int l = 0; l < k; ++l) {
            const double av = a[i * k + l];
            const double* brow = b + l * n;
            double* crow = c + i * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt(double* c, const double* a, const double* b, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + i * k;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + j * k;
            double acc = 0.0;
            for (int l = 0; l < k; ++l) acc += arow[l] * brow[l];
            c[i * n + j] += acc;
        }
    }
}

void matmul_tn(double* c, const double* a, const double* b, int m, int k, int n) {
    for (int l = 0; l < k; ++l) {
        const double* arow = a + l * m;
        const double* brow = b + l * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = c + i * n;
            for (int j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void axpy(double* y, const double* x, double alpha, int n) {
    for (int i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void add(double* out, const double* a, const double* b, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(double* out, const double* a, const double* b, int n) {
    for (int i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(double* out, const double* x, double alpha, int n) {
    for (int i = 0; i < n; ++i) out[i] = alpha * x[i];
}

void tanh_fwd(double* y, const double* x, int n) {
    for (int i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void tanh_bwd(double* dx, const double* dy, const double* y, int n) {
    for (int i = 0; i < n; ++i) dx[i] += dy[i] * (1.0 - y[i] * y[i]);
}

void relu_fwd(double* y, const double* x, int n) {
    for (int i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(double* dx, const double* dy, const double* x, int n) {
    for (int i = 0; i < n; ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

void gelu_fwd(double* y, const double* x, int n) {
    for (int i = 0; i < n; ++i) {
        y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * kInvSqrt2));
    }
}

void gelu_bwd(double* dx, const double* dy, const double* x, int n) {
    for (int i = 0; i < n; ++i) {
        const double phi = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
        dx[i] += dy[i] * (phi + x[i] * pdf);
    }
}

double dot(const double* a, const double* b, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

double sum(const double* x, int n) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += x[i];
    return acc;
}

void adamw(double* p, double* m, double* v, const double* g, int n,
           double lr, double beta1, double beta2, double eps,
           double weight_decay, double bc1, double bc2) {
    for (int i = 0; i < n; ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps) + weight_decay * p[i]);
    }
}

}  // namespace

const KernelSet& scalar() {
    static const KernelSet set{
        "scalar",   matmul_nn, matmul_nt, matmul_tn, axpy,     add,
        mul,        scale,     tanh_fwd,  tanh_bwd,  relu_fwd, relu_bwd,
        gelu_fwd,   gelu_bwd,  dot,       sum,       adamw,
    };
    return set;
}

}  // namespace injector::kernels

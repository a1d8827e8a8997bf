#include "injector/kernels.hpp"

// Compiled with -mavx2 -mfma when the compiler supports it; active() only
// hands this set out after a runtime CPU check. Transcendental kernels
// (tanh/gelu) stay on the scalar path.

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

namespace injector::kernels {
namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

void matmul_nn(double* c, const double* a, const double* b, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        double* crow = c + static_cast<std::size_t>(i) * n;
        for (int l = 0; l < k; ++l) {
            const double av = a[static_cast<std::size_t>(i) * k + l];
            const __m256d avec = _mm256_set1_pd(av);
            const double* brow = b + static_cast<std::size_t>(l) * n;
            int j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d cv = _mm256_loadu_pd(crow + j);
                cv = _mm256_fmadd_pd(avec, _mm256_loadu_pd(brow + j), cv);
                _mm256_storeu_pd(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void matmul_nt(double* c, const double* a, const double* b, int m, int k, int n) {
    for (int i = 0; i < m; ++i) {
        const double* arow = a + static_cast<std::size_t>(i) * k;
        for (int j = 0; j < n; ++j) {
            const double* brow = b + static_cast<std::size_t>(j) * k;
            __m256d acc = _mm256_setzero_pd();
            int l = 0;
            for (; l + 4 <= k; l += 4) {
                acc = _mm256_fmadd_pd(_mm256_loadu_pd(arow + l), _mm256_loadu_pd(brow + l), acc);
            }
            double tail = 0.0;
            for (; l < k; ++l) tail += arow[l] * brow[l];
            c[static_cast<std::size_t>(i) * n + j] += hsum(acc) + tail;
        }
    }
}

void matmul_tn(double* c, const double* a, const double* b, int m, int k, int n) {
    for (int l = 0; l < k; ++l) {
        const double* arow = a + static_cast<std::size_t>(l) * m;
        const double* brow = b + static_cast<std::size_t>(l) * n;
        for (int i = 0; i < m; ++i) {
            const double av = arow[i];
            const __m256d avec = _mm256_set1_pd(av);
            double* crow = c + static_cast<std::size_t>(i) * n;
            int j = 0;
            for (; j + 4 <= n; j += 4) {
                __m256d cv = _mm256_loadu_pd(crow + j);
                cv = _mm256_fmadd_pd(avec, _mm256_loadu_pd(brow + j), cv);
                _mm256_storeu_pd(crow + j, cv);
            }
            for (; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

void axpy(double* y, const double* x, double alpha, int n) {
    const __m256d avec = _mm256_set1_pd(alpha);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d yv = _mm256_loadu_pd(y + i);
        yv = _mm256_fmadd_pd(avec, _mm256_loadu_pd(x + i), yv);
        _mm256_storeu_pd(y + i, yv);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void add(double* out, const double* a, const double* b, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

void mul(double* out, const double* a, const double* b, int n) {
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

void scale(double* out, const double* x, double alpha, int n) {
    const __m256d avec = _mm256_set1_pd(alpha);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(out + i, _mm256_mul_pd(avec, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) out[i] = alpha * x[i];
}

void relu_fwd(double* y, const double* x, int n) {
    const __m256d zero = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_max_pd(zero, _mm256_loadu_pd(x + i)));
    }
    for (; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void relu_bwd(double* dx, const double* dy, const double* x, int n) {
    const __m256d zero = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(x + i), zero, _CMP_GT_OQ);
        __m256d contrib = _mm256_and_pd(mask, _mm256_loadu_pd(dy + i));
        _mm256_storeu_pd(dx + i, _mm256_add_pd(_mm256_loadu_pd(dx + i), contrib));
    }
    for (; i < n; ++i) dx[i] += x[i] > 0.0 ? dy[i] : 0.0;
}

double dot(const double* a, const double* b, int n) {
    __m256d acc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
    }
    double tail = 0.0;
    for (; i < n; ++i) tail += a[i] * b[i];
    return hsum(acc) + tail;
}

double sum(const double* x, int n) {
    __m256d acc = _mm256_setzero_pd();
    int i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double tail = 0.0;
    for (; i < n; ++i) tail += x[i];
    return hsum(acc) + tail;
}

void adamw(double* p, double* m, double* v, const double* g, int n,
           double lr, double beta1, double beta2, double eps,
           double weight_decay, double bc1, double bc2) {
    const __m256d b1 = _mm256_set1_pd(beta1);
    const __m256d b2 = _mm256_set1_pd(beta2);
    const __m256d omb1 = _mm256_set1_pd(1.0 - beta1);
    const __m256d omb2 = _mm256_set1_pd(1.0 - beta2);
    const __m256d inv_bc1 = _mm256_set1_pd(1.0 / bc1);
    const __m256d inv_bc2 = _mm256_set1_pd(1.0 / bc2);
    const __m256d lrv = _mm256_set1_pd(lr);
    const __m256d epsv = _mm256_set1_pd(eps);
    const __m256d wdv = _mm256_set1_pd(weight_decay);
    int i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d gv = _mm256_loadu_pd(g + i);
        __m256d mv = _mm256_fmadd_pd(omb1, gv, _mm256_mul_pd(b1, _mm256_loadu_pd(m + i)));
        __m256d vv = _mm256_fmadd_pd(omb2, _mm256_mul_pd(gv, gv),
                                     _mm256_mul_pd(b2, _mm256_loadu_pd(v + i)));
        _mm256_storeu_pd(m + i, mv);
        _mm256_storeu_pd(v + i, vv);
        const __m256d mhat = _mm256_mul_pd(mv, inv_bc1);
        const __m256d vhat = _mm256_mul_pd(vv, inv_bc2);
        const __m256d denom = _mm256_add_pd(_mm256_sqrt_pd(vhat), epsv);
        __m256d pv = _mm256_loadu_pd(p + i);
        __m256d step = _mm256_fmadd_pd(wdv, pv, _mm256_div_pd(mhat, denom));
        pv = _mm256_sub_pd(pv, _mm256_mul_pd(lrv, step));
        _mm256_storeu_pd(p + i, pv);
    }
    if (i < n) {
        scalar().adamw(p + i, m + i, v + i, g + i, n - i, lr, beta1, beta2, eps,
                       weight_decay, bc1, bc2);
    }
}

}  // namespace

const KernelSet* avx2_impl() {
    static const KernelSet set{
        "avx2",
        matmul_nn,
        matmul_nt,
        matmul_tn,
        axpy,
        add,
        mul,
        scale,
        scalar().tanh_fwd,
        scalar().tanh_bwd,
        relu_fwd,
        relu_bwd,
        scalar().gelu_fwd,
        scalar().gelu_bwd,
        dot,
        sum,
        adamw,
    };
    return &set;
}

}  // namespace injector::kernels

#else

namespace injector::kernels {
const KernelSet* avx2_impl() { return nullptr; }
}  // namespace injector::kernels

#endif

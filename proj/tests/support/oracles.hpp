#pragma once

// Independent reference computations for the test suites. These deliberately
// use plain loops and never call into the library kernels they check.

#include <cmath>
#include <random>
#include <vector>

#include "injector/tensor.hpp"

namespace oracles {

// C[m x n] = A[m x k] * B[k x n], triple loop.
inline injector::Tensor matmul_naive(const injector::Tensor& a, const injector::Tensor& b) {
    const int64_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    injector::Tensor c({m, n});
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int64_t l = 0; l < k; ++l) acc += a.at(i, l) * b.at(l, j);
            c.at(i, j) = acc;
        }
    }
    return c;
}

// Kronecker product via the block index formula, four loops.
inline injector::Tensor kron_naive(const injector::Tensor& s, const injector::Tensor& a) {
    const int64_t p = s.extent(0), q = s.extent(1), r = a.extent(0), t = a.extent(1);
    injector::Tensor out({p * r, q * t});
    for (int64_t i = 0; i < p; ++i) {
        for (int64_t j = 0; j < q; ++j) {
            for (int64_t k = 0; k < r; ++k) {
                for (int64_t l = 0; l < t; ++l) {
                    out.at(i * r + k, j * t + l) = s.at(i, j) * a.at(k, l);
                }
            }
        }
    }
    return out;
}

// Row-major flattening by explicit multi-index walk.
inline std::vector<double> row_major_sequence(const injector::Tensor& t) {
    std::vector<int64_t> idx(static_cast<size_t>(t.ndim()), 0);
    std::vector<double> out;
    out.reserve(static_cast<size_t>(t.numel()));
    for (int64_t flat = 0; flat < t.numel(); ++flat) {
        int64_t offset = 0;
        int64_t stride = 1;
        for (int d = t.ndim() - 1; d >= 0; --d) {
            offset += idx[static_cast<size_t>(d)] * stride;
            stride *= t.extent(d);
        }
        out.push_back(t[offset]);
        for (int d = t.ndim() - 1; d >= 0; --d) {
            if (++idx[static_cast<size_t>(d)] < t.extent(d)) break;
            idx[static_cast<size_t>(d)] = 0;
        }
    }
    return out;
}

inline injector::Tensor random_tensor(injector::Shape shape, std::mt19937_64& rng,
                                      double scale = 1.0) {
    injector::Tensor t(std::move(shape));
    std::uniform_real_distribution<double> dist(-scale, scale);
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
    return t;
}

}  // namespace oracles

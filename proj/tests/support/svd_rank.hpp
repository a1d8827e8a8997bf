#pragma once

// Numerical rank via Eigen's SVD, used only as a test oracle.

#include <Eigen/Dense>

#include "injector/tensor.hpp"

namespace oracles {

inline Eigen::MatrixXd to_eigen(const injector::Tensor& t) {
    Eigen::MatrixXd m(t.rows(), t.cols());
    for (int64_t i = 0; i < t.rows(); ++i) {
        for (int64_t j = 0; j < t.cols(); ++j) m(i, j) = t.at(i, j);
    }
    return m;
}

inline int svd_rank(const injector::Tensor& t, double tolerance = 1e-9) {
    const Eigen::MatrixXd m = to_eigen(t);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv(i) > tolerance) ++rank;
    }
    return rank;
}

}  // namespace oracles

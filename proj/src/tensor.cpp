#include "injector/tensor.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "injector/errors.hpp"

namespace injector {

int64_t shape_numel(const Shape& shape) {
    int64_t n = 1;
    for (int64_t e : shape) n *= e;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream out;
    out << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) out << "x";
        out << shape[i];
    }
    out << "]";
    return out.str();
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)) {
    for (int64_t e : shape_) {
        if (e <= 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape_));
    }
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != static_cast<int64_t>(data_.size())) {
        throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                         shape_str(shape_));
    }
}

Tensor Tensor::full(Shape shape, double value) {
    Tensor t(std::move(shape));
    t.fill(value);
    return t;
}

Tensor Tensor::vector(std::initializer_list<double> values) {
    return Tensor({static_cast<int64_t>(values.size())}, std::vector<double>(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const int64_t r = static_cast<int64_t>(rows.size());
    const int64_t c = r > 0 ? static_cast<int64_t>(rows.begin()->size()) : 0;
    std::vector<double> data;
    data.reserve(static_cast<size_t>(r * c));
    for (const auto& row : rows) {
        if (static_cast<int64_t>(row.size()) != c) throw ShapeError("ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

int64_t Tensor::rows() const {
    if (is_matrix()) return shape_[0];
    if (is_vector()) return 1;
    throw ShapeError("rows() on tensor of shape " + shape_str(shape_));
}

int64_t Tensor::cols() const {
    if (is_matrix()) return shape_[1];
    if (is_vector()) return shape_[0];
    throw ShapeError("cols() on tensor of shape " + shape_str(shape_));
}

void Tensor::fill(double value) {
    for (double& x : data_) x = value;
}

bool Tensor::all_finite() const {
    for (double x : data_) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Tensor Tensor::reshaped(Shape new_shape) const {
    if (shape_numel(new_shape) != numel()) {
        throw ShapeError("cannot reshape " + shape_str(shape_) + " (" + std::to_string(numel()) +
                         " elements) to " + shape_str(new_shape));
    }
    return Tensor(std::move(new_shape), data_);
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (int64_t i = 0; i < a.numel(); ++i) {
        if (a[i] != b[i]) return false;
    }
    return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("max_abs_diff shapes differ: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    double worst = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
    }
    return worst;
}

}  // namespace injector

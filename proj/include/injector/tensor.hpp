#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace injector {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major double tensor. Index (i0,...,ik-1) maps to offset
// sum(i_j * stride_j) with stride_{k-1} = 1.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, double value);
    static Tensor vector(std::initializer_list<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

    const Shape& shape() const { return shape_; }
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }
    int ndim() const { return static_cast<int>(shape_.size()); }
    int64_t extent(int dim) const { return shape_[static_cast<size_t>(dim)]; }

    bool is_vector() const { return shape_.size() == 1; }
    bool is_matrix() const { return shape_.size() == 2; }
    bool is_scalar() const { return data_.size() == 1; }
    // Rows/cols of a matrix; a vector is treated as one row.
    int64_t rows() const;
    int64_t cols() const;

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }
    double& at(int64_t i, int64_t j) { return data_[static_cast<size_t>(i * cols() + j)]; }
    double at(int64_t i, int64_t j) const { return data_[static_cast<size_t>(i * cols() + j)]; }

    void fill(double value);
    void zero() { fill(0.0); }
    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool all_finite() const;

    // Row-major reinterpretation; element count must match.
    Tensor reshaped(Shape new_shape) const;

private:
    Shape shape_;
    std::vector<double> data_;
};

bool bitwise_equal(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace injector

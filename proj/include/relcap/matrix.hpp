#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "relcap/rng.hpp"

namespace relcap {

// Dense row-major matrix of doubles. The one value type every module builds on.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix zeros(std::size_t rows, std::size_t cols) { return Matrix(rows, cols, 0.0); }
    static Matrix identity(std::size_t n);
    static Matrix gaussian(std::size_t rows, std::size_t cols, Rng& rng, double scale = 1.0);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& at(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double at(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
    double* row_ptr(std::size_t r) { return data_.data() + r * cols_; }
    const double* row_ptr(std::size_t r) const { return data_.data() + r * cols_; }
    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
    std::string shape_str() const;
    bool all_finite() const;

    // a * b with an Eigen-backed inner product. Throws on a.cols != b.rows,
    // naming both shapes.
    static Matrix multiply(const Matrix& a, const Matrix& b);

    Matrix transposed() const;
    void add_in_place(const Matrix& o);
    void scale_in_place(double s);
    void fill(double v) { data_.assign(data_.size(), v); }

    double l2_norm() const;
    double max_abs_diff(const Matrix& o) const;
    bool bitwise_equal(const Matrix& o) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

}  // namespace relcap

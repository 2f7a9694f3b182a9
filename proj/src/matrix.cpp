#include "relcap/matrix.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace relcap {

namespace {
using EigenMap =
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using EigenConstMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
}  // namespace

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
    std::size_t r = 0;
    for (const auto& row : rows) {
        if (row.size() != m.cols_) throw std::invalid_argument("from_rows: ragged rows");
        std::size_t c = 0;
        for (double v : row) m.at(r, c++) = v;
        ++r;
    }
    return m;
}

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

Matrix Matrix::gaussian(std::size_t rows, std::size_t cols, Rng& rng, double scale) {
    Matrix m(rows, cols);
    for (double& v : m.data_) v = rng.next_gaussian() * scale;
    return m;
}

std::string Matrix::shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix Matrix::multiply(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_)
        throw std::invalid_argument("matmul: shape mismatch " + a.shape_str() + " * " +
                                    b.shape_str());
    Matrix out(a.rows_, b.cols_);
    EigenConstMap ma(a.data(), static_cast<Eigen::Index>(a.rows_),
                     static_cast<Eigen::Index>(a.cols_));
    EigenConstMap mb(b.data(), static_cast<Eigen::Index>(b.rows_),
                     static_cast<Eigen::Index>(b.cols_));
    EigenMap mo(out.data(), static_cast<Eigen::Index>(out.rows_),
                static_cast<Eigen::Index>(out.cols_));
    mo.noalias() = ma * mb;
    return out;
}

Matrix Matrix::transposed() const {
    Matrix out(cols_, rows_);
    for (std::size_t r = 0; r < rows_; ++r)
        for (std::size_t c = 0; c < cols_; ++c) out.at(c, r) = at(r, c);
    return out;
}

void Matrix::add_in_place(const Matrix& o) {
    if (!same_shape(o))
        throw std::invalid_argument("add: shape mismatch " + shape_str() + " vs " + o.shape_str());
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
}

void Matrix::scale_in_place(double s) {
    for (double& v : data_) v *= s;
}

double Matrix::l2_norm() const {
    double acc = 0.0;
    for (double v : data_) acc += v * v;
    return std::sqrt(acc);
}

double Matrix::max_abs_diff(const Matrix& o) const {
    if (!same_shape(o)) return INFINITY;
    double m = 0.0;
    for (std::size_t i = 0; i < data_.size(); ++i)
        m = std::max(m, std::abs(data_[i] - o.data_[i]));
    return m;
}

bool Matrix::bitwise_equal(const Matrix& o) const {
    if (!same_shape(o)) return false;
    for (std::size_t i = 0; i < data_.size(); ++i)
        if (data_[i] != o.data_[i] || std::signbit(data_[i]) != std::signbit(o.data_[i]))
            return false;
    return true;
}

}  // namespace relcap

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "espace/error.hpp"
#include "espace/rng.hpp"

namespace espace {

// Dense row-major matrix of 64-bit floats. The universal carrier for W, X,
// P, and correlation matrices. Operations treat inputs as immutable.
class Matrix {
public:
    Matrix() = default;

    Matrix(std::size_t rows, std::size_t cols)
        : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

    Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
        : rows_(rows), cols_(cols), data_(std::move(data)) {
        if (data_.size() != rows_ * cols_)
            throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                             " does not match " + std::to_string(rows_) + "x" +
                             std::to_string(cols_));
    }

    static Matrix identity(std::size_t n) {
        Matrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    static Matrix random_normal(std::size_t rows, std::size_t cols, Rng& rng,
                                double stddev = 1.0) {
        Matrix m(rows, cols);
        for (double& v : m.data_) v = stddev * rng.normal();
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    double* row(std::size_t i) { return data_.data() + i * cols_; }
    const double* row(std::size_t i) const { return data_.data() + i * cols_; }

    bool same_shape(const Matrix& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix transpose(const Matrix& m);
Matrix operator+(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(const Matrix& m, double s);
inline Matrix operator*(double s, const Matrix& m) { return m * s; }

double trace(const Matrix& m);
double frobenius_norm(const Matrix& m);
double max_abs(const Matrix& m);
double max_abs_diff(const Matrix& a, const Matrix& b);
bool bitwise_equal(const Matrix& a, const Matrix& b);

// Squared L2 norm of column j.
double column_sq_norm(const Matrix& m, std::size_t j);
// Dot product of column j of a and column j of b.
double column_dot(const Matrix& a, const Matrix& b, std::size_t j);

// (m + m^T) / 2
Matrix symmetrize(const Matrix& m);

// Throws NumericalError if any entry is NaN or Inf.
void ensure_finite(const Matrix& m, const char* what);

}  // namespace espace

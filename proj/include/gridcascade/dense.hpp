#pragma once

// Small dense linear algebra: a row-major matrix and a Cholesky
// factorisation that tolerates positive semidefinite input.

#include <algorithm>
#include <cstddef>
#include <span>
#include <vector>

namespace gridcascade {

class DenseMatrix {
public:
    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    [[nodiscard]] std::size_t rows() const { return rows_; }
    [[nodiscard]] std::size_t cols() const { return cols_; }

    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
    [[nodiscard]] std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

    double* data() { return data_.data(); }
    [[nodiscard]] const double* data() const { return data_.data(); }

    void set_zero() { std::fill(data_.begin(), data_.end(), 0.0); }

    /// y = A x
    [[nodiscard]] std::vector<double> multiply(std::span<const double> x) const;
    /// y = A^T x
    [[nodiscard]] std::vector<double> multiply_transposed(std::span<const double> x) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

/// Lower-triangular Cholesky factor of a symmetric positive semidefinite
/// matrix. Pivots below `rel_tol * max_diag` are treated as zero and the
/// corresponding unknown is fixed to zero in solves, which yields a valid
/// particular solution for consistent singular systems.
class Cholesky {
public:
    Cholesky() = default;
    explicit Cholesky(const DenseMatrix& a, double rel_tol = 1e-13) { factor(a, rel_tol); }

    void factor(const DenseMatrix& a, double rel_tol = 1e-13);

    [[nodiscard]] std::vector<double> solve(std::span<const double> b) const;
    void solve_in_place(std::span<double> b) const;

    [[nodiscard]] std::size_t size() const { return l_.rows(); }
    [[nodiscard]] std::size_t rank() const { return rank_; }
    [[nodiscard]] bool full_rank() const { return rank_ == l_.rows(); }

private:
    DenseMatrix l_;
    std::vector<char> skipped_;
    std::size_t rank_ = 0;
};

}  // namespace gridcascade

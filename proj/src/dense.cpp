#include "gridcascade/dense.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "gridcascade/kernels.hpp"

namespace gridcascade {

std::vector<double> DenseMatrix::multiply(std::span<const double> x) const {
    if (x.size() != cols_) throw std::invalid_argument("DenseMatrix::multiply: size mismatch");
    std::vector<double> y(rows_);
    if (rows_ > 0 && cols_ > 0) kernels::active().gemv(data_.data(), rows_, cols_, x.data(), y.data());
    return y;
}

std::vector<double> DenseMatrix::multiply_transposed(std::span<const double> x) const {
    if (x.size() != rows_) throw std::invalid_argument("DenseMatrix::multiply_transposed: size mismatch");
    std::vector<double> y(cols_);
    if (rows_ > 0 && cols_ > 0) kernels::active().gemv_t(data_.data(), rows_, cols_, x.data(), y.data());
    return y;
}

void Cholesky::factor(const DenseMatrix& a, double rel_tol) {
    if (a.rows() != a.cols()) throw std::invalid_argument("Cholesky: matrix not square");
    const std::size_t n = a.rows();
    const auto& k = kernels::active();
    l_ = DenseMatrix(n, n);
    skipped_.assign(n, 0);
    rank_ = 0;

    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::abs(a(i, i)));
    const double tol = rel_tol * std::max(max_diag, 1e-300);

    for (std::size_t i = 0; i < n; ++i) {
        double* li = l_.data() + i * n;
        for (std::size_t j = 0; j < i; ++j) {
            if (skipped_[j]) {
                li[j] = 0.0;
                continue;
            }
            const double* lj = l_.data() + j * n;
            li[j] = (a(i, j) - k.dot(li, lj, j)) / lj[j];
        }
        const double pivot = a(i, i) - k.dot(li, li, i);
        if (pivot <= tol) {
            skipped_[i] = 1;
            li[i] = 0.0;
            std::fill(li, li + i, 0.0);
        } else {
            li[i] = std::sqrt(pivot);
            ++rank_;
        }
    }
}

void Cholesky::solve_in_place(std::span<double> b) const {
    const std::size_t n = l_.rows();
    if (b.size() != n) throw std::invalid_argument("Cholesky::solve: size mismatch");
    const auto& k = kernels::active();
    // L y = b
    for (std::size_t i = 0; i < n; ++i) {
        if (skipped_[i]) {
            b[i] = 0.0;
            continue;
        }
        const double* li = l_.data() + i * n;
        b[i] = (b[i] - k.dot(li, b.data(), i)) / li[i];
    }
    // L^T x = y, column sweep expressed as row axpys
    for (std::size_t ii = n; ii-- > 0;) {
        if (skipped_[ii]) {
            b[ii] = 0.0;
            continue;
        }
        const double* li = l_.data() + ii * n;
        b[ii] /= li[ii];
        if (ii > 0) k.axpy(-b[ii], li, b.data(), ii);
    }
}

std::vector<double> Cholesky::solve(std::span<const double> b) const {
    std::vector<double> x(b.begin(), b.end());
    solve_in_place(x);
    return x;
}

}  // namespace gridcascade

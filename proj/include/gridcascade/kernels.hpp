#pragma once

// Dense double-precision inner-loop kernels.
//
// Every kernel has a portable scalar reference implementation. When the
// library is built on x86-64 an AVX2/FMA variant is compiled as well and is
// selected at runtime if the CPU supports it. Setting the environment
// variable GRIDCASCADE_SIMD=scalar forces the reference path.

#include <cstddef>
#include <span>
#include <string_view>

namespace gridcascade::kernels {

struct KernelTable {
    std::string_view name;
    /// sum_i x[i] * y[i]
    double (*dot)(const double* x, const double* y, std::size_t n);
    /// y += a * x
    void (*axpy)(double a, const double* x, double* y, std::size_t n);
    /// y = A x for a row-major rows x cols matrix
    void (*gemv)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
    /// y = A^T x for a row-major rows x cols matrix (y has cols entries)
    void (*gemv_t)(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
};

const KernelTable& scalar_table();

/// nullptr when the AVX2 variant was not compiled in or the CPU lacks AVX2/FMA.
const KernelTable* avx2_table();

/// The table used by the numerical code.
const KernelTable& active();

/// Force a table by name ("scalar" or "avx2"). Returns false if unavailable.
bool select(std::string_view name);

inline double dot(std::span<const double> x, std::span<const double> y) {
    return active().dot(x.data(), y.data(), x.size());
}

inline void axpy(double a, std::span<const double> x, std::span<double> y) {
    active().axpy(a, x.data(), y.data(), x.size());
}

}  // namespace gridcascade::kernels

#pragma once

#include <cstddef>

namespace gridcascade::kernels::detail {

double dot_scalar(const double* x, const double* y, std::size_t n);
void axpy_scalar(double a, const double* x, double* y, std::size_t n);
void gemv_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_t_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);

#if defined(GRIDCASCADE_HAVE_AVX2)
double dot_avx2(const double* x, const double* y, std::size_t n);
void axpy_avx2(double a, const double* x, double* y, std::size_t n);
void gemv_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void gemv_t_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
#endif

}  // namespace gridcascade::kernels::detail

#include "nag/simd/kernels.hpp"

namespace nag::simd::detail {
namespace {

void axpy_scalar(std::size_t n, double a, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gemm_acc_scalar(std::size_t m, std::size_t k, std::size_t n,
                     const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

void spmm_rows_scalar(const std::uint64_t* row_offsets, const std::uint32_t* cols,
                      const double* values, std::size_t row_begin, std::size_t row_end,
                      const double* x, std::size_t width, double* out) {
  for (std::size_t r = row_begin; r < row_end; ++r) {
    double* orow = out + r * width;
    for (std::size_t j = 0; j < width; ++j) orow[j] = 0.0;
    for (std::uint64_t e = row_offsets[r]; e < row_offsets[r + 1]; ++e) {
      const double v = values[e];
      const double* xrow = x + static_cast<std::size_t>(cols[e]) * width;
      for (std::size_t j = 0; j < width; ++j) orow[j] += v * xrow[j];
    }
  }
}

}  // namespace

const Kernels& scalar_kernels() {
  static const Kernels k{"scalar", axpy_scalar, gemm_acc_scalar, spmm_rows_scalar};
  return k;
}

}  // namespace nag::simd::detail

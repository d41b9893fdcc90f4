#include <arm_neon.h>

#include "nag/simd/kernels.hpp"

namespace nag::simd::detail {
namespace {

void axpy_neon(std::size_t n, double a, const double* x, double* y) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    float64x2_t y0 = vld1q_f64(y + i);
    float64x2_t y1 = vld1q_f64(y + i + 2);
    y0 = vaddq_f64(y0, vmulq_f64(va, vld1q_f64(x + i)));
    y1 = vaddq_f64(y1, vmulq_f64(va, vld1q_f64(x + i + 2)));
    vst1q_f64(y + i, y0);
    vst1q_f64(y + i + 2, y1);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

void gemm_acc_neon(std::size_t m, std::size_t k, std::size_t n,
                   const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 8 <= n; j += 8) {
      float64x2_t c0 = vld1q_f64(crow + j);
      float64x2_t c1 = vld1q_f64(crow + j + 2);
      float64x2_t c2 = vld1q_f64(crow + j + 4);
      float64x2_t c3 = vld1q_f64(crow + j + 6);
      for (std::size_t p = 0; p < k; ++p) {
        const float64x2_t va = vdupq_n_f64(arow[p]);
        const double* brow = b + p * n + j;
        c0 = vaddq_f64(c0, vmulq_f64(va, vld1q_f64(brow)));
        c1 = vaddq_f64(c1, vmulq_f64(va, vld1q_f64(brow + 2)));
        c2 = vaddq_f64(c2, vmulq_f64(va, vld1q_f64(brow + 4)));
        c3 = vaddq_f64(c3, vmulq_f64(va, vld1q_f64(brow + 6)));
      }
      vst1q_f64(crow + j, c0);
      vst1q_f64(crow + j + 2, c1);
      vst1q_f64(crow + j + 4, c2);
      vst1q_f64(crow + j + 6, c3);
    }
    for (; j < n; ++j) {
      double acc = crow[j];
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p * n + j];
      crow[j] = acc;
    }
  }
}

void spmm_rows_neon(const std::uint64_t* row_offsets, const std::uint32_t* cols,
                    const double* values, std::size_t row_begin, std::size_t row_end,
                    const double* x, std::size_t width, double* out) {
  for (std::size_t r = row_begin; r < row_end; ++r) {
    double* orow = out + r * width;
    const std::uint64_t e0 = row_offsets[r];
    const std::uint64_t e1 = row_offsets[r + 1];
    std::size_t j = 0;
    for (; j + 4 <= width; j += 4) {
      float64x2_t acc0 = vdupq_n_f64(0.0);
      float64x2_t acc1 = vdupq_n_f64(0.0);
      for (std::uint64_t e = e0; e < e1; ++e) {
        const float64x2_t v = vdupq_n_f64(values[e]);
        const double* xrow = x + static_cast<std::size_t>(cols[e]) * width + j;
        acc0 = vaddq_f64(acc0, vmulq_f64(v, vld1q_f64(xrow)));
        acc1 = vaddq_f64(acc1, vmulq_f64(v, vld1q_f64(xrow + 2)));
      }
      vst1q_f64(orow + j, acc0);
      vst1q_f64(orow + j + 2, acc1);
    }
    for (; j < width; ++j) {
      double acc = 0.0;
      for (std::uint64_t e = e0; e < e1; ++e)
        acc += values[e] * x[static_cast<std::size_t>(cols[e]) * width + j];
      orow[j] = acc;
    }
  }
}

}  // namespace

const Kernels& neon_kernels() {
  static const Kernels k{"neon", axpy_neon, gemm_acc_neon, spmm_rows_neon};
  return k;
}

}  // namespace nag::simd::detail

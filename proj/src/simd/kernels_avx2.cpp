#include <immintrin.h>

#include "nag/simd/kernels.hpp"

namespace nag::simd::detail {
namespace {

void axpy_avx2(std::size_t n, double a, const double* x, double* y) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    __m256d y1 = _mm256_loadu_pd(y + i + 4);
    y0 = _mm256_add_pd(y0, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    y1 = _mm256_add_pd(y1, _mm256_mul_pd(va, _mm256_loadu_pd(x + i + 4)));
    _mm256_storeu_pd(y + i, y0);
    _mm256_storeu_pd(y + i + 4, y1);
  }
  for (; i + 4 <= n; i += 4) {
    __m256d y0 = _mm256_loadu_pd(y + i);
    y0 = _mm256_add_pd(y0, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, y0);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

// Keeps a 16-wide strip of the C row in registers across the whole k loop.
void gemm_acc_avx2(std::size_t m, std::size_t k, std::size_t n,
                   const double* a, const double* b, double* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::size_t j = 0;
    for (; j + 16 <= n; j += 16) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      __m256d c1 = _mm256_loadu_pd(crow + j + 4);
      __m256d c2 = _mm256_loadu_pd(crow + j + 8);
      __m256d c3 = _mm256_loadu_pd(crow + j + 12);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d va = _mm256_set1_pd(arow[p]);
        const double* brow = b + p * n + j;
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(va, _mm256_loadu_pd(brow)));
        c1 = _mm256_add_pd(c1, _mm256_mul_pd(va, _mm256_loadu_pd(brow + 4)));
        c2 = _mm256_add_pd(c2, _mm256_mul_pd(va, _mm256_loadu_pd(brow + 8)));
        c3 = _mm256_add_pd(c3, _mm256_mul_pd(va, _mm256_loadu_pd(brow + 12)));
      }
      _mm256_storeu_pd(crow + j, c0);
      _mm256_storeu_pd(crow + j + 4, c1);
      _mm256_storeu_pd(crow + j + 8, c2);
      _mm256_storeu_pd(crow + j + 12, c3);
    }
    for (; j + 4 <= n; j += 4) {
      __m256d c0 = _mm256_loadu_pd(crow + j);
      for (std::size_t p = 0; p < k; ++p) {
        const __m256d va = _mm256_set1_pd(arow[p]);
        c0 = _mm256_add_pd(c0, _mm256_mul_pd(va, _mm256_loadu_pd(b + p * n + j)));
      }
      _mm256_storeu_pd(crow + j, c0);
    }
    for (; j < n; ++j) {
      double acc = crow[j];
      for (std::size_t p = 0; p < k; ++p) acc += arow[p] * b[p * n + j];
      crow[j] = acc;
    }
  }
}

void spmm_rows_avx2(const std::uint64_t* row_offsets, const std::uint32_t* cols,
                    const double* values, std::size_t row_begin, std::size_t row_end,
                    const double* x, std::size_t width, double* out) {
  for (std::size_t r = row_begin; r < row_end; ++r) {
    double* orow = out + r * width;
    const std::uint64_t e0 = row_offsets[r];
    const std::uint64_t e1 = row_offsets[r + 1];
    std::size_t j = 0;
    for (; j + 8 <= width; j += 8) {
      __m256d acc0 = _mm256_setzero_pd();
      __m256d acc1 = _mm256_setzero_pd();
      for (std::uint64_t e = e0; e < e1; ++e) {
        const __m256d v = _mm256_set1_pd(values[e]);
        const double* xrow = x + static_cast<std::size_t>(cols[e]) * width + j;
        acc0 = _mm256_add_pd(acc0, _mm256_mul_pd(v, _mm256_loadu_pd(xrow)));
        acc1 = _mm256_add_pd(acc1, _mm256_mul_pd(v, _mm256_loadu_pd(xrow + 4)));
      }
      _mm256_storeu_pd(orow + j, acc0);
      _mm256_storeu_pd(orow + j + 4, acc1);
    }
    for (; j + 4 <= width; j += 4) {
      __m256d acc0 = _mm256_setzero_pd();
      for (std::uint64_t e = e0; e < e1; ++e) {
        const __m256d v = _mm256_set1_pd(values[e]);
        acc0 = _mm256_add_pd(
            acc0, _mm256_mul_pd(v, _mm256_loadu_pd(x + static_cast<std::size_t>(cols[e]) * width + j)));
      }
      _mm256_storeu_pd(orow + j, acc0);
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

const Kernels& avx2_kernels() {
  static const Kernels k{"avx2", axpy_avx2, gemm_acc_avx2, spmm_rows_avx2};
  return k;
}

}  // namespace nag::simd::detail

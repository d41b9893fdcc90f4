#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace nag::simd {

// Inner-loop kernels used by the propagation and dense layers.
//
// Every backend must produce results bitwise identical to the scalar
// reference: vector lanes run across the output columns, each output element
// is accumulated in the same order as the scalar loop, and multiply and add
// are issued as separate instructions (no FMA).
struct Kernels {
  std::string_view name;

  // y[i] += a * x[i]
  void (*axpy)(std::size_t n, double a, const double* x, double* y);

  // C (m x n) += A (m x k) * B (k x n), all row-major and densely packed.
  void (*gemm_acc)(std::size_t m, std::size_t k, std::size_t n,
                   const double* a, const double* b, double* c);

  // out[r, :] = sum_j values[j] * x[cols[j], :] for r in [row_begin, row_end),
  // with j running over the CSR row in storage order. out rows are overwritten.
  void (*spmm_rows)(const std::uint64_t* row_offsets, const std::uint32_t* cols,
                    const double* values, std::size_t row_begin, std::size_t row_end,
                    const double* x, std::size_t width, double* out);
};

enum class Backend { scalar, avx2, neon };

// Kernel table selected once per process: the best backend the CPU supports,
// unless NAG_SIMD=scalar|avx2|neon is set in the environment.
const Kernels& active();

// A specific backend, or nullptr if it was not compiled in or the CPU lacks it.
const Kernels* backend(Backend which);

namespace detail {
const Kernels& scalar_kernels();
#if defined(NAG_HAVE_AVX2)
const Kernels& avx2_kernels();
#endif
#if defined(NAG_HAVE_NEON)
const Kernels& neon_kernels();
#endif
}  // namespace detail

}  // namespace nag::simd

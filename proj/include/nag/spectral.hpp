#pragma once

#include <cstddef>
#include <vector>

#include "nag/graph.hpp"
#include "nag/tensor.hpp"

namespace nag {

// Eigenpairs of the normalized Laplacian L = I - Â used as a structural encoding.
struct SpectralEncoding {
  std::size_t s = 0;
  std::vector<double> eigenvalues;  // ascending, all above the trivial threshold
  Tensor2 vectors;                  // n x s, column k pairs with eigenvalues[k]
};

enum class EigenSolver { automatic, dense, lanczos };

struct SpectralOptions {
  EigenSolver solver = EigenSolver::automatic;
  std::size_t dense_limit = 1024;       // automatic: dense at or below this n
  double trivial_threshold = 1e-8;      // eigenvalues <= this are skipped
  double residual_tolerance = 1e-8;     // required ||Lv - lambda v||_2 per pair
  std::uint64_t seed = 0x5eed;          // Lanczos start vectors
};

inline constexpr std::size_t default_eigenvector_count = 15;

// The s smallest non-trivial eigenpairs of I - adj_norm. Each vector is
// sign-normalized so its largest-magnitude entry is positive.
// Throws ConfigError when fewer than s non-trivial eigenvalues exist.
SpectralEncoding laplacian_eigs(const CsrMatrix& adj_norm, std::size_t s,
                                const SpectralOptions& options = {});

// X' = X || U. With enc.s == 0 the result equals X.
Tensor2 fuse_features(const Tensor2& x, const SpectralEncoding& enc);

// Flip v so its largest-|.| entry is positive; near-ties go to the lowest index.
void canonicalize_sign(std::span<double> v);

}  // namespace nag

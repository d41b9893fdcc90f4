#pragma once

#include <cstdint>

#include "nag/gradcheck.hpp"
#include "nag/graph.hpp"
#include "nag/hop2token.hpp"
#include "nag/spectral.hpp"
#include "nag/tensor.hpp"

namespace nag {

struct PreprocessOptions {
  std::uint32_t K = default_hops;
  std::size_t s = default_eigenvector_count;
  bool structural = true;  // false forces s = 0
  SpectralOptions spectral;
};

// normalize_sym -> laplacian_eigs -> fuse_features -> propagate, with the
// input hash stamped into the result.
TokenTensor preprocess(const CsrMatrix& adjacency, const Tensor2& features, const PreprocessOptions& options);

struct ModelGradCheckSetup {
  std::size_t nodes = 12;
  double edge_probability = 0.3;
  std::size_t feature_dim = 5;
  std::size_t eigenvectors = 2;
  std::uint32_t K = 3;
  std::uint32_t d_model = 16;
  std::uint32_t layers = 2;
  std::uint32_t heads = 2;
  std::uint32_t classes = 4;
  std::size_t batch = 3;
  bool head_hidden = false;
};

// Builds a seeded random graph, preprocesses it with structural encoding and
// checks every model leaf against central differences of the batch loss.
GradCheckReport model_gradcheck(std::uint64_t seed, const GradCheckOptions& options,
                                const ModelGradCheckSetup& setup = {});

}  // namespace nag

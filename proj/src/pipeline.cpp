#include "nag/pipeline.hpp"

#include "nag/errors.hpp"
#include "nag/model.hpp"
#include "nag/rng.hpp"

namespace nag {

TokenTensor preprocess(const CsrMatrix& adjacency, const Tensor2& features, const PreprocessOptions& options) {
  if (options.K < 1 || options.K > max_hops)
    throw ConfigError("K must be in [1, " + std::to_string(max_hops) + "], got " + std::to_string(options.K));
  const std::size_t s = options.structural ? options.s : 0;
  const CsrMatrix adj_norm = normalize_sym(adjacency);
  const SpectralEncoding enc = laplacian_eigs(adj_norm, s, options.spectral);
  const Tensor2 fused = fuse_features(features, enc);
  TokenMeta meta;
  meta.s = static_cast<std::uint32_t>(s);
  meta.input_hash = input_hash(adjacency, features, options.K, meta.s);
  return propagate(adj_norm, fused, options.K, meta);
}

GradCheckReport model_gradcheck(std::uint64_t seed, const GradCheckOptions& options,
                                const ModelGradCheckSetup& setup) {
  auto gen = make_stream(seed, "gradcheck.graph");
  std::vector<Edge> edges;
  for (node_t u = 0; u < setup.nodes; ++u)
    for (node_t v = u + 1; v < setup.nodes; ++v)
      if (uniform01(gen) < setup.edge_probability) edges.push_back({u, v, 0});
  // A ring keeps the graph connected so the spectrum has enough non-trivial pairs.
  for (node_t u = 0; u < setup.nodes; ++u) edges.push_back({u, static_cast<node_t>((u + 1) % setup.nodes), 0});
  const CsrMatrix adj = build_csr(edges, setup.nodes);

  auto fgen = make_stream(seed, "gradcheck.features");
  Tensor2 x(setup.nodes, setup.feature_dim);
  for (double& v : x.flat()) v = 2.0 * uniform01(fgen) - 1.0;

  PreprocessOptions pre;
  pre.K = setup.K;
  pre.s = setup.eigenvectors;
  const TokenTensor tokens = preprocess(adj, x, pre);

  ModelConfig cfg;
  cfg.K = setup.K;
  cfg.d_prime = static_cast<std::uint32_t>(tokens.d_prime());
  cfg.d_model = setup.d_model;
  cfg.layers = setup.layers;
  cfg.heads = setup.heads;
  cfg.classes = setup.classes;
  cfg.head_hidden = setup.head_hidden;
  cfg.use_structural = true;
  ModelParams params = init_params(cfg, seed);

  auto bgen = make_stream(seed, "gradcheck.batch");
  std::vector<node_t> ids(setup.nodes);
  for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<node_t>(i);
  shuffle_in_place(ids.data(), ids.size(), bgen);
  ids.resize(setup.batch);
  std::vector<std::int32_t> targets(setup.batch);
  for (auto& t : targets) t = static_cast<std::int32_t>(uniform_below(bgen, setup.classes));
  const TokenBatch batch = batch_view(tokens, ids);

  auto loss = [&] { return ce_loss(forward(cfg, params, batch), targets, nullptr); };
  auto loss_and_grad = [&] { loss_and_backward(cfg, params, batch, targets); };
  auto leaves = params.leaves();
  return grad_check(loss, loss_and_grad, leaves, options);
}

}  // namespace nag

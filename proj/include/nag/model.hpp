#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nag/hop2token.hpp"
#include "nag/layers.hpp"
#include "nag/tensor.hpp"

namespace nag {

enum class Readout : std::uint8_t { attention = 0, sum = 1, single = 2 };

std::string to_string(Readout r);
Readout parse_readout(const std::string& name);  // ConfigError on unknown names

struct ModelConfig {
  std::uint32_t K = default_hops;
  std::uint32_t d_prime = 0;
  std::uint32_t d_model = 128;
  std::uint32_t layers = 1;
  std::uint32_t heads = 1;
  std::uint32_t classes = 0;
  Readout readout = Readout::attention;
  bool use_structural = true;
  bool head_hidden = false;  // d_m -> d_m GELU layer before the classifier

  std::size_t seq_len() const { return static_cast<std::size_t>(K) + 1; }
  void validate() const;  // ConfigError

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct EncoderLayerParams {
  nn::LayerNormParams ln1;
  nn::AttentionParams attn;
  nn::LayerNormParams ln2;
  nn::FeedForwardParams ffn;
};

struct ModelParams {
  ParamLeaf embed;                       // d' x d_m
  std::vector<EncoderLayerParams> layers;
  nn::LayerNormParams final_ln;
  ParamLeaf readout;                     // 1 x 2d_m, hop-attention scoring vector
  ParamLeaf hidden_w, hidden_b;          // only with head_hidden
  ParamLeaf head_w, head_b;              // d_m x c, 1 x c

  // Canonical order; also the serialization and optimizer-state order.
  std::vector<ParamLeaf*> leaves();
  std::vector<const ParamLeaf*> leaves() const;
  void zero_grad();
};

// Xavier-uniform projections, zero biases and betas, unit gammas. Each leaf
// draws from its own stream "init.<leaf name>" of `seed`.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

// ---- individual stages ----------------------------------------------------

// Tokens of a batch as a (B*(K+1)) x d' matrix.
Tensor2 batch_matrix(const TokenBatch& batch);

// Z0 = X E, token by token.
Tensor2 embed(const Tensor2& tokens, const ParamLeaf& e);

struct EncoderLayerCache {
  nn::LayerNormCache ln1;
  nn::AttentionCache attn;
  nn::LayerNormCache ln2;
  nn::FeedForwardCache ffn;
};

struct EncoderCache {
  std::vector<EncoderLayerCache> layers;
  nn::LayerNormCache final_ln;
};

// Pre-LN blocks then a final LayerNorm; attention stays inside each node's sequence.
Tensor2 encode(const Tensor2& z0, const ModelParams& params, const ModelConfig& config,
               EncoderCache* cache);
Tensor2 encode_backward(const Tensor2& d_out, ModelParams& params, const ModelConfig& config,
                        const EncoderCache& cache);

struct ReadoutCache {
  Tensor2 alphas;  // B x K (attention readout only)
};

// Hop scores (Z_0 || Z_k) W_a^T for k = 1..K, shape B x K.
Tensor2 hop_scores(const Tensor2& z, std::size_t seq_len, const Tensor2& wa);

// z holds B sequences of seq_len rows; returns B x d_m.
Tensor2 readout_forward(const Tensor2& z, std::size_t seq_len, const ParamLeaf& wa, Readout variant,
                        ReadoutCache* cache);
Tensor2 readout_backward(const Tensor2& d_out, const Tensor2& z, std::size_t seq_len, ParamLeaf& wa,
                         Readout variant, const ReadoutCache& cache);

// Mean cross-entropy with max-shifted log-sum-exp. Writes dL/dlogits if asked.
double ce_loss(const Tensor2& logits, std::span<const std::int32_t> targets, Tensor2* d_logits);

// ---- whole model -----------------------------------------------------------

struct ForwardTrace {
  Tensor2 tokens;
  EncoderCache encoder;
  Tensor2 encoded;
  ReadoutCache readout;
  Tensor2 pooled;
  Tensor2 hidden_pre;
  Tensor2 hidden_act;
};

// Logits B x c. Pass a trace to enable backward.
Tensor2 forward(const ModelConfig& config, const ModelParams& params, const TokenBatch& batch,
                ForwardTrace* trace = nullptr);

// Accumulates gradients of every leaf from dL/dlogits.
void backward(const ModelConfig& config, ModelParams& params, const ForwardTrace& trace,
              const Tensor2& d_logits);

// forward + ce_loss + backward; returns the batch loss.
double loss_and_backward(const ModelConfig& config, ModelParams& params, const TokenBatch& batch,
                         std::span<const std::int32_t> targets);

// ---- model file -------------------------------------------------------------

void save_model(const ModelParams& params, const ModelConfig& config, const std::string& path);

struct LoadedModel {
  ModelConfig config;
  ModelParams params;
};
LoadedModel load_model(const std::string& path);

// ConfigError naming both sides when tokens cannot feed this model.
void check_compatible(const ModelConfig& config, const TokenTensor& tokens);

}  // namespace nag

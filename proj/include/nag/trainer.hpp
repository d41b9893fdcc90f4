#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nag/data_io.hpp"
#include "nag/hop2token.hpp"
#include "nag/model.hpp"

namespace nag {

struct TrainConfig {
  double lr = 1e-4;
  double weight_decay = 1e-3;
  std::size_t batch_size = 2000;
  std::size_t max_epochs = 50;
  std::size_t patience = 50;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void validate() const;  // ConfigError
};

// Decoupled weight decay: theta <- theta * (1 - lr*wd) - lr * m_hat / (sqrt(v_hat) + eps).
// Leaves with decay == false (LayerNorm gamma/beta, biases) skip the decay term.
class AdamW {
 public:
  explicit AdamW(const TrainConfig& config) : cfg_(config) {}

  // Sizes moment buffers to the leaves on first use; leaf order must not change.
  void step(std::span<ParamLeaf* const> leaves);
  std::uint64_t steps_taken() const noexcept { return t_; }

 private:
  TrainConfig cfg_;
  std::uint64_t t_ = 0;
  std::vector<Tensor2> m_;
  std::vector<Tensor2> v_;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  bool has_test = false;
  double test_accuracy = 0.0;
  double wall_seconds = 0.0;  // excluded from the written files, which must be reproducible
  TrainConfig train_config;
  ModelConfig model_config;
};

struct TrainResult {
  ModelParams best;
  TrainReport report;
};

// Labels for every node (length tokens.n()), `unlabeled` allowed outside splits.
struct LabeledSplits {
  std::vector<std::int32_t> labels;
  SplitSpec splits;
};

// Mini-batch training with best-validation-accuracy checkpointing.
// Deterministic given (config seeds, inputs).
TrainResult train(const LabeledSplits& data, const TokenTensor& tokens, const ModelConfig& model_config,
                  ModelParams initial, const TrainConfig& config);

// Fraction of nodes whose argmax logit (lowest index on ties) equals the label.
double evaluate(const ModelConfig& config, const ModelParams& params, const TokenTensor& tokens,
                const std::vector<std::int32_t>& labels, std::span<const node_t> split,
                std::size_t batch_size = 2000);

std::size_t argmax_row(std::span<const double> row);

// Line-oriented "key=value" report; one "epoch=..." line per epoch.
void write_report(const TrainReport& report, const std::string& path);
// JSON summary with the same fields.
void write_summary_json(const TrainReport& report, const std::string& path);

}  // namespace nag

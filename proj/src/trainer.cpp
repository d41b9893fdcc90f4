#include "nag/trainer.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "nag/errors.hpp"
#include "nag/rng.hpp"

namespace nag {

void TrainConfig::validate() const {
  std::ostringstream os;
  if (!(lr > 0.0)) os << "lr must be > 0; ";
  if (weight_decay < 0.0) os << "weight_decay must be >= 0; ";
  if (batch_size < 1) os << "batch_size must be >= 1; ";
  if (max_epochs < 1) os << "max_epochs must be >= 1; ";
  if (patience < 1 || patience > max_epochs) os << "patience must be in [1, max_epochs]; ";
  const std::string msg = os.str();
  if (!msg.empty()) throw ConfigError("invalid train config: " + msg.substr(0, msg.size() - 2));
}

void AdamW::step(std::span<ParamLeaf* const> leaves) {
  if (m_.empty()) {
    for (const ParamLeaf* p : leaves) {
      m_.emplace_back(p->value.rows(), p->value.cols());
      v_.emplace_back(p->value.rows(), p->value.cols());
    }
  }
  if (m_.size() != leaves.size()) throw InternalError("AdamW: leaf count changed between steps");
  ++t_;
  const double b1 = cfg_.beta1;
  const double b2 = cfg_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    ParamLeaf& p = *leaves[l];
    const double decay = p.decay ? 1.0 - cfg_.lr * cfg_.weight_decay : 1.0;
    double* theta = p.value.data();
    const double* g = p.grad.data();
    double* m = m_[l].data();
    double* v = v_[l].data();
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      m[i] = b1 * m[i] + (1.0 - b1) * g[i];
      v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      if (p.decay) theta[i] *= decay;
      theta[i] -= cfg_.lr * (m_hat / (std::sqrt(v_hat) + cfg_.eps));
    }
  }
}

std::size_t argmax_row(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < row.size(); ++c)
    if (row[c] > row[best]) best = c;
  return best;
}

double evaluate(const ModelConfig& config, const ModelParams& params, const TokenTensor& tokens,
                const std::vector<std::int32_t>& labels, std::span<const node_t> split,
                std::size_t batch_size) {
  if (split.empty()) throw ConfigError("cannot evaluate on an empty split");
  std::size_t correct = 0;
  for (std::size_t start = 0; start < split.size(); start += batch_size) {
    const auto ids = split.subspan(start, std::min(batch_size, split.size() - start));
    const TokenBatch batch = batch_view(tokens, ids);
    const Tensor2 logits = forward(config, params, batch);
    for (std::size_t b = 0; b < ids.size(); ++b)
      if (static_cast<std::int32_t>(argmax_row(logits.row(b))) == labels[ids[b]]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

TrainResult train(const LabeledSplits& data, const TokenTensor& tokens, const ModelConfig& model_config,
                  ModelParams initial, const TrainConfig& config) {
  config.validate();
  model_config.validate();
  if (data.labels.size() != tokens.n()) {
    std::ostringstream os;
    os << "token cache has n=" << tokens.n() << " nodes but labels cover n=" << data.labels.size();
    throw ConfigError(os.str());
  }
  check_compatible(model_config, tokens);
  if (data.splits.train.empty()) throw ConfigError("training split is empty");
  if (data.splits.val.empty()) throw ConfigError("validation split is empty");
  validate_splits(data.splits, data.labels);
  for (node_t id : data.splits.train)
    if (static_cast<std::uint32_t>(data.labels[id]) >= model_config.classes)
      throw ConfigError("label exceeds the model's class count");

  const auto started = std::chrono::steady_clock::now();
  TrainResult result;
  result.report.train_config = config;
  result.report.model_config = model_config;

  ModelParams params = std::move(initial);
  auto leaves = params.leaves();
  AdamW optimizer(config);
  auto shuffle_gen = make_stream(config.seed, "train.shuffle");
  std::vector<node_t> order = data.splits.train;
  std::vector<std::int32_t> targets;

  double best_val = -1.0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    shuffle_in_place(order.data(), order.size(), shuffle_gen);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min(config.batch_size, order.size() - start);
      const std::span<const node_t> ids(order.data() + start, count);
      targets.resize(count);
      for (std::size_t b = 0; b < count; ++b) targets[b] = data.labels[ids[b]];
      const TokenBatch batch = batch_view(tokens, ids);
      params.zero_grad();
      const double loss = loss_and_backward(model_config, params, batch, targets);
      optimizer.step(leaves);
      loss_sum += loss * static_cast<double>(count);
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_accuracy = evaluate(model_config, params, tokens, data.labels, data.splits.val, config.batch_size);
    result.report.epochs.push_back(rec);

    if (rec.val_accuracy > best_val) {
      best_val = rec.val_accuracy;
      result.report.best_epoch = epoch;
      result.best = params;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  result.report.best_val_accuracy = best_val;
  if (!data.splits.test.empty()) {
    result.report.has_test = true;
    result.report.test_accuracy =
        evaluate(model_config, result.best, tokens, data.labels, data.splits.test, config.batch_size);
  }
  result.best.zero_grad();
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

namespace {

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_report(const TrainReport& r, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  const auto& t = r.train_config;
  const auto& m = r.model_config;
  out << "# nagphormer train report\n";
  out << "config.lr=" << g17(t.lr) << "\n"
      << "config.weight_decay=" << g17(t.weight_decay) << "\n"
      << "config.batch_size=" << t.batch_size << "\n"
      << "config.max_epochs=" << t.max_epochs << "\n"
      << "config.patience=" << t.patience << "\n"
      << "config.seed=" << t.seed << "\n"
      << "config.beta1=" << g17(t.beta1) << "\n"
      << "config.beta2=" << g17(t.beta2) << "\n"
      << "config.eps=" << g17(t.eps) << "\n"
      << "model.K=" << m.K << "\n"
      << "model.d_prime=" << m.d_prime << "\n"
      << "model.hidden=" << m.d_model << "\n"
      << "model.layers=" << m.layers << "\n"
      << "model.heads=" << m.heads << "\n"
      << "model.classes=" << m.classes << "\n"
      << "model.readout=" << to_string(m.readout) << "\n"
      << "model.structural=" << (m.use_structural ? 1 : 0) << "\n"
      << "model.head_hidden=" << (m.head_hidden ? 1 : 0) << "\n";
  for (const auto& e : r.epochs)
    out << "epoch=" << e.epoch << " train_loss=" << g17(e.train_loss) << " val_acc=" << g17(e.val_accuracy) << "\n";
  out << "epochs_run=" << r.epochs.size() << "\n"
      << "best_epoch=" << r.best_epoch << "\n"
      << "best_val_acc=" << g17(r.best_val_accuracy) << "\n";
  if (r.has_test) out << "test_acc=" << g17(r.test_accuracy) << "\n";
  if (!out) throw DataError("failed writing " + path);
}

void write_summary_json(const TrainReport& r, const std::string& path) {
  nlohmann::ordered_json j;
  const auto& t = r.train_config;
  const auto& m = r.model_config;
  j["config"] = {{"lr", t.lr},           {"weight_decay", t.weight_decay}, {"batch_size", t.batch_size},
                 {"max_epochs", t.max_epochs}, {"patience", t.patience},   {"seed", t.seed},
                 {"beta1", t.beta1},     {"beta2", t.beta2},               {"eps", t.eps}};
  j["model"] = {{"K", m.K},           {"d_prime", m.d_prime},       {"hidden", m.d_model},
                {"layers", m.layers}, {"heads", m.heads},           {"classes", m.classes},
                {"readout", to_string(m.readout)}, {"structural", m.use_structural},
                {"head_hidden", m.head_hidden}};
  auto epochs = nlohmann::ordered_json::array();
  for (const auto& e : r.epochs)
    epochs.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"val_acc", e.val_accuracy}});
  j["epochs"] = std::move(epochs);
  j["best_epoch"] = r.best_epoch;
  j["best_val_acc"] = r.best_val_accuracy;
  j["test_acc"] = r.has_test ? nlohmann::ordered_json(r.test_accuracy) : nlohmann::ordered_json(nullptr);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
  if (!out) throw DataError("failed writing " + path);
}

}  // namespace nag

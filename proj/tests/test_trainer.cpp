#include <doctest.h>

#include <cmath>
#include <fstream>

#include "fd.hpp"
#include "helpers.hpp"
#include "nag/errors.hpp"
#include "nag/trainer.hpp"

using namespace nag;

namespace {

ParamLeaf scalar_leaf(double v, bool decay = true) {
  ParamLeaf p("theta", 1, 1, decay);
  p.value(0, 0) = v;
  return p;
}

// Two classes, K=1: class c nodes carry +-1 on feature c at both hops.
struct Toy {
  LabeledSplits data;
  TokenTensor tokens;
  ModelConfig config;
};

Toy separable_toy(std::size_t n = 20) {
  Toy t;
  const std::size_t d = 2;
  std::vector<double> values;
  std::mt19937_64 gen(5);
  std::normal_distribution<double> noise(0.0, 0.1);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    t.data.labels.push_back(label);
    for (std::size_t hop = 0; hop < 2; ++hop)
      for (std::size_t f = 0; f < d; ++f) values.push_back((f == static_cast<std::size_t>(label) ? 1.0 : -1.0) + noise(gen));
  }
  TokenMeta meta;
  meta.K = 1;
  t.tokens = TokenTensor(n, 1, d, std::move(values), meta);
  for (node_t i = 0; i < n; ++i) {
    if (i < n * 6 / 10) t.data.splits.train.push_back(i);
    else if (i < n * 8 / 10) t.data.splits.val.push_back(i);
    else t.data.splits.test.push_back(i);
  }
  t.config.K = 1;
  t.config.d_prime = d;
  t.config.d_model = 8;
  t.config.classes = 2;
  return t;
}

}  // namespace

TEST_CASE("train config validation") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.lr = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = {};
  c.patience = 51;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK(TrainConfig{}.lr == 1e-4);
  CHECK(TrainConfig{}.weight_decay == 1e-3);
  CHECK(TrainConfig{}.batch_size == 2000);
  CHECK(TrainConfig{}.max_epochs == 50);
}

TEST_CASE("AdamW: zero gradient without decay is a fixpoint") {
  TrainConfig c;
  c.weight_decay = 0.0;
  AdamW opt(c);
  ParamLeaf p = scalar_leaf(0.123456789);
  ParamLeaf q("w", 2, 3, true);
  q.value = testutil::random_tensor(2, 3, 1);
  const Tensor2 before = q.value;
  std::vector<ParamLeaf*> leaves{&p, &q};
  for (int i = 0; i < 3; ++i) opt.step(leaves);
  CHECK(p.value(0, 0) == 0.123456789);
  CHECK(q.value == before);
}

TEST_CASE("AdamW: pure decay is exact") {
  TrainConfig c;
  c.lr = 1e-2;
  c.weight_decay = 0.5;
  AdamW opt(c);
  ParamLeaf p = scalar_leaf(3.0);
  ParamLeaf nodecay = scalar_leaf(3.0, false);
  std::vector<ParamLeaf*> leaves{&p, &nodecay};
  opt.step(leaves);
  CHECK(p.value(0, 0) == 3.0 * (1.0 - 1e-2 * 0.5));
  CHECK(nodecay.value(0, 0) == 3.0);
}

TEST_CASE("AdamW: single step closed form") {
  TrainConfig c;
  c.weight_decay = 0.0;
  AdamW opt(c);
  ParamLeaf p = scalar_leaf(1.0);
  p.grad(0, 0) = 1.0;
  std::vector<ParamLeaf*> leaves{&p};
  opt.step(leaves);
  CHECK(std::abs(p.value(0, 0) - (1.0 - 1e-4 / (1.0 + 1e-8))) <= 1e-16);
  CHECK(opt.steps_taken() == 1);
}

TEST_CASE("AdamW: later steps use bias correction") {
  TrainConfig c;
  c.weight_decay = 0.0;
  c.lr = 0.1;
  AdamW opt(c);
  ParamLeaf p = scalar_leaf(0.0);
  std::vector<ParamLeaf*> leaves{&p};
  double m = 0, v = 0, theta = 0;
  const double grads[] = {1.0, -2.0, 0.5};
  for (int t = 1; t <= 3; ++t) {
    p.grad(0, 0) = grads[t - 1];
    opt.step(leaves);
    m = 0.9 * m + 0.1 * grads[t - 1];
    v = 0.999 * v + 0.001 * grads[t - 1] * grads[t - 1];
    theta -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
  }
  CHECK(std::abs(p.value(0, 0) - theta) <= 1e-15);
}

TEST_CASE("argmax breaks ties by lowest index") {
  std::vector<double> r{1, 3, 3, 2};
  CHECK(argmax_row(r) == 1);
  std::vector<double> z{0, 0};
  CHECK(argmax_row(z) == 0);
}

TEST_CASE("evaluate examples") {
  Toy t = separable_toy();
  ModelParams p = init_params(t.config, 1);
  p.head_w.value.fill(0.0);
  // all-zero head predicts class 0
  double freq0 = 0.0;
  for (node_t id : t.data.splits.test) freq0 += t.data.labels[id] == 0;
  freq0 /= static_cast<double>(t.data.splits.test.size());
  CHECK(evaluate(t.config, p, t.tokens, t.data.labels, t.data.splits.test) == freq0);
  std::vector<node_t> one{0};
  CHECK(evaluate(t.config, p, t.tokens, t.data.labels, one) == 1.0);  // node 0 has label 0
  CHECK_THROWS_AS(evaluate(t.config, p, t.tokens, t.data.labels, {}), ConfigError);
}

TEST_CASE("separable toy reaches full validation accuracy") {
  Toy t = separable_toy();
  TrainConfig c;
  c.lr = 1e-2;
  c.batch_size = 4;
  const TrainResult r = train(t.data, t.tokens, t.config, init_params(t.config, 2), c);
  CHECK(r.report.best_val_accuracy == 1.0);
  CHECK(evaluate(t.config, r.best, t.tokens, t.data.labels, t.data.splits.train) == 1.0);
  CHECK(r.report.test_accuracy == 1.0);
}

TEST_CASE("best epoch is the earliest maximum and weights match it") {
  Toy t = separable_toy(40);
  TrainConfig c;
  c.lr = 3e-3;
  c.batch_size = 7;  // last partial batch is used
  c.max_epochs = 12;
  c.patience = 12;
  const TrainResult r = train(t.data, t.tokens, t.config, init_params(t.config, 3), c);
  double best = -1.0;
  std::size_t best_epoch = 0;
  for (const auto& e : r.report.epochs)
    if (e.val_accuracy > best) {
      best = e.val_accuracy;
      best_epoch = e.epoch;
    }
  CHECK(r.report.best_epoch == best_epoch);
  CHECK(r.report.best_val_accuracy == best);
  CHECK(evaluate(t.config, r.best, t.tokens, t.data.labels, t.data.splits.val) == best);
}

TEST_CASE("patience stops training early") {
  Toy t = separable_toy();
  TrainConfig c;
  c.lr = 1e-2;
  c.batch_size = 4;
  c.max_epochs = 50;
  c.patience = 2;
  const TrainResult r = train(t.data, t.tokens, t.config, init_params(t.config, 2), c);
  CHECK(r.report.epochs.size() <= r.report.best_epoch + 2);
  CHECK(r.report.epochs.size() < 50);
}

TEST_CASE("training is deterministic") {
  Toy t = separable_toy(30);
  TrainConfig c;
  c.lr = 1e-3;
  c.batch_size = 8;
  c.max_epochs = 5;
  c.patience = 5;
  c.seed = 9;
  const TrainResult a = train(t.data, t.tokens, t.config, init_params(t.config, 9), c);
  const TrainResult b = train(t.data, t.tokens, t.config, init_params(t.config, 9), c);
  REQUIRE(a.report.epochs.size() == b.report.epochs.size());
  for (std::size_t i = 0; i < a.report.epochs.size(); ++i)
    CHECK(a.report.epochs[i].train_loss == b.report.epochs[i].train_loss);
  auto la = a.best.leaves();
  auto lb = b.best.leaves();
  for (std::size_t i = 0; i < la.size(); ++i) CHECK(la[i]->value == lb[i]->value);
  testutil::TempDir dir("report");
  write_report(a.report, dir.file("a.txt"));
  write_report(b.report, dir.file("b.txt"));
  CHECK(testutil::read_bytes(dir.file("a.txt")) == testutil::read_bytes(dir.file("b.txt")));
}

TEST_CASE("loss on a fixed batch decreases over the first steps") {
  ModelConfig cfg;
  cfg.K = 3;
  cfg.d_prime = 6;
  cfg.d_model = 16;
  cfg.layers = 2;
  cfg.heads = 2;
  cfg.classes = 4;
  ModelParams p = init_params(cfg, 0);
  const Tensor2 raw = testutil::random_tensor(8, 4 * 6, 31);
  TokenMeta meta;
  meta.K = 3;
  const TokenTensor tokens(8, 3, 6, std::vector<double>(raw.flat().begin(), raw.flat().end()), meta);
  std::vector<std::uint32_t> ids{0, 1, 2, 3, 4, 5, 6, 7};
  const TokenBatch batch = batch_view(tokens, ids);
  std::vector<std::int32_t> targets{0, 1, 2, 3, 0, 1, 2, 3};
  TrainConfig c;
  AdamW opt(c);
  auto leaves = p.leaves();
  double prev = ce_loss(forward(cfg, p, batch), targets, nullptr);
  for (int step = 0; step < 5; ++step) {
    p.zero_grad();
    loss_and_backward(cfg, p, batch, targets);
    opt.step(leaves);
    const double now = ce_loss(forward(cfg, p, batch), targets, nullptr);
    CHECK(now < prev);
    prev = now;
  }
}

TEST_CASE("train guards") {
  Toy t = separable_toy();
  TrainConfig c;
  LabeledSplits no_train = t.data;
  no_train.splits.train.clear();
  CHECK_THROWS_AS(train(no_train, t.tokens, t.config, init_params(t.config, 1), c), ConfigError);
  LabeledSplits short_labels = t.data;
  short_labels.labels.pop_back();
  CHECK_THROWS_AS(train(short_labels, t.tokens, t.config, init_params(t.config, 1), c), ConfigError);
  ModelConfig wrong_k = t.config;
  wrong_k.K = 2;
  CHECK_THROWS_AS(train(t.data, t.tokens, wrong_k, init_params(wrong_k, 1), c), ConfigError);
}

TEST_CASE("report files list every field") {
  Toy t = separable_toy();
  TrainConfig c;
  c.max_epochs = 2;
  c.patience = 2;
  const TrainResult r = train(t.data, t.tokens, t.config, init_params(t.config, 1), c);
  testutil::TempDir dir("report-fields");
  write_report(r.report, dir.file("r.txt"));
  write_summary_json(r.report, dir.file("r.json"));
  const std::string text = testutil::read_bytes(dir.file("r.txt"));
  for (const char* key : {"config.lr=", "config.batch_size=", "model.readout=attention", "epoch=1 ", "epoch=2 ",
                          "best_epoch=", "best_val_acc=", "test_acc="})
    CHECK(text.find(key) != std::string::npos);
  CHECK(text.find("wall") == std::string::npos);
  const std::string json = testutil::read_bytes(dir.file("r.json"));
  CHECK(json.find("\"best_val_acc\"") != std::string::npos);
  CHECK(json.find("\"epochs\"") != std::string::npos);
}

#include <doctest.h>

#include <cmath>
#include <set>

#include "fd.hpp"
#include "helpers.hpp"
#include "nag/errors.hpp"
#include "nag/model.hpp"
#include "nag/pipeline.hpp"
#include "nag/rng.hpp"

using namespace nag;
using testutil::max_rel_error;
using testutil::probe;
using testutil::random_tensor;

namespace {

ModelConfig small_config(std::uint32_t K = 3, std::uint32_t d_prime = 5) {
  ModelConfig c;
  c.K = K;
  c.d_prime = d_prime;
  c.d_model = 8;
  c.layers = 2;
  c.heads = 2;
  c.classes = 3;
  return c;
}

TokenTensor random_tokens(std::size_t n, std::uint32_t K, std::size_t d, std::uint64_t seed) {
  const Tensor2 t = random_tensor(n, (K + 1) * d, seed);
  TokenMeta meta;
  meta.K = K;
  return TokenTensor(n, K, d, std::vector<double>(t.flat().begin(), t.flat().end()), meta);
}

Tensor2 z_for(std::size_t batch, std::size_t seq_len, std::size_t dm, std::uint64_t seed) {
  return random_tensor(batch * seq_len, dm, seed);
}

ParamLeaf wa_leaf(std::size_t dm, std::uint64_t seed) {
  ParamLeaf w("readout.wa", 1, 2 * dm, true);
  w.value = random_tensor(1, 2 * dm, seed);
  return w;
}

}  // namespace

TEST_CASE("readout names parse and print") {
  CHECK(parse_readout("attention") == Readout::attention);
  CHECK(parse_readout("sum") == Readout::sum);
  CHECK(parse_readout("single") == Readout::single);
  CHECK(to_string(Readout::sum) == "sum");
  CHECK_THROWS_AS(parse_readout("mean"), ConfigError);
}

TEST_CASE("model config validation") {
  ModelConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.heads = 3;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.layers = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = small_config();
  c.K = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("parameter leaves have unique names, expected shapes and decay flags") {
  ModelConfig c = small_config();
  c.head_hidden = true;
  ModelParams p = init_params(c, 1);
  std::set<std::string> names;
  for (const ParamLeaf* l : p.leaves()) {
    CHECK(names.insert(l->name).second);
    CHECK(l->grad.rows() == l->value.rows());
    CHECK(l->grad.cols() == l->value.cols());
    const bool norm_or_bias = l->name.find("gamma") != std::string::npos || l->name.find("beta") != std::string::npos ||
                              l->name.find(".b") != std::string::npos || l->name == "head.hidden_b";
    CHECK(l->decay == !norm_or_bias);
  }
  CHECK(p.embed.value.rows() == 5);
  CHECK(p.embed.value.cols() == 8);
  CHECK(p.layers[0].ffn.w1.value.cols() == 32);
  CHECK(p.readout.value.cols() == 16);
  CHECK(p.head_w.value.cols() == 3);
  CHECK(p.layers[1].ln1.gamma.value(0, 0) == 1.0);
  CHECK(p.head_b.value(0, 0) == 0.0);
  CHECK(init_params(c, 1).embed.value == p.embed.value);
  CHECK(init_params(c, 2).embed.value != p.embed.value);
}

TEST_CASE("xavier initialization stays within its bound") {
  const ModelParams p = init_params(small_config(), 3);
  const double bound = std::sqrt(6.0 / (5 + 8));
  for (double v : p.embed.value.flat()) CHECK(std::abs(v) <= bound);
}

TEST_CASE("embed examples") {
  ParamLeaf e("embed", 4, 4, true);
  for (std::size_t i = 0; i < 4; ++i) e.value(i, i) = 1.0;
  const Tensor2 x = random_tensor(6, 4, 1);
  CHECK(embed(x, e) == x);
  e.value.fill(0.0);
  CHECK(embed(x, e) == Tensor2(6, 4));

  ParamLeaf r("embed", 3, 4, true);
  r.value = random_tensor(3, 4, 2);
  const Tensor2 tokens = random_tensor(2 * 3, 3, 3);  // B=2, K=2, d'=3
  const auto want = oracle::multiply(testutil::to_dense(tokens), testutil::to_dense(r.value));
  const Tensor2 got = embed(tokens, r);
  CHECK(oracle::max_abs_diff(std::vector<double>(got.flat().begin(), got.flat().end()), want.v) <= 1e-12);
}

TEST_CASE("zero-weight blocks are identity before the final norm") {
  ModelConfig c = small_config();
  ModelParams p = init_params(c, 4);
  for (auto& layer : p.layers) {
    for (ParamLeaf* l : {&layer.attn.wq, &layer.attn.wk, &layer.attn.wv, &layer.attn.wo, &layer.ffn.w1,
                         &layer.ffn.b1, &layer.ffn.w2, &layer.ffn.b2})
      l->value.fill(0.0);
  }
  const Tensor2 z0 = random_tensor(2 * c.seq_len(), 8, 5);
  CHECK(encode(z0, p, c, nullptr) == nn::layernorm_forward(z0, p.final_ln, nullptr));
}

TEST_CASE("one layer equals manual composition") {
  ModelConfig c = small_config();
  c.layers = 1;
  const ModelParams p = init_params(c, 6);
  const Tensor2 z = random_tensor(3 * c.seq_len(), 8, 7);
  const auto& layer = p.layers[0];
  Tensor2 zp = nn::attention_forward(nn::layernorm_forward(z, layer.ln1, nullptr), c.seq_len(), c.heads, layer.attn,
                                     nullptr);
  add_inplace(zp, z);
  Tensor2 out = nn::feedforward_forward(nn::layernorm_forward(zp, layer.ln2, nullptr), layer.ffn, nullptr);
  add_inplace(out, zp);
  CHECK(encode(z, p, c, nullptr) == nn::layernorm_forward(out, p.final_ln, nullptr));
}

TEST_CASE("attention readout with K=1 collapses to Z0 + Z1 exactly") {
  const Tensor2 z = z_for(4, 2, 6, 8);
  const ParamLeaf wa = wa_leaf(6, 9);
  ReadoutCache cache;
  const Tensor2 out = readout_forward(z, 2, wa, Readout::attention, &cache);
  for (std::size_t b = 0; b < 4; ++b) {
    CHECK(cache.alphas(b, 0) == 1.0);
    for (std::size_t j = 0; j < 6; ++j) CHECK(out(b, j) == z(2 * b, j) + z(2 * b + 1, j));
  }
}

TEST_CASE("attention readout with zero W_a averages the hops") {
  const std::size_t K = 4;
  const Tensor2 z = z_for(3, K + 1, 5, 10);
  ParamLeaf wa("readout.wa", 1, 10, true);
  ReadoutCache cache;
  const Tensor2 out = readout_forward(z, K + 1, wa, Readout::attention, &cache);
  for (std::size_t b = 0; b < 3; ++b)
    for (std::size_t j = 0; j < 5; ++j) {
      double mean = 0.0;
      for (std::size_t k = 1; k <= K; ++k) mean += z(b * (K + 1) + k, j) / K;
      CHECK(std::abs(out(b, j) - (z(b * (K + 1), j) + mean)) <= 1e-14);
      CHECK(cache.alphas(b, 0) == 0.25);
    }
}

TEST_CASE("sum and single readouts") {
  const std::size_t K = 2;
  Tensor2 z(K + 1, 3);
  for (std::size_t k = 0; k <= K; ++k) z(k, k) = 1.0;
  ParamLeaf wa("readout.wa", 1, 6, true);
  ReadoutCache cache;
  CHECK(readout_forward(z, K + 1, wa, Readout::sum, &cache) == Tensor2(1, 3, 1.0));
  const Tensor2 zr = z_for(2, 4, 3, 11);
  const Tensor2 single = readout_forward(zr, 4, wa, Readout::single, &cache);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(single(0, j) == zr(0, j));
    CHECK(single(1, j) == zr(4, j));
  }
}

TEST_CASE("hop attention coefficients are a distribution and shift invariant") {
  const std::size_t K = 6, dm = 8, B = 200;
  const Tensor2 z = z_for(B, K + 1, dm, 12);
  ParamLeaf wa = wa_leaf(dm, 13);
  ReadoutCache cache;
  const Tensor2 out = readout_forward(z, K + 1, wa, Readout::attention, &cache);
  for (std::size_t b = 0; b < B; ++b) {
    double s = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      CHECK(cache.alphas(b, k) > 0.0);
      CHECK(cache.alphas(b, k) <= 1.0);
      s += cache.alphas(b, k);
    }
    CHECK(std::abs(s - 1.0) <= 1e-12);
  }
  // Adding c to every hop logit of a node: shift the Z0 half of W_a against a constant column.
  Tensor2 shifted = z;
  for (std::size_t b = 0; b < B; ++b) shifted(b * (K + 1), 0) += 3.0;
  ReadoutCache cache2;
  readout_forward(shifted, K + 1, wa, Readout::attention, &cache2);
  for (std::size_t i = 0; i < cache.alphas.size(); ++i)
    CHECK(std::abs(cache.alphas.data()[i] - cache2.alphas.data()[i]) <= 1e-12);
}

TEST_CASE("readout gradients match finite differences") {
  for (Readout r : {Readout::attention, Readout::sum, Readout::single}) {
    CAPTURE(to_string(r));
    Tensor2 z = z_for(3, 4, 5, 14);
    ParamLeaf wa = wa_leaf(5, 15);
    const Tensor2 w = random_tensor(3, 5, 16);
    ReadoutCache cache;
    readout_forward(z, 4, wa, r, &cache);
    wa.zero_grad();
    const Tensor2 dz = readout_backward(w, z, 4, wa, r, cache);
    auto loss = [&] { return probe(readout_forward(z, 4, wa, r, nullptr), w); };
    CHECK(max_rel_error(loss, z, dz) <= 1e-6);
    CHECK(max_rel_error(loss, wa.value, wa.grad) <= 1e-6);
  }
}

TEST_CASE("cross-entropy values and gradient") {
  std::vector<std::int32_t> t0{0};
  CHECK(ce_loss(Tensor2(1, 2), t0, nullptr) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double big = ce_loss(Tensor2(1, 2, std::vector<double>{100, -100}), t0, nullptr);
  CHECK(std::isfinite(big));
  CHECK(big <= 1e-80);

  Tensor2 logits = random_tensor(8, 5, 17, 2.0);
  std::vector<std::int32_t> targets{0, 1, 2, 3, 4, 0, 2, 4};
  Tensor2 d;
  ce_loss(logits, targets, &d);
  CHECK(max_rel_error([&] { return ce_loss(logits, targets, nullptr); }, logits, d) <= 1e-6);
  std::vector<std::int32_t> bad{5, 0, 0, 0, 0, 0, 0, 0};
  CHECK_THROWS_AS(ce_loss(logits, bad, nullptr), InternalError);
}

TEST_CASE("classifier head examples") {
  ModelConfig c = small_config();
  c.d_model = 4;
  c.heads = 1;
  c.classes = 4;
  ModelParams p = init_params(c, 18);
  const TokenTensor tokens = random_tokens(5, c.K, c.d_prime, 19);
  std::vector<std::uint32_t> ids{0, 1, 2};
  const TokenBatch batch = batch_view(tokens, ids);
  p.head_w.value.fill(0.0);
  CHECK(forward(c, p, batch) == Tensor2(3, 4));
  for (std::size_t i = 0; i < 4; ++i) p.head_w.value(i, i) = 1.0;
  ForwardTrace trace;
  const Tensor2 logits = forward(c, p, batch, &trace);
  CHECK(logits == trace.pooled);
}

TEST_CASE("node outputs do not depend on the batch") {
  const ModelConfig c = small_config();
  const ModelParams p = init_params(c, 20);
  const TokenTensor tokens = random_tokens(7, c.K, c.d_prime, 21);
  std::vector<std::uint32_t> all{6, 2, 4, 0, 1};
  const Tensor2 batch_logits = forward(c, p, batch_view(tokens, all));
  for (std::size_t b = 0; b < all.size(); ++b) {
    std::vector<std::uint32_t> one{all[b]};
    const Tensor2 alone = forward(c, p, batch_view(tokens, one));
    for (std::size_t j = 0; j < c.classes; ++j) CHECK(alone(0, j) == batch_logits(b, j));
  }
}

TEST_CASE("full model gradients pass the finite-difference check") {
  GradCheckOptions opts;
  SUBCASE("default small configuration") {
    const GradCheckReport r = model_gradcheck(0, opts);
    CHECK(r.passed());
    CHECK(r.leaves.size() == 1 + 2 * 12 + 2 + 1 + 2);
  }
  SUBCASE("hidden head") {
    ModelGradCheckSetup s;
    s.head_hidden = true;
    CHECK(model_gradcheck(1, opts, s).passed());
  }
}

TEST_CASE("gradients for sum and single readouts") {
  for (Readout r : {Readout::sum, Readout::single}) {
    ModelConfig c = small_config();
    c.readout = r;
    ModelParams p = init_params(c, 22);
    const TokenTensor tokens = random_tokens(4, c.K, c.d_prime, 23);
    std::vector<std::uint32_t> ids{0, 3};
    const TokenBatch batch = batch_view(tokens, ids);
    std::vector<std::int32_t> targets{1, 2};
    auto leaves = p.leaves();
    const GradCheckReport rep = grad_check([&] { return ce_loss(forward(c, p, batch), targets, nullptr); },
                                           [&] { loss_and_backward(c, p, batch, targets); }, leaves);
    CAPTURE(rep.format());
    CHECK(rep.passed());
  }
}

TEST_CASE("model file round trip and load errors") {
  testutil::TempDir dir("model");
  ModelConfig c = small_config();
  c.readout = Readout::single;
  c.head_hidden = true;
  const ModelParams p = init_params(c, 24);
  save_model(p, c, dir.file("m.bin"));
  const LoadedModel m = load_model(dir.file("m.bin"));
  CHECK(m.config == c);
  auto a = p.leaves();
  auto b = m.params.leaves();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i]->name == b[i]->name);
    CHECK(a[i]->value == b[i]->value);
    CHECK(a[i]->decay == b[i]->decay);
  }

  const std::string bytes = testutil::read_bytes(dir.file("m.bin"));
  CHECK(bytes.substr(0, 4) == "NAGM");
  auto failure_of = [&](const std::string& content) {
    testutil::write_text(dir.file("x.bin"), content);
    try {
      load_model(dir.file("x.bin"));
    } catch (const LoadError& e) {
      return std::make_pair(e.failure(), std::string(e.what()));
    }
    return std::make_pair(LoadFailure::not_found, std::string("no error"));
  };
  auto [f1, m1] = failure_of(bytes.substr(0, bytes.size() - 3));
  CHECK(f1 == LoadFailure::truncated);
  CHECK(m1.find("truncated model file") != std::string::npos);
  CHECK(failure_of(bytes + "!").first == LoadFailure::trailing_bytes);
  std::string v2 = bytes;
  v2[4] = 9;
  CHECK(failure_of(v2).first == LoadFailure::version_mismatch);
  std::string renamed = bytes;
  const auto pos = renamed.find("embed");
  renamed[pos] = 'X';
  CHECK(failure_of(renamed).first == LoadFailure::manifest_mismatch);
  try {
    load_model(dir.file("nope.bin"));
    FAIL("expected error");
  } catch (const LoadError& e) {
    CHECK(e.failure() == LoadFailure::not_found);
    CHECK(std::string(e.what()).find("model file not found") != std::string::npos);
  }
}

TEST_CASE("compatibility check names both sides") {
  const ModelConfig c = small_config(3, 5);
  CHECK_NOTHROW(check_compatible(c, random_tokens(2, 3, 5, 1)));
  try {
    check_compatible(c, random_tokens(2, 4, 5, 1));
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("K=4") != std::string::npos);
    CHECK(msg.find("K=3") != std::string::npos);
  }
}

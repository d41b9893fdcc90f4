#include "nag/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nag/errors.hpp"
#include "nag/rng.hpp"

namespace nag {

std::string to_string(Readout r) {
  switch (r) {
    case Readout::attention: return "attention";
    case Readout::sum: return "sum";
    case Readout::single: return "single";
  }
  return "unknown";
}

Readout parse_readout(const std::string& name) {
  if (name == "attention") return Readout::attention;
  if (name == "sum") return Readout::sum;
  if (name == "single") return Readout::single;
  throw ConfigError("unknown readout '" + name + "' (expected attention|sum|single)");
}

void ModelConfig::validate() const {
  std::ostringstream os;
  if (K < 1 || K > max_hops) os << "K must be in [1, 32]; ";
  if (d_prime < 1) os << "token dimension must be >= 1; ";
  if (d_model < 1) os << "hidden dimension must be >= 1; ";
  if (layers < 1) os << "layer count must be >= 1; ";
  if (heads < 1 || (d_model % heads) != 0) os << "hidden dimension " << d_model << " not divisible by heads " << heads << "; ";
  if (classes < 1) os << "class count must be >= 1; ";
  const std::string msg = os.str();
  if (!msg.empty()) throw ConfigError("invalid model config: " + msg.substr(0, msg.size() - 2));
}

std::vector<ParamLeaf*> ModelParams::leaves() {
  std::vector<ParamLeaf*> out{&embed};
  for (auto& l : layers) {
    for (ParamLeaf* p : {&l.ln1.gamma, &l.ln1.beta, &l.attn.wq, &l.attn.wk, &l.attn.wv, &l.attn.wo,
                         &l.ln2.gamma, &l.ln2.beta, &l.ffn.w1, &l.ffn.b1, &l.ffn.w2, &l.ffn.b2})
      out.push_back(p);
  }
  out.push_back(&final_ln.gamma);
  out.push_back(&final_ln.beta);
  out.push_back(&readout);
  if (!hidden_w.name.empty()) {
    out.push_back(&hidden_w);
    out.push_back(&hidden_b);
  }
  out.push_back(&head_w);
  out.push_back(&head_b);
  return out;
}

std::vector<const ParamLeaf*> ModelParams::leaves() const {
  auto mut = const_cast<ModelParams*>(this)->leaves();
  return {mut.begin(), mut.end()};
}

void ModelParams::zero_grad() {
  for (ParamLeaf* p : leaves()) p->zero_grad();
}

namespace {

void xavier_uniform(ParamLeaf& leaf, std::uint64_t seed) {
  auto gen = make_stream(seed, "init." + leaf.name);
  const double fan_in = static_cast<double>(leaf.value.rows());
  const double fan_out = static_cast<double>(leaf.value.cols());
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& x : leaf.value.flat()) x = (2.0 * uniform01(gen) - 1.0) * bound;
}

ParamLeaf weight(const std::string& name, std::size_t rows, std::size_t cols, std::uint64_t seed) {
  ParamLeaf p(name, rows, cols, true);
  xavier_uniform(p, seed);
  return p;
}

ParamLeaf bias(const std::string& name, std::size_t cols) { return ParamLeaf(name, 1, cols, false); }

nn::LayerNormParams layer_norm(const std::string& prefix, std::size_t d) {
  nn::LayerNormParams p{ParamLeaf(prefix + ".gamma", 1, d, false), ParamLeaf(prefix + ".beta", 1, d, false)};
  p.gamma.value.fill(1.0);
  return p;
}

}  // namespace

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  const std::size_t dm = config.d_model;
  const std::size_t ff = 4 * dm;
  ModelParams p;
  p.embed = weight("embed", config.d_prime, dm, seed);
  for (std::uint32_t l = 0; l < config.layers; ++l) {
    const std::string pre = "layer" + std::to_string(l);
    EncoderLayerParams layer;
    layer.ln1 = layer_norm(pre + ".ln1", dm);
    layer.attn.wq = weight(pre + ".attn.wq", dm, dm, seed);
    layer.attn.wk = weight(pre + ".attn.wk", dm, dm, seed);
    layer.attn.wv = weight(pre + ".attn.wv", dm, dm, seed);
    layer.attn.wo = weight(pre + ".attn.wo", dm, dm, seed);
    layer.ln2 = layer_norm(pre + ".ln2", dm);
    layer.ffn.w1 = weight(pre + ".ffn.w1", dm, ff, seed);
    layer.ffn.b1 = bias(pre + ".ffn.b1", ff);
    layer.ffn.w2 = weight(pre + ".ffn.w2", ff, dm, seed);
    layer.ffn.b2 = bias(pre + ".ffn.b2", dm);
    p.layers.push_back(std::move(layer));
  }
  p.final_ln = layer_norm("final_ln", dm);
  p.readout = weight("readout.wa", 1, 2 * dm, seed);
  if (config.head_hidden) {
    p.hidden_w = weight("head.hidden_w", dm, dm, seed);
    p.hidden_b = bias("head.hidden_b", dm);
  }
  p.head_w = weight("head.w", dm, config.classes, seed);
  p.head_b = bias("head.b", config.classes);
  return p;
}

Tensor2 batch_matrix(const TokenBatch& batch) {
  auto data = batch.data();
  return Tensor2(batch.batch() * batch.seq_len(), batch.d_prime(),
                 std::vector<double>(data.begin(), data.end()));
}

Tensor2 embed(const Tensor2& tokens, const ParamLeaf& e) {
  if (tokens.cols() != e.value.rows()) {
    std::ostringstream os;
    os << "embed: token dimension " << tokens.cols() << " != embedding rows " << e.value.rows();
    throw InternalError(os.str());
  }
  return matmul(tokens, e.value);
}

Tensor2 encode(const Tensor2& z0, const ModelParams& params, const ModelConfig& config,
               EncoderCache* cache) {
  if (cache != nullptr) cache->layers.assign(params.layers.size(), {});
  Tensor2 z = z0;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    EncoderLayerCache* lc = cache != nullptr ? &cache->layers[l] : nullptr;
    Tensor2 a = nn::layernorm_forward(z, layer.ln1, lc ? &lc->ln1 : nullptr);
    Tensor2 zp = nn::attention_forward(a, config.seq_len(), config.heads, layer.attn, lc ? &lc->attn : nullptr);
    add_inplace(zp, z);
    Tensor2 b = nn::layernorm_forward(zp, layer.ln2, lc ? &lc->ln2 : nullptr);
    z = nn::feedforward_forward(b, layer.ffn, lc ? &lc->ffn : nullptr);
    add_inplace(z, zp);
  }
  return nn::layernorm_forward(z, params.final_ln, cache ? &cache->final_ln : nullptr);
}

Tensor2 encode_backward(const Tensor2& d_out, ModelParams& params, const ModelConfig&,
                        const EncoderCache& cache) {
  Tensor2 d_z = nn::layernorm_backward(d_out, params.final_ln, cache.final_ln);
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    auto& layer = params.layers[l];
    const auto& lc = cache.layers[l];
    // z = ffn(ln2(zp)) + zp
    Tensor2 d_zp = nn::layernorm_backward(nn::feedforward_backward(d_z, layer.ffn, lc.ffn), layer.ln2, lc.ln2);
    add_inplace(d_zp, d_z);
    // zp = attn(ln1(z)) + z
    Tensor2 d_prev = nn::layernorm_backward(nn::attention_backward(d_zp, layer.attn, lc.attn), layer.ln1, lc.ln1);
    add_inplace(d_prev, d_zp);
    d_z = std::move(d_prev);
  }
  return d_z;
}

Tensor2 hop_scores(const Tensor2& z, std::size_t seq_len, const Tensor2& wa) {
  const std::size_t dm = z.cols();
  const std::size_t hops = seq_len - 1;
  const std::size_t batch = z.rows() / seq_len;
  if (wa.rows() != 1 || wa.cols() != 2 * dm) throw InternalError("readout: W_a must be 1 x 2d_m");
  Tensor2 scores(batch, hops);
  for (std::size_t b = 0; b < batch; ++b) {
    const auto z0 = z.row(b * seq_len);
    double self = 0.0;
    for (std::size_t c = 0; c < dm; ++c) self += z0[c] * wa(0, c);
    for (std::size_t k = 1; k <= hops; ++k) {
      const auto zk = z.row(b * seq_len + k);
      double other = 0.0;
      for (std::size_t c = 0; c < dm; ++c) other += zk[c] * wa(0, dm + c);
      scores(b, k - 1) = self + other;
    }
  }
  return scores;
}

Tensor2 readout_forward(const Tensor2& z, std::size_t seq_len, const ParamLeaf& wa, Readout variant,
                        ReadoutCache* cache) {
  if (seq_len == 0 || z.rows() % seq_len != 0) throw InternalError("readout: rows not a multiple of seq_len");
  const std::size_t dm = z.cols();
  const std::size_t batch = z.rows() / seq_len;
  Tensor2 out(batch, dm);
  switch (variant) {
    case Readout::single:
      for (std::size_t b = 0; b < batch; ++b) {
        auto src = z.row(b * seq_len);
        std::copy(src.begin(), src.end(), out.row(b).begin());
      }
      break;
    case Readout::sum:
      for (std::size_t b = 0; b < batch; ++b) {
        auto dst = out.row(b);
        for (std::size_t k = 0; k < seq_len; ++k) {
          auto src = z.row(b * seq_len + k);
          for (std::size_t c = 0; c < dm; ++c) dst[c] += src[c];
        }
      }
      break;
    case Readout::attention: {
      if (seq_len < 2) throw InternalError("attention readout needs K >= 1");
      Tensor2 alphas = hop_scores(z, seq_len, wa.value);
      for (std::size_t b = 0; b < batch; ++b) {
        nn::softmax_inplace(alphas.row(b));
        auto dst = out.row(b);
        auto z0 = z.row(b * seq_len);
        std::copy(z0.begin(), z0.end(), dst.begin());
        for (std::size_t k = 1; k < seq_len; ++k) {
          const double a = alphas(b, k - 1);
          auto zk = z.row(b * seq_len + k);
          for (std::size_t c = 0; c < dm; ++c) dst[c] += a * zk[c];
        }
      }
      if (cache != nullptr) cache->alphas = std::move(alphas);
      break;
    }
  }
  return out;
}

Tensor2 readout_backward(const Tensor2& d_out, const Tensor2& z, std::size_t seq_len, ParamLeaf& wa,
                         Readout variant, const ReadoutCache& cache) {
  const std::size_t dm = z.cols();
  const std::size_t batch = z.rows() / seq_len;
  Tensor2 d_z(z.rows(), dm);
  for (std::size_t b = 0; b < batch; ++b) {
    auto g = d_out.row(b);
    switch (variant) {
      case Readout::single: {
        auto dst = d_z.row(b * seq_len);
        std::copy(g.begin(), g.end(), dst.begin());
        break;
      }
      case Readout::sum:
        for (std::size_t k = 0; k < seq_len; ++k) {
          auto dst = d_z.row(b * seq_len + k);
          std::copy(g.begin(), g.end(), dst.begin());
        }
        break;
      case Readout::attention: {
        const std::size_t hops = seq_len - 1;
        std::vector<double> d_alpha(hops);
        double inner = 0.0;
        for (std::size_t k = 1; k <= hops; ++k) {
          auto zk = z.row(b * seq_len + k);
          double acc = 0.0;
          for (std::size_t c = 0; c < dm; ++c) acc += g[c] * zk[c];
          d_alpha[k - 1] = acc;
          inner += cache.alphas(b, k - 1) * acc;
        }
        auto z0 = z.row(b * seq_len);
        auto d0 = d_z.row(b * seq_len);
        for (std::size_t c = 0; c < dm; ++c) d0[c] = g[c];
        double score_sum = 0.0;
        for (std::size_t k = 1; k <= hops; ++k) {
          const double a = cache.alphas(b, k - 1);
          const double d_score = a * (d_alpha[k - 1] - inner);
          score_sum += d_score;
          auto zk = z.row(b * seq_len + k);
          auto dk = d_z.row(b * seq_len + k);
          for (std::size_t c = 0; c < dm; ++c) {
            dk[c] = a * g[c] + d_score * wa.value(0, dm + c);
            wa.grad(0, dm + c) += d_score * zk[c];
          }
        }
        for (std::size_t c = 0; c < dm; ++c) {
          d0[c] += score_sum * wa.value(0, c);
          wa.grad(0, c) += score_sum * z0[c];
        }
        break;
      }
    }
  }
  return d_z;
}

double ce_loss(const Tensor2& logits, std::span<const std::int32_t> targets, Tensor2* d_logits) {
  if (targets.size() != logits.rows()) throw InternalError("ce_loss: target count != batch size");
  const std::size_t batch = logits.rows();
  const std::size_t classes = logits.cols();
  if (d_logits != nullptr) *d_logits = Tensor2(batch, classes);
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    const auto row = logits.row(b);
    const auto t = targets[b];
    if (t < 0 || static_cast<std::size_t>(t) >= classes) throw InternalError("ce_loss: target out of range");
    const double peak = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - peak);
    const double lse = peak + std::log(sum);
    total += lse - row[static_cast<std::size_t>(t)];
    if (d_logits != nullptr) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double p = std::exp(row[c] - lse);
        (*d_logits)(b, c) = (p - (c == static_cast<std::size_t>(t) ? 1.0 : 0.0)) / static_cast<double>(batch);
      }
    }
  }
  return batch == 0 ? 0.0 : total / static_cast<double>(batch);
}

Tensor2 forward(const ModelConfig& config, const ModelParams& params, const TokenBatch& batch,
                ForwardTrace* trace) {
  if (batch.seq_len() != config.seq_len() || batch.d_prime() != config.d_prime) {
    std::ostringstream os;
    os << "batch shape (K+1=" << batch.seq_len() << ", d'=" << batch.d_prime()
       << ") does not match model (K+1=" << config.seq_len() << ", d'=" << config.d_prime << ")";
    throw InternalError(os.str());
  }
  Tensor2 tokens = batch_matrix(batch);
  Tensor2 z0 = embed(tokens, params.embed);
  Tensor2 encoded = encode(z0, params, config, trace ? &trace->encoder : nullptr);
  Tensor2 pooled = readout_forward(encoded, config.seq_len(), params.readout, config.readout,
                                   trace ? &trace->readout : nullptr);
  Tensor2 logits;
  if (config.head_hidden) {
    Tensor2 pre = nn::linear_forward(pooled, params.hidden_w.value, &params.hidden_b.value);
    Tensor2 act = nn::gelu_forward(pre);
    logits = nn::linear_forward(act, params.head_w.value, &params.head_b.value);
    if (trace) {
      trace->hidden_pre = std::move(pre);
      trace->hidden_act = std::move(act);
    }
  } else {
    logits = nn::linear_forward(pooled, params.head_w.value, &params.head_b.value);
  }
  if (trace) {
    trace->tokens = std::move(tokens);
    trace->encoded = std::move(encoded);
    trace->pooled = std::move(pooled);
  }
  return logits;
}

void backward(const ModelConfig& config, ModelParams& params, const ForwardTrace& trace,
              const Tensor2& d_logits) {
  Tensor2 d_pooled;
  if (config.head_hidden) {
    Tensor2 d_act = nn::linear_backward(trace.hidden_act, params.head_w.value, d_logits, params.head_w.grad,
                                        &params.head_b.grad);
    Tensor2 d_pre = nn::gelu_backward(trace.hidden_pre, d_act);
    d_pooled = nn::linear_backward(trace.pooled, params.hidden_w.value, d_pre, params.hidden_w.grad,
                                   &params.hidden_b.grad);
  } else {
    d_pooled = nn::linear_backward(trace.pooled, params.head_w.value, d_logits, params.head_w.grad,
                                   &params.head_b.grad);
  }
  Tensor2 d_encoded = readout_backward(d_pooled, trace.encoded, config.seq_len(), params.readout,
                                       config.readout, trace.readout);
  Tensor2 d_z0 = encode_backward(d_encoded, params, config, trace.encoder);
  matmul_tn_acc(trace.tokens, d_z0, params.embed.grad);
}

double loss_and_backward(const ModelConfig& config, ModelParams& params, const TokenBatch& batch,
                         std::span<const std::int32_t> targets) {
  ForwardTrace trace;
  Tensor2 logits = forward(config, params, batch, &trace);
  Tensor2 d_logits;
  const double loss = ce_loss(logits, targets, &d_logits);
  backward(config, params, trace, d_logits);
  return loss;
}

void check_compatible(const ModelConfig& config, const TokenTensor& tokens) {
  if (tokens.K() != config.K || tokens.d_prime() != config.d_prime) {
    std::ostringstream os;
    os << "token cache (K=" << tokens.K() << ", d'=" << tokens.d_prime()
       << ") is incompatible with model (K=" << config.K << ", d'=" << config.d_prime << ")";
    throw ConfigError(os.str());
  }
}

}  // namespace nag

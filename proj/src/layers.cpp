#include "nag/layers.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "nag/errors.hpp"

namespace nag::nn {

Tensor2 linear_forward(const Tensor2& h, const Tensor2& w, const Tensor2* bias) {
  Tensor2 out(h.rows(), w.cols());
  if (bias != nullptr) {
    if (bias->rows() != 1 || bias->cols() != w.cols()) throw InternalError("linear: bias shape");
    for (std::size_t r = 0; r < out.rows(); ++r) {
      auto row = out.row(r);
      std::copy(bias->flat().begin(), bias->flat().end(), row.begin());
    }
  }
  matmul_acc(h, w, out);
  return out;
}

Tensor2 linear_backward(const Tensor2& h, const Tensor2& w, const Tensor2& d_out, Tensor2& d_w,
                        Tensor2* d_bias) {
  matmul_tn_acc(h, d_out, d_w);
  if (d_bias != nullptr) {
    for (std::size_t r = 0; r < d_out.rows(); ++r)
      for (std::size_t c = 0; c < d_out.cols(); ++c) (*d_bias)(0, c) += d_out(r, c);
  }
  return matmul_nt(d_out, w);
}

void softmax_inplace(std::span<double> row) {
  if (row.empty()) return;
  const double peak = *std::max_element(row.begin(), row.end());
  double total = 0.0;
  for (double& x : row) {
    x = std::exp(x - peak);
    total += x;
  }
  for (double& x : row) x /= total;
}

Tensor2 softmax_rows(const Tensor2& s) {
  Tensor2 p = s;
  for (std::size_t r = 0; r < p.rows(); ++r) softmax_inplace(p.row(r));
  return p;
}

Tensor2 softmax_rows_backward(const Tensor2& p, const Tensor2& d_p) {
  Tensor2 d_s(p.rows(), p.cols());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double inner = 0.0;
    for (std::size_t c = 0; c < p.cols(); ++c) inner += p(r, c) * d_p(r, c);
    for (std::size_t c = 0; c < p.cols(); ++c) d_s(r, c) = p(r, c) * (d_p(r, c) - inner);
  }
  return d_s;
}

Tensor2 layernorm_forward(const Tensor2& x, const LayerNormParams& p, LayerNormCache* cache) {
  const std::size_t d = x.cols();
  if (p.gamma.value.cols() != d || p.beta.value.cols() != d) throw InternalError("layernorm: width mismatch");
  Tensor2 out(x.rows(), d);
  Tensor2 normalized(x.rows(), d);
  std::vector<double> inv_std(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto row = x.row(r);
    double mean = 0.0;
    for (double v : row) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : row) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + layernorm_eps);
    inv_std[r] = is;
    for (std::size_t c = 0; c < d; ++c) {
      const double xhat = (row[c] - mean) * is;
      normalized(r, c) = xhat;
      out(r, c) = xhat * p.gamma.value(0, c) + p.beta.value(0, c);
    }
  }
  if (cache != nullptr) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

Tensor2 layernorm_backward(const Tensor2& d_out, LayerNormParams& p, const LayerNormCache& cache) {
  const std::size_t d = d_out.cols();
  const double inv_d = 1.0 / static_cast<double>(d);
  Tensor2 d_x(d_out.rows(), d);
  std::vector<double> g(d);
  for (std::size_t r = 0; r < d_out.rows(); ++r) {
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double xhat = cache.normalized(r, c);
      p.gamma.grad(0, c) += d_out(r, c) * xhat;
      p.beta.grad(0, c) += d_out(r, c);
      g[c] = d_out(r, c) * p.gamma.value(0, c);
      sum_g += g[c];
      sum_gx += g[c] * xhat;
    }
    for (std::size_t c = 0; c < d; ++c) {
      const double xhat = cache.normalized(r, c);
      d_x(r, c) = cache.inv_std[r] * (g[c] - inv_d * sum_g - xhat * inv_d * sum_gx);
    }
  }
  return d_x;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 * 0.5)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 * 0.5));
  const double pdf = std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
  return cdf + x * pdf;
}

Tensor2 gelu_forward(const Tensor2& x) {
  Tensor2 y(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) y.data()[i] = gelu(x.data()[i]);
  return y;
}

Tensor2 gelu_backward(const Tensor2& x, const Tensor2& d_out) {
  Tensor2 d_x(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.size(); ++i) d_x.data()[i] = d_out.data()[i] * gelu_grad(x.data()[i]);
  return d_x;
}

Tensor2 AttentionCache::weights(std::size_t group, std::size_t head) const {
  Tensor2 w(seq_len, seq_len);
  const double* src = probs.data() + (group * heads + head) * seq_len * seq_len;
  std::copy(src, src + seq_len * seq_len, w.data());
  return w;
}

Tensor2 attention_forward(const Tensor2& h, std::size_t seq_len, std::size_t heads,
                          const AttentionParams& p, AttentionCache* cache) {
  const std::size_t d_model = h.cols();
  if (heads == 0 || d_model % heads != 0) {
    std::ostringstream os;
    os << "hidden dimension " << d_model << " is not divisible by " << heads << " attention heads";
    throw ConfigError(os.str());
  }
  if (seq_len == 0 || h.rows() % seq_len != 0) throw InternalError("attention: rows not a multiple of seq_len");
  const std::size_t groups = h.rows() / seq_len;
  const std::size_t dk = d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Tensor2 q = matmul(h, p.wq.value);
  Tensor2 k = matmul(h, p.wk.value);
  Tensor2 v = matmul(h, p.wv.value);
  Tensor2 concat(h.rows(), d_model);
  std::vector<double> probs(groups * heads * seq_len * seq_len);
  std::vector<double> scores(seq_len);

  for (std::size_t g = 0; g < groups; ++g) {
    const std::size_t base = g * seq_len;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const std::size_t c0 = hd * dk;
      double* pg = probs.data() + (g * heads + hd) * seq_len * seq_len;
      for (std::size_t i = 0; i < seq_len; ++i) {
        for (std::size_t j = 0; j < seq_len; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < dk; ++c) acc += q(base + i, c0 + c) * k(base + j, c0 + c);
          scores[j] = acc * scale;
        }
        softmax_inplace(scores);
        std::copy(scores.begin(), scores.end(), pg + i * seq_len);
        for (std::size_t c = 0; c < dk; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j < seq_len; ++j) acc += scores[j] * v(base + j, c0 + c);
          concat(base + i, c0 + c) = acc;
        }
      }
    }
  }

  Tensor2 out = matmul(concat, p.wo.value);
  if (cache != nullptr) {
    cache->input = h;
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->concat = std::move(concat);
    cache->probs = std::move(probs);
    cache->groups = groups;
    cache->seq_len = seq_len;
    cache->heads = heads;
  }
  return out;
}

Tensor2 attention_backward(const Tensor2& d_out, AttentionParams& p, const AttentionCache& cache) {
  const std::size_t seq_len = cache.seq_len;
  const std::size_t heads = cache.heads;
  const std::size_t d_model = cache.input.cols();
  const std::size_t dk = d_model / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Tensor2 d_concat = linear_backward(cache.concat, p.wo.value, d_out, p.wo.grad);
  Tensor2 d_q(cache.q.rows(), d_model);
  Tensor2 d_k(cache.k.rows(), d_model);
  Tensor2 d_v(cache.v.rows(), d_model);
  std::vector<double> d_p(seq_len * seq_len);

  for (std::size_t g = 0; g < cache.groups; ++g) {
    const std::size_t base = g * seq_len;
    for (std::size_t hd = 0; hd < heads; ++hd) {
      const std::size_t c0 = hd * dk;
      const double* pg = cache.probs.data() + (g * heads + hd) * seq_len * seq_len;
      for (std::size_t i = 0; i < seq_len; ++i) {
        for (std::size_t j = 0; j < seq_len; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < dk; ++c) acc += d_concat(base + i, c0 + c) * cache.v(base + j, c0 + c);
          d_p[i * seq_len + j] = acc;
        }
      }
      for (std::size_t j = 0; j < seq_len; ++j) {
        for (std::size_t c = 0; c < dk; ++c) {
          double acc = 0.0;
          for (std::size_t i = 0; i < seq_len; ++i) acc += pg[i * seq_len + j] * d_concat(base + i, c0 + c);
          d_v(base + j, c0 + c) = acc;
        }
      }
      // d_p becomes dL/dscores in place.
      for (std::size_t i = 0; i < seq_len; ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < seq_len; ++j) inner += pg[i * seq_len + j] * d_p[i * seq_len + j];
        for (std::size_t j = 0; j < seq_len; ++j)
          d_p[i * seq_len + j] = pg[i * seq_len + j] * (d_p[i * seq_len + j] - inner) * scale;
      }
      for (std::size_t i = 0; i < seq_len; ++i) {
        for (std::size_t c = 0; c < dk; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j < seq_len; ++j) acc += d_p[i * seq_len + j] * cache.k(base + j, c0 + c);
          d_q(base + i, c0 + c) = acc;
        }
      }
      for (std::size_t j = 0; j < seq_len; ++j) {
        for (std::size_t c = 0; c < dk; ++c) {
          double acc = 0.0;
          for (std::size_t i = 0; i < seq_len; ++i) acc += d_p[i * seq_len + j] * cache.q(base + i, c0 + c);
          d_k(base + j, c0 + c) = acc;
        }
      }
    }
  }

  Tensor2 d_h = linear_backward(cache.input, p.wq.value, d_q, p.wq.grad);
  add_inplace(d_h, linear_backward(cache.input, p.wk.value, d_k, p.wk.grad));
  add_inplace(d_h, linear_backward(cache.input, p.wv.value, d_v, p.wv.grad));
  return d_h;
}

Tensor2 feedforward_forward(const Tensor2& x, const FeedForwardParams& p, FeedForwardCache* cache) {
  Tensor2 pre = linear_forward(x, p.w1.value, &p.b1.value);
  Tensor2 act = gelu_forward(pre);
  Tensor2 out = linear_forward(act, p.w2.value, &p.b2.value);
  if (cache != nullptr) {
    cache->input = x;
    cache->pre_activation = std::move(pre);
    cache->activation = std::move(act);
  }
  return out;
}

Tensor2 feedforward_backward(const Tensor2& d_out, FeedForwardParams& p, const FeedForwardCache& cache) {
  Tensor2 d_act = linear_backward(cache.activation, p.w2.value, d_out, p.w2.grad, &p.b2.grad);
  Tensor2 d_pre = gelu_backward(cache.pre_activation, d_act);
  return linear_backward(cache.input, p.w1.value, d_pre, p.w1.grad, &p.b1.grad);
}

}  // namespace nag::nn

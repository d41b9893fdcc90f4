#pragma once

#include <cstddef>
#include <vector>

#include "nag/tensor.hpp"

namespace nag::nn {

// ---- linear -------------------------------------------------------------

// out = h * w (+ bias broadcast over rows). bias, when given, is 1 x cols(w).
Tensor2 linear_forward(const Tensor2& h, const Tensor2& w, const Tensor2* bias = nullptr);

// Accumulates into d_w / d_bias; returns dL/dh.
Tensor2 linear_backward(const Tensor2& h, const Tensor2& w, const Tensor2& d_out, Tensor2& d_w,
                        Tensor2* d_bias = nullptr);

// ---- softmax ------------------------------------------------------------

void softmax_inplace(std::span<double> row);
Tensor2 softmax_rows(const Tensor2& s);
// dL/dS given P = softmax(S) and dL/dP, row by row.
Tensor2 softmax_rows_backward(const Tensor2& p, const Tensor2& d_p);

// ---- layer norm ---------------------------------------------------------

inline constexpr double layernorm_eps = 1e-5;

struct LayerNormParams {
  ParamLeaf gamma;  // 1 x d
  ParamLeaf beta;   // 1 x d
};

struct LayerNormCache {
  Tensor2 normalized;            // (x - mean) / sqrt(var + eps)
  std::vector<double> inv_std;   // per row
};

// Row-wise LayerNorm with population variance.
Tensor2 layernorm_forward(const Tensor2& x, const LayerNormParams& p, LayerNormCache* cache);
Tensor2 layernorm_backward(const Tensor2& d_out, LayerNormParams& p, const LayerNormCache& cache);

// ---- GELU (exact, erf form) ---------------------------------------------

double gelu(double x);
double gelu_grad(double x);
Tensor2 gelu_forward(const Tensor2& x);
Tensor2 gelu_backward(const Tensor2& x, const Tensor2& d_out);

// ---- multi-head self-attention ------------------------------------------

struct AttentionParams {
  ParamLeaf wq, wk, wv, wo;  // each d_m x d_m
};

struct AttentionCache {
  Tensor2 input;
  Tensor2 q, k, v;
  Tensor2 concat;              // heads concatenated, before wo
  std::vector<double> probs;   // [group][head][i][j]
  std::size_t groups = 0;
  std::size_t seq_len = 0;
  std::size_t heads = 0;

  // Attention weights of one group and head, seq_len x seq_len.
  Tensor2 weights(std::size_t group, std::size_t head) const;
};

// h holds `groups` independent sequences of seq_len rows each; attention never
// mixes rows of different groups. Throws ConfigError if d_m % heads != 0.
Tensor2 attention_forward(const Tensor2& h, std::size_t seq_len, std::size_t heads,
                          const AttentionParams& p, AttentionCache* cache);
Tensor2 attention_backward(const Tensor2& d_out, AttentionParams& p, const AttentionCache& cache);

// ---- position-wise feed-forward -----------------------------------------

struct FeedForwardParams {
  ParamLeaf w1, b1;  // d_m x 4d_m, 1 x 4d_m
  ParamLeaf w2, b2;  // 4d_m x d_m, 1 x d_m
};

struct FeedForwardCache {
  Tensor2 input;
  Tensor2 pre_activation;
  Tensor2 activation;
};

Tensor2 feedforward_forward(const Tensor2& x, const FeedForwardParams& p, FeedForwardCache* cache);
Tensor2 feedforward_backward(const Tensor2& d_out, FeedForwardParams& p, const FeedForwardCache& cache);

}  // namespace nag::nn

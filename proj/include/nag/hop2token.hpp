#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nag/graph.hpp"
#include "nag/tensor.hpp"

namespace nag {

using Sha256 = std::array<std::uint8_t, 32>;

enum class NormTag : std::uint8_t { symmetric = 0 };

struct TokenMeta {
  std::uint32_t K = 0;
  std::uint32_t s = 0;  // structural eigenvectors in the fused features (0 = disabled)
  NormTag norm = NormTag::symmetric;
  Sha256 input_hash{};

  friend bool operator==(const TokenMeta&, const TokenMeta&) = default;
};

// Per-node hop sequences, row-major [node][hop][feature].
class TokenTensor {
 public:
  TokenTensor() = default;
  TokenTensor(std::size_t n, std::size_t hops, std::size_t d_prime, std::vector<double> data,
              TokenMeta meta);

  std::size_t n() const noexcept { return n_; }
  std::size_t K() const noexcept { return hops_; }
  std::size_t seq_len() const noexcept { return hops_ + 1; }
  std::size_t d_prime() const noexcept { return d_prime_; }
  const TokenMeta& meta() const noexcept { return meta_; }
  std::span<const double> data() const noexcept { return data_; }

  std::span<const double> sequence(std::size_t node) const {
    return {data_.data() + node * seq_len() * d_prime_, seq_len() * d_prime_};
  }
  std::span<const double> token(std::size_t node, std::size_t hop) const {
    return {data_.data() + (node * seq_len() + hop) * d_prime_, d_prime_};
  }

  friend bool operator==(const TokenTensor&, const TokenTensor&) = default;

 private:
  std::size_t n_ = 0;
  std::size_t hops_ = 0;
  std::size_t d_prime_ = 0;
  std::vector<double> data_;
  TokenMeta meta_;
};

inline constexpr std::uint32_t default_hops = 10;
inline constexpr std::uint32_t max_hops = 32;

// Hop k of every node is row v of Â^k X', built by K successive sparse-dense
// products. meta.K is overwritten with K.
TokenTensor propagate(const CsrMatrix& adj_norm, const Tensor2& x_fused, std::uint32_t K,
                      TokenMeta meta = {});

// SHA-256 over: each undirected edge (u < v) as two u64, raw feature values as
// f64 row-major, then K and s as u32. All little-endian.
Sha256 input_hash(const CsrMatrix& adj, const Tensor2& features, std::uint32_t K, std::uint32_t s);
std::string to_hex(const Sha256& h);

void write_cache(const TokenTensor& t, const std::string& path);
TokenTensor read_cache(const std::string& path);

// Throws LoadError(hash_mismatch) if t was not built from these inputs.
void verify_cache_inputs(const TokenTensor& t, const CsrMatrix& adj, const Tensor2& features);

// Gathered copy of a batch of node sequences, shape B x (K+1) x d'. Read-only.
class TokenBatch {
 public:
  TokenBatch(std::size_t batch, std::size_t seq_len, std::size_t d_prime, std::vector<double> data)
      : batch_(batch), seq_len_(seq_len), d_prime_(d_prime), data_(std::move(data)) {}

  std::size_t batch() const noexcept { return batch_; }
  std::size_t seq_len() const noexcept { return seq_len_; }
  std::size_t d_prime() const noexcept { return d_prime_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> sequence(std::size_t b) const {
    return {data_.data() + b * seq_len_ * d_prime_, seq_len_ * d_prime_};
  }

 private:
  std::size_t batch_;
  std::size_t seq_len_;
  std::size_t d_prime_;
  std::vector<double> data_;
};

TokenBatch batch_view(const TokenTensor& t, std::span<const std::uint32_t> node_ids);

// Allocation instrumentation for batch_view; lets callers assert that training
// only ever materializes batch-sized slices of the token tensor.
struct BatchViewStats {
  std::uint64_t calls = 0;
  std::uint64_t total_bytes = 0;
  std::uint64_t peak_bytes = 0;  // largest single gather
};
BatchViewStats batch_view_stats();
void reset_batch_view_stats();

}  // namespace nag

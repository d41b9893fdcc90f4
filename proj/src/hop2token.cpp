#include "nag/hop2token.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <memory>
#include <sstream>

#include "nag/binary_io.hpp"
#include "nag/errors.hpp"

namespace nag {
namespace {

constexpr char cache_magic[4] = {'N', 'A', 'G', 'T'};
constexpr std::uint32_t cache_version = 1;

std::atomic<std::uint64_t> g_calls{0};
std::atomic<std::uint64_t> g_total{0};
std::atomic<std::uint64_t> g_peak{0};

class Sha256Builder {
 public:
  Sha256Builder() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) {
    if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
      throw InternalError("sha256 init failed");
  }
  void update(const void* data, std::size_t len) {
    if (len != 0 && EVP_DigestUpdate(ctx_.get(), data, len) != 1)
      throw InternalError("sha256 update failed");
  }
  void update_le(std::uint64_t v, std::size_t width) {
    std::uint8_t raw[8];
    for (std::size_t i = 0; i < width; ++i) raw[i] = static_cast<std::uint8_t>(v >> (8 * i));
    update(raw, width);
  }
  Sha256 finish() {
    Sha256 out{};
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx_.get(), out.data(), &len) != 1 || len != out.size())
      throw InternalError("sha256 final failed");
    return out;
  }

 private:
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

TokenTensor::TokenTensor(std::size_t n, std::size_t hops, std::size_t d_prime,
                         std::vector<double> data, TokenMeta meta)
    : n_(n), hops_(hops), d_prime_(d_prime), data_(std::move(data)), meta_(meta) {
  if (data_.size() != n_ * (hops_ + 1) * d_prime_)
    throw InternalError("TokenTensor: data length != n*(K+1)*d'");
}

TokenTensor propagate(const CsrMatrix& adj_norm, const Tensor2& x_fused, std::uint32_t K,
                      TokenMeta meta) {
  if (K < 1 || K > max_hops) throw ConfigError("propagation steps K must be in [1, 32]");
  if (adj_norm.n_rows != x_fused.rows())
    throw InternalError("propagate: adjacency and feature row counts differ");
  const std::size_t n = x_fused.rows();
  const std::size_t d = x_fused.cols();
  const std::size_t seq = static_cast<std::size_t>(K) + 1;
  std::vector<double> data(n * seq * d);

  const auto scatter = [&](const Tensor2& slice, std::size_t hop) {
    for (std::size_t v = 0; v < n; ++v) {
      auto src = slice.row(v);
      std::copy(src.begin(), src.end(), data.begin() + static_cast<std::ptrdiff_t>((v * seq + hop) * d));
    }
  };

  scatter(x_fused, 0);
  Tensor2 current = x_fused;
  for (std::size_t hop = 1; hop <= K; ++hop) {
    current = spmm(adj_norm, current);
    scatter(current, hop);
  }
  meta.K = K;
  return TokenTensor(n, K, d, std::move(data), meta);
}

Sha256 input_hash(const CsrMatrix& adj, const Tensor2& features, std::uint32_t K, std::uint32_t s) {
  Sha256Builder h;
  for (const auto& [u, v] : to_edge_list(adj)) {
    h.update_le(u, 8);
    h.update_le(v, 8);
  }
  for (double x : features.flat()) h.update_le(std::bit_cast<std::uint64_t>(x), 8);
  h.update_le(K, 4);
  h.update_le(s, 4);
  return h.finish();
}

std::string to_hex(const Sha256& h) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  for (std::uint8_t b : h) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

void write_cache(const TokenTensor& t, const std::string& path) {
  io::ByteWriter w;
  w.bytes({reinterpret_cast<const std::uint8_t*>(cache_magic), 4});
  w.u32(cache_version);
  w.u64(t.n());
  w.u32(static_cast<std::uint32_t>(t.K()));
  w.u32(static_cast<std::uint32_t>(t.d_prime()));
  w.u32(t.meta().s);
  w.u8(static_cast<std::uint8_t>(t.meta().norm));
  w.zeros(3);
  w.bytes(t.meta().input_hash);

  auto out = io::open_for_write(path);
  out.write(reinterpret_cast<const char*>(w.buffer().data()),
            static_cast<std::streamsize>(w.buffer().size()));
  io::write_f64_array(out, t.data());
  out.flush();
  if (!out) throw DataError("failed writing token cache: " + path);
}

TokenTensor read_cache(const std::string& path) {
  auto in = io::open_for_read(path, "token cache");
  io::StreamReader r(in, "cache");
  std::uint8_t magic[4];
  try {
    r.bytes(magic);
  } catch (const LoadError&) {
    throw LoadError(LoadFailure::bad_magic, "not a token cache: " + path);
  }
  if (std::memcmp(magic, cache_magic, 4) != 0)
    throw LoadError(LoadFailure::bad_magic, "not a token cache: " + path);
  const std::uint32_t version = r.u32();
  if (version != cache_version) {
    std::ostringstream os;
    os << "token cache version " << version << " unsupported (expected " << cache_version << ")";
    throw LoadError(LoadFailure::version_mismatch, os.str());
  }
  const std::uint64_t n = r.u64();
  TokenMeta meta;
  meta.K = r.u32();
  const std::uint32_t d_prime = r.u32();
  meta.s = r.u32();
  const std::uint8_t norm = r.u8();
  if (norm != static_cast<std::uint8_t>(NormTag::symmetric))
    throw LoadError(LoadFailure::version_mismatch, "token cache uses an unknown normalization tag");
  meta.norm = NormTag::symmetric;
  std::uint8_t reserved[3];
  r.bytes(reserved);
  r.bytes(meta.input_hash);

  // Guard against absurd headers before allocating.
  in.seekg(0, std::ios::end);
  const auto end = static_cast<std::uint64_t>(in.tellg());
  constexpr std::uint64_t header_bytes = 4 + 4 + 8 + 4 + 4 + 4 + 1 + 3 + 32;
  in.seekg(static_cast<std::streamoff>(header_bytes));
  const std::uint64_t count = n * (static_cast<std::uint64_t>(meta.K) + 1) * d_prime;
  if (end - header_bytes < count * sizeof(double))
    throw LoadError(LoadFailure::truncated, "truncated cache: payload shorter than declared sizes");

  std::vector<double> data(count);
  r.f64_array(data);
  r.expect_end();
  return TokenTensor(n, meta.K, d_prime, std::move(data), meta);
}

void verify_cache_inputs(const TokenTensor& t, const CsrMatrix& adj, const Tensor2& features) {
  if (input_hash(adj, features, t.meta().K, t.meta().s) != t.meta().input_hash)
    throw LoadError(LoadFailure::hash_mismatch,
                    "token cache hash does not match the given graph and features");
}

TokenBatch batch_view(const TokenTensor& t, std::span<const std::uint32_t> node_ids) {
  const std::size_t row = t.seq_len() * t.d_prime();
  std::vector<double> data(node_ids.size() * row);
  for (std::size_t b = 0; b < node_ids.size(); ++b) {
    if (node_ids[b] >= t.n()) {
      std::ostringstream os;
      os << "batch_view: node id " << node_ids[b] << " >= n=" << t.n();
      throw InternalError(os.str());
    }
    auto seq = t.sequence(node_ids[b]);
    std::copy(seq.begin(), seq.end(), data.begin() + static_cast<std::ptrdiff_t>(b * row));
  }
  const std::uint64_t bytes = data.size() * sizeof(double);
  g_calls.fetch_add(1, std::memory_order_relaxed);
  g_total.fetch_add(bytes, std::memory_order_relaxed);
  std::uint64_t prev = g_peak.load(std::memory_order_relaxed);
  while (bytes > prev && !g_peak.compare_exchange_weak(prev, bytes, std::memory_order_relaxed)) {
  }
  return TokenBatch(node_ids.size(), t.seq_len(), t.d_prime(), std::move(data));
}

BatchViewStats batch_view_stats() {
  return {g_calls.load(), g_total.load(), g_peak.load()};
}

void reset_batch_view_stats() {
  g_calls = 0;
  g_total = 0;
  g_peak = 0;
}

}  // namespace nag

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "nag/errors.hpp"
#include "nag/hop2token.hpp"
#include "nag/pipeline.hpp"

using namespace nag;

namespace {

std::vector<double> span_vec(std::span<const double> s) { return {s.begin(), s.end()}; }

TokenTensor two_node_k2() {
  std::vector<Edge> e{{0, 1}};
  const CsrMatrix a = normalize_sym(build_csr(e, 2));
  return propagate(a, Tensor2(2, 2, std::vector<double>{1, 0, 0, 1}), 2);
}

}  // namespace

TEST_CASE("two-node swap symmetry") {
  const TokenTensor t = two_node_k2();
  CHECK(span_vec(t.token(0, 0)) == std::vector<double>{1, 0});
  CHECK(span_vec(t.token(0, 1)) == std::vector<double>{0, 1});
  CHECK(span_vec(t.token(0, 2)) == std::vector<double>{1, 0});
  CHECK(t.meta().K == 2);
}

TEST_CASE("triangle with identity features") {
  std::vector<Edge> e{{0, 1}, {1, 2}, {0, 2}};
  Tensor2 x(3, 3);
  for (std::size_t i = 0; i < 3; ++i) x(i, i) = 1.0;
  const TokenTensor t = propagate(normalize_sym(build_csr(e, 3)), x, 1);
  CHECK(span_vec(t.token(0, 0)) == std::vector<double>{1, 0, 0});
  const auto h1 = span_vec(t.token(0, 1));
  CHECK(h1[0] == 0.0);
  CHECK(h1[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(h1[2] == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("isolated node hops are zero") {
  std::vector<Edge> e{{0, 1}};
  const TokenTensor t = propagate(normalize_sym(build_csr(e, 3)), Tensor2(3, 2, 1.0), 4);
  for (std::size_t k = 1; k <= 4; ++k) CHECK(span_vec(t.token(2, k)) == std::vector<double>{0, 0});
  CHECK(span_vec(t.token(2, 0)) == std::vector<double>{1, 1});
}

TEST_CASE("K outside [1, 32] is rejected") {
  std::vector<Edge> e{{0, 1}};
  const CsrMatrix a = normalize_sym(build_csr(e, 2));
  CHECK_THROWS_AS(propagate(a, Tensor2(2, 1), 0), ConfigError);
  CHECK_THROWS_AS(propagate(a, Tensor2(2, 1), 33), ConfigError);
  CHECK_NOTHROW(propagate(a, Tensor2(2, 1), 32));
}

TEST_CASE("hop slices match dense matrix powers") {
  for (std::uint64_t seed = 0; seed < 8; ++seed) {
    const std::size_t n = seed % 2 ? 64 : 16;
    const double p = seed % 4 < 2 ? 0.1 : 0.3;
    const auto pairs = oracle::erdos_renyi(n, p, seed);
    const auto x = oracle::random_dense(n, 8, seed + 1000);
    const TokenTensor t = propagate(normalize_sym(build_csr(testutil::to_edges(pairs), n)), testutil::to_tensor(x), 6);
    const auto a = oracle::normalized(oracle::adjacency(pairs, n));
    oracle::Dense power = x;
    for (std::size_t k = 0; k <= 6; ++k) {
      double err = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t f = 0; f < 8; ++f) err = std::max(err, std::abs(t.token(i, k)[f] - power(i, f)));
      CHECK(err <= 1e-10);
      power = oracle::multiply(a, power);
    }
    // hop 0 is the input, bitwise
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t f = 0; f < 8; ++f) REQUIRE(t.token(i, 0)[f] == x(i, f));
  }
}

TEST_CASE("propagation is linear") {
  const auto pairs = oracle::erdos_renyi(30, 0.2, 4);
  const CsrMatrix a = normalize_sym(build_csr(testutil::to_edges(pairs), 30));
  const auto x1 = oracle::random_dense(30, 4, 1);
  const auto x2 = oracle::random_dense(30, 4, 2);
  oracle::Dense mix(30, 4);
  for (std::size_t i = 0; i < mix.v.size(); ++i) mix.v[i] = 2.5 * x1.v[i] - 0.75 * x2.v[i];
  const auto t1 = propagate(a, testutil::to_tensor(x1), 5);
  const auto t2 = propagate(a, testutil::to_tensor(x2), 5);
  const auto tm = propagate(a, testutil::to_tensor(mix), 5);
  double err = 0.0;
  for (std::size_t i = 0; i < tm.data().size(); ++i)
    err = std::max(err, std::abs(tm.data()[i] - (2.5 * t1.data()[i] - 0.75 * t2.data()[i])));
  CHECK(err <= 1e-10);
}

TEST_CASE("hop norms do not grow when every degree is at least 1") {
  auto pairs = oracle::erdos_renyi(40, 0.1, 6);
  for (std::uint32_t i = 0; i + 1 < 40; ++i) pairs.emplace_back(i, i + 1);
  const auto x = oracle::random_dense(40, 5, 6);
  const auto t = propagate(normalize_sym(build_csr(testutil::to_edges(pairs), 40)), testutil::to_tensor(x), 8);
  double x_norm = 0.0;
  for (double v : x.v) x_norm += v * v;
  for (std::size_t k = 0; k <= 8; ++k) {
    double hop_norm = 0.0;
    for (std::size_t i = 0; i < 40; ++i)
      for (double v : t.token(i, k)) hop_norm += v * v;
    CHECK(std::sqrt(hop_norm) <= std::sqrt(x_norm) * (1 + 1e-9));
  }
}

TEST_CASE("cache round trip is bitwise") {
  testutil::TempDir dir("cache");
  TokenTensor t = two_node_k2();
  write_cache(t, dir.file("t.bin"));
  CHECK(read_cache(dir.file("t.bin")) == t);

  std::vector<Edge> e{{0, 1}, {1, 2}};
  PreprocessOptions opts;
  opts.K = 3;
  opts.s = 1;
  const Tensor2 x(3, 2, std::vector<double>{1, 2, 3, 4, 5, 6});
  const TokenTensor full = preprocess(build_csr(e, 3), x, opts);
  write_cache(full, dir.file("full.bin"));
  const TokenTensor back = read_cache(dir.file("full.bin"));
  CHECK(back == full);
  CHECK(back.meta().s == 1);
  CHECK_NOTHROW(verify_cache_inputs(back, build_csr(e, 3), x));
  Tensor2 other = x;
  other(0, 0) = 9.0;
  try {
    verify_cache_inputs(back, build_csr(e, 3), other);
    FAIL("expected hash mismatch");
  } catch (const LoadError& err) {
    CHECK(err.failure() == LoadFailure::hash_mismatch);
  }
}

TEST_CASE("cache load errors are distinct") {
  testutil::TempDir dir("cache-bad");
  const TokenTensor t = two_node_k2();
  write_cache(t, dir.file("good.bin"));
  const std::string good = testutil::read_bytes(dir.file("good.bin"));

  auto failure_of = [&](const std::string& bytes) {
    testutil::write_text(dir.file("x.bin"), bytes);
    try {
      read_cache(dir.file("x.bin"));
    } catch (const LoadError& e) {
      return std::make_pair(e.failure(), std::string(e.what()));
    }
    return std::make_pair(LoadFailure::not_found, std::string("no error"));
  };

  std::string bad_magic = good;
  bad_magic[0] = 'X';
  auto [f1, m1] = failure_of(bad_magic);
  CHECK(f1 == LoadFailure::bad_magic);
  CHECK(m1.find("not a token cache") != std::string::npos);

  std::string bad_version = good;
  bad_version[4] = 2;
  CHECK(failure_of(bad_version).first == LoadFailure::version_mismatch);

  auto [f3, m3] = failure_of(good.substr(0, good.size() - 8));
  CHECK(f3 == LoadFailure::truncated);
  CHECK(m3.find("truncated cache") != std::string::npos);

  CHECK(failure_of(good.substr(0, 20)).first == LoadFailure::truncated);
  CHECK(failure_of(good + "x").first == LoadFailure::trailing_bytes);

  try {
    read_cache(dir.file("missing.bin"));
    FAIL("expected not_found");
  } catch (const LoadError& e) {
    CHECK(e.failure() == LoadFailure::not_found);
  }
}

TEST_CASE("cache header layout") {
  testutil::TempDir dir("cache-layout");
  const TokenTensor t = two_node_k2();
  write_cache(t, dir.file("t.bin"));
  const std::string bytes = testutil::read_bytes(dir.file("t.bin"));
  CHECK(bytes.substr(0, 4) == "NAGT");
  const std::size_t header = 4 + 4 + 8 + 4 + 4 + 4 + 1 + 3 + 32;
  CHECK(bytes.size() == header + 2 * 3 * 2 * 8);
  CHECK(static_cast<unsigned char>(bytes[8]) == 2);   // n
  CHECK(static_cast<unsigned char>(bytes[16]) == 2);  // K
  CHECK(static_cast<unsigned char>(bytes[20]) == 2);  // d'
}

TEST_CASE("input hash is sensitive to every input") {
  std::vector<Edge> e{{0, 1}};
  const CsrMatrix a = build_csr(e, 3);
  const Tensor2 x(3, 2, 1.0);
  const Sha256 base = input_hash(a, x, 2, 0);
  CHECK(input_hash(a, x, 2, 0) == base);
  CHECK(input_hash(a, x, 3, 0) != base);
  CHECK(input_hash(a, x, 2, 1) != base);
  std::vector<Edge> e2{{0, 2}};
  CHECK(input_hash(build_csr(e2, 3), x, 2, 0) != base);
  CHECK(to_hex(base).size() == 64);
}

TEST_CASE("batch_view gathers in order") {
  const TokenTensor t = two_node_k2();
  std::vector<std::uint32_t> ids{1, 0};
  const TokenBatch b = batch_view(t, ids);
  CHECK(b.batch() == 2);
  CHECK(span_vec(b.sequence(0)) == span_vec(t.sequence(1)));
  CHECK(span_vec(b.sequence(1)) == span_vec(t.sequence(0)));

  const TokenBatch empty = batch_view(t, {});
  CHECK(empty.batch() == 0);
  CHECK(empty.data().empty());

  std::vector<std::uint32_t> dup{0, 0};
  const TokenBatch d = batch_view(t, dup);
  CHECK(span_vec(d.sequence(0)) == span_vec(d.sequence(1)));

  std::vector<std::uint32_t> bad{2};
  CHECK_THROWS_AS(batch_view(t, bad), InternalError);
}

TEST_CASE("batch_view instrumentation counts gathered bytes") {
  const TokenTensor t = two_node_k2();
  reset_batch_view_stats();
  std::vector<std::uint32_t> ids{1};
  batch_view(t, ids);
  std::vector<std::uint32_t> two{0, 1};
  batch_view(t, two);
  const auto s = batch_view_stats();
  CHECK(s.calls == 2);
  CHECK(s.peak_bytes == 2 * 3 * 2 * sizeof(double));
  CHECK(s.total_bytes == 3 * 3 * 2 * sizeof(double));
}

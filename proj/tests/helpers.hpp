#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nag/graph.hpp"
#include "nag/tensor.hpp"
#include "oracles.hpp"

namespace testutil {

inline std::vector<nag::Edge> to_edges(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& pairs) {
  std::vector<nag::Edge> out;
  for (auto [u, v] : pairs) out.emplace_back(u, v);
  return out;
}

inline nag::Tensor2 to_tensor(const oracle::Dense& d) { return nag::Tensor2(d.rows, d.cols, d.v); }

inline oracle::Dense to_dense(const nag::Tensor2& t) {
  oracle::Dense d(t.rows(), t.cols());
  d.v.assign(t.flat().begin(), t.flat().end());
  return d;
}

inline oracle::Dense csr_to_dense(const nag::CsrMatrix& m) {
  oracle::Dense d(m.n_rows, m.n_cols);
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    auto cols = m.row_cols(r);
    auto vals = m.row_values(r);
    for (std::size_t j = 0; j < cols.size(); ++j) d(r, cols[j]) = vals[j];
  }
  return d;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

void write_text(const std::string& path, const std::string& content);
std::string read_bytes(const std::string& path);

}  // namespace testutil

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nag/tensor.hpp"

namespace nag {

using node_t = std::uint32_t;

struct Edge {
  node_t u;
  node_t v;
  std::size_t line = 0;  // 1-based source line, 0 when not from a file

  Edge(node_t a, node_t b, std::size_t src_line = 0) : u(a), v(b), line(src_line) {}
};

// Canonical CSR: columns strictly increasing within each row.
struct CsrMatrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<std::uint64_t> row_offsets{0};
  std::vector<node_t> col_indices;
  std::vector<double> values;

  std::size_t nnz() const noexcept { return col_indices.size(); }
  std::span<const node_t> row_cols(std::size_t r) const {
    return {col_indices.data() + row_offsets[r], row_offsets[r + 1] - row_offsets[r]};
  }
  std::span<const double> row_values(std::size_t r) const {
    return {values.data() + row_offsets[r], row_offsets[r + 1] - row_offsets[r]};
  }

  // Throws InternalError naming the first violated invariant.
  void validate() const;

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

struct BuildSummary {
  std::size_t input_pairs = 0;
  std::size_t self_loops_dropped = 0;
  std::size_t undirected_edges = 0;
};

// Symmetric 0/1 adjacency from an undirected edge list. Self-loops are dropped,
// duplicates and reversed pairs merged. Out-of-range endpoints raise DataError.
CsrMatrix build_csr(std::span<const Edge> edges, std::size_t n, BuildSummary* summary = nullptr);

// Sorted (u < v) pairs, one per undirected edge.
std::vector<std::pair<node_t, node_t>> to_edge_list(const CsrMatrix& adj);

std::vector<double> degrees(const CsrMatrix& adj);

// D^-1/2 A D^-1/2 with 1/sqrt(0) taken as 0.
CsrMatrix normalize_sym(const CsrMatrix& adj);

// out = M * x, x and out of length n_cols / n_rows.
void spmv(const CsrMatrix& m, std::span<const double> x, std::span<double> out);

// out = M * X for dense X (n_cols x width); row-parallel safe, fixed order.
Tensor2 spmm(const CsrMatrix& m, const Tensor2& x);

// Component id per node (0-based, in order of lowest member) and component count.
std::vector<std::uint32_t> connected_components(const CsrMatrix& adj, std::size_t* count = nullptr);

}  // namespace nag

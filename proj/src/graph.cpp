#include "nag/graph.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nag/errors.hpp"
#include "nag/simd/kernels.hpp"

namespace nag {

void CsrMatrix::validate() const {
  if (row_offsets.size() != n_rows + 1) throw InternalError("csr: row_offsets length != n_rows+1");
  if (row_offsets.front() != 0) throw InternalError("csr: row_offsets[0] != 0");
  if (row_offsets.back() != col_indices.size()) throw InternalError("csr: row_offsets[n] != nnz");
  if (values.size() != col_indices.size()) throw InternalError("csr: values length != nnz");
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (row_offsets[r + 1] < row_offsets[r]) throw InternalError("csr: row_offsets decreasing");
    auto cols = row_cols(r);
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (cols[i] >= n_cols) throw InternalError("csr: column index out of range");
      if (i > 0 && cols[i] <= cols[i - 1]) throw InternalError("csr: columns not strictly increasing");
    }
  }
}

CsrMatrix build_csr(std::span<const Edge> edges, std::size_t n, BuildSummary* summary) {
  std::vector<std::pair<node_t, node_t>> directed;
  directed.reserve(edges.size() * 2);
  std::size_t loops = 0;
  for (const Edge& e : edges) {
    for (node_t id : {e.u, e.v}) {
      if (id >= n) {
        std::ostringstream os;
        os << "node id " << id << " out of range";
        if (e.line != 0) os << " (line " << e.line << ")";
        throw DataError(os.str());
      }
    }
    if (e.u == e.v) {
      ++loops;
      continue;
    }
    directed.emplace_back(e.u, e.v);
    directed.emplace_back(e.v, e.u);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  CsrMatrix m;
  m.n_rows = n;
  m.n_cols = n;
  m.row_offsets.assign(n + 1, 0);
  m.col_indices.reserve(directed.size());
  for (const auto& [u, v] : directed) {
    ++m.row_offsets[u + 1];
    m.col_indices.push_back(v);
  }
  for (std::size_t r = 0; r < n; ++r) m.row_offsets[r + 1] += m.row_offsets[r];
  m.values.assign(m.col_indices.size(), 1.0);

  if (summary != nullptr) {
    summary->input_pairs = edges.size();
    summary->self_loops_dropped = loops;
    summary->undirected_edges = directed.size() / 2;
  }
  return m;
}

std::vector<std::pair<node_t, node_t>> to_edge_list(const CsrMatrix& adj) {
  std::vector<std::pair<node_t, node_t>> out;
  out.reserve(adj.nnz() / 2);
  for (std::size_t r = 0; r < adj.n_rows; ++r)
    for (node_t c : adj.row_cols(r))
      if (r < c) out.emplace_back(static_cast<node_t>(r), c);
  return out;
}

std::vector<double> degrees(const CsrMatrix& adj) {
  std::vector<double> deg(adj.n_rows, 0.0);
  for (std::size_t r = 0; r < adj.n_rows; ++r)
    for (double v : adj.row_values(r)) deg[r] += v;
  return deg;
}

CsrMatrix normalize_sym(const CsrMatrix& adj) {
  const std::vector<double> deg = degrees(adj);
  std::vector<double> inv_sqrt(deg.size(), 0.0);
  for (std::size_t i = 0; i < deg.size(); ++i)
    if (deg[i] > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);

  CsrMatrix out = adj;
  // Value for (i, j) is computed once with i < j and mirrored, so the result
  // is exactly symmetric.
  for (std::size_t r = 0; r < adj.n_rows; ++r) {
    for (std::uint64_t e = adj.row_offsets[r]; e < adj.row_offsets[r + 1]; ++e) {
      const std::size_t c = adj.col_indices[e];
      const std::size_t lo = std::min(r, c);
      const std::size_t hi = std::max(r, c);
      out.values[e] = adj.values[e] * inv_sqrt[lo] * inv_sqrt[hi];
    }
  }
  return out;
}

void spmv(const CsrMatrix& m, std::span<const double> x, std::span<double> out) {
  if (x.size() != m.n_cols || out.size() != m.n_rows) throw InternalError("spmv: length mismatch");
  for (std::size_t r = 0; r < m.n_rows; ++r) {
    double acc = 0.0;
    for (std::uint64_t e = m.row_offsets[r]; e < m.row_offsets[r + 1]; ++e)
      acc += m.values[e] * x[m.col_indices[e]];
    out[r] = acc;
  }
}

Tensor2 spmm(const CsrMatrix& m, const Tensor2& x) {
  if (x.rows() != m.n_cols) throw InternalError("spmm: dense operand row count != n_cols");
  Tensor2 out(m.n_rows, x.cols());
  if (m.n_rows == 0 || x.cols() == 0) return out;
  simd::active().spmm_rows(m.row_offsets.data(), m.col_indices.data(), m.values.data(), 0,
                           m.n_rows, x.data(), x.cols(), out.data());
  return out;
}

std::vector<std::uint32_t> connected_components(const CsrMatrix& adj, std::size_t* count) {
  constexpr std::uint32_t unset = UINT32_MAX;
  std::vector<std::uint32_t> comp(adj.n_rows, unset);
  std::vector<node_t> stack;
  std::uint32_t next = 0;
  for (std::size_t s = 0; s < adj.n_rows; ++s) {
    if (comp[s] != unset) continue;
    comp[s] = next;
    stack.push_back(static_cast<node_t>(s));
    while (!stack.empty()) {
      node_t u = stack.back();
      stack.pop_back();
      for (node_t v : adj.row_cols(u)) {
        if (comp[v] == unset) {
          comp[v] = next;
          stack.push_back(v);
        }
      }
    }
    ++next;
  }
  if (count != nullptr) *count = next;
  return comp;
}

}  // namespace nag

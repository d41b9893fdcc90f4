#include "nag/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string_view>

#include "nag/errors.hpp"
#include "nag/rng.hpp"

namespace nag {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void parse_fail(const std::string& path, std::size_t line, const std::string& what) {
  std::ostringstream os;
  os << path << ":" << line << ": " << what;
  throw DataError(os.str());
}

template <typename T>
bool parse_number(std::string_view field, T& out) {
  field = trim(field);
  if (field.empty()) return false;
  const char* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, out);
  if (ec != std::errc() || ptr != end) return false;
  if constexpr (std::is_floating_point_v<T>) return std::isfinite(out);
  return true;
}

std::ifstream open_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return in;
}

std::ofstream create_text(const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot open for writing: " + path);
  return out;
}

bool is_skippable(std::string_view line) {
  line = trim(line);
  return line.empty() || line.front() == '#';
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

SplitSpec make_splits(std::size_t n, const SplitFractions& f, std::uint64_t seed) {
  if (f.train < 0 || f.val < 0 || f.test < 0 || f.train + f.val + f.test > 1.0 + 1e-12)
    throw ConfigError("split fractions must be non-negative and sum to at most 1");
  std::vector<node_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<node_t>(i);
  auto gen = make_stream(seed, "splits");
  shuffle_in_place(order.data(), order.size(), gen);
  const auto n_train = static_cast<std::size_t>(std::floor(f.train * static_cast<double>(n)));
  const auto n_val = std::min(n - n_train, static_cast<std::size_t>(std::floor(f.val * static_cast<double>(n))));
  SplitSpec s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
               order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), order.end());
  return s;
}

void validate_splits(const SplitSpec& splits, const std::vector<std::int32_t>& labels) {
  std::vector<std::uint8_t> seen(labels.size(), 0);
  const std::pair<const char*, const std::vector<node_t>*> parts[] = {
      {"train", &splits.train}, {"val", &splits.val}, {"test", &splits.test}};
  for (const auto& [name, ids] : parts) {
    for (node_t id : *ids) {
      std::ostringstream os;
      if (id >= labels.size()) {
        os << "unknown node id " << id << " in " << name << " split (n=" << labels.size() << ")";
        throw DataError(os.str());
      }
      if (seen[id]) {
        os << "node id " << id << " appears in more than one split position (" << name << ")";
        throw DataError(os.str());
      }
      if (labels[id] == unlabeled) {
        os << "node id " << id << " in " << name << " split has no label";
        throw DataError(os.str());
      }
      seen[id] = 1;
    }
  }
}

std::vector<Edge> read_edge_list(const std::string& path) {
  auto in = open_text(path);
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_skippable(line)) continue;
    std::istringstream fields(line);
    std::string a, b, extra;
    fields >> a >> b;
    node_t u = 0, v = 0;
    if (!parse_number(a, u) || !parse_number(b, v)) parse_fail(path, lineno, "expected two node ids \"u v\"");
    if (fields >> extra) parse_fail(path, lineno, "unexpected trailing content '" + extra + "'");
    edges.emplace_back(u, v, lineno);
  }
  return edges;
}

Tensor2 read_features(const std::string& path) {
  auto in = open_text(path);
  std::string line;
  std::size_t lineno = 0;
  std::size_t d = 0;
  bool have_header = false;
  std::vector<double> values;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (!have_header) {
      if (text.substr(0, 2) != "d=" || !parse_number(text.substr(2), d) || d == 0)
        parse_fail(path, lineno, "expected header \"d=<int>\"");
      have_header = true;
      continue;
    }
    std::size_t count = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = text.find(',', start);
      const auto cell = text.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
      double v = 0.0;
      if (!parse_number(cell, v)) {
        std::ostringstream os;
        os << "non-numeric feature cell " << (count + 1) << " '" << trim(cell) << "'";
        parse_fail(path, lineno, os.str());
      }
      values.push_back(v);
      ++count;
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (count != d) {
      std::ostringstream os;
      os << "row has " << count << " values, header declares d=" << d;
      parse_fail(path, lineno, os.str());
    }
    ++rows;
  }
  if (!have_header) parse_fail(path, lineno, "missing \"d=<int>\" header");
  return Tensor2(rows, d, std::move(values));
}

std::vector<LabelEntry> read_labels(const std::string& path) {
  auto in = open_text(path);
  std::vector<LabelEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_skippable(line)) continue;
    const auto text = trim(line);
    const auto comma = text.find(',');
    if (comma == std::string_view::npos) parse_fail(path, lineno, "expected \"node_id,label\"");
    node_t node = 0;
    std::int32_t label = 0;
    if (!parse_number(text.substr(0, comma), node)) parse_fail(path, lineno, "invalid node id");
    if (!parse_number(text.substr(comma + 1), label)) parse_fail(path, lineno, "invalid label");
    if (label < 0) parse_fail(path, lineno, "label out of range (must be >= 0)");
    out.push_back({node, label, lineno});
  }
  return out;
}

SplitSpec read_splits(const std::string& path) {
  auto in = open_text(path);
  SplitSpec s;
  std::vector<node_t>* section = nullptr;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (is_skippable(line)) continue;
    const auto text = trim(line);
    if (text == "[train]") { section = &s.train; continue; }
    if (text == "[val]") { section = &s.val; continue; }
    if (text == "[test]") { section = &s.test; continue; }
    if (section == nullptr) parse_fail(path, lineno, "node id before any [train]/[val]/[test] section");
    node_t id = 0;
    if (!parse_number(text, id)) parse_fail(path, lineno, "invalid node id '" + std::string(text) + "'");
    section->push_back(id);
  }
  return s;
}

void write_edge_list(const CsrMatrix& adj, const std::string& path) {
  auto out = create_text(path);
  for (const auto& [u, v] : to_edge_list(adj)) out << u << ' ' << v << '\n';
  if (!out) throw DataError("failed writing " + path);
}

void write_features(const Tensor2& x, const std::string& path) {
  auto out = create_text(path);
  out << "d=" << x.cols() << '\n';
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) {
      if (c) out << ',';
      out << format_double(x(r, c));
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path);
}

void write_labels(const std::vector<std::int32_t>& labels, const std::string& path) {
  auto out = create_text(path);
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] != unlabeled) out << i << ',' << labels[i] << '\n';
  if (!out) throw DataError("failed writing " + path);
}

void write_splits(const SplitSpec& splits, const std::string& path) {
  auto out = create_text(path);
  out << "[train]\n";
  for (node_t id : splits.train) out << id << '\n';
  out << "[val]\n";
  for (node_t id : splits.val) out << id << '\n';
  out << "[test]\n";
  for (node_t id : splits.test) out << id << '\n';
  if (!out) throw DataError("failed writing " + path);
}

DatasetFiles write_dataset(const GraphDataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create directory " + dir + ": " + ec.message());
  DatasetFiles files;
  const fs::path base(dir);
  files.graph = (base / files.graph).string();
  files.features = (base / files.features).string();
  files.labels = (base / files.labels).string();
  files.splits = (base / files.splits).string();
  write_edge_list(ds.adjacency, files.graph);
  write_features(ds.features, files.features);
  write_labels(ds.labels, files.labels);
  write_splits(ds.splits, files.splits);
  return files;
}

std::vector<std::int32_t> labels_for(const std::vector<LabelEntry>& entries, std::size_t n,
                                     const std::string& source) {
  std::vector<std::int32_t> labels(n, unlabeled);
  for (const auto& e : entries) {
    if (e.node >= n) {
      std::ostringstream os;
      os << source << ":" << e.line << ": node id " << e.node << " exceeds feature rows (" << n << ")";
      throw DataError(os.str());
    }
    if (labels[e.node] != unlabeled && labels[e.node] != e.label) {
      std::ostringstream os;
      os << source << ":" << e.line << ": node id " << e.node << " has conflicting labels";
      throw DataError(os.str());
    }
    labels[e.node] = e.label;
  }
  return labels;
}

SplitSpec labeled_splits(const std::vector<std::int32_t>& labels, const SplitFractions& fractions,
                         std::uint64_t seed) {
  SplitSpec all = make_splits(labels.size(), fractions, seed);
  const auto keep = [&](std::vector<node_t>& v) {
    std::erase_if(v, [&](node_t id) { return labels[id] == unlabeled; });
  };
  keep(all.train);
  keep(all.val);
  keep(all.test);
  return all;
}

namespace {

std::size_t resolve_node_count(std::size_t inferred, std::size_t feature_rows, std::optional<std::size_t> explicit_n,
                               const std::string& features_path) {
  if (explicit_n && *explicit_n != feature_rows) {
    std::ostringstream os;
    os << "row-count mismatch: " << features_path << " has " << feature_rows << " rows, expected n=" << *explicit_n;
    throw DataError(os.str());
  }
  if (inferred > feature_rows) {
    std::ostringstream os;
    os << "node id " << inferred - 1 << " exceeds feature rows (" << feature_rows << " in " << features_path << ")";
    throw DataError(os.str());
  }
  return feature_rows;
}

}  // namespace

GraphInputs load_graph_inputs(const std::string& graph_path, const std::string& features_path,
                              std::optional<std::size_t> n) {
  GraphInputs g;
  const auto edges = read_edge_list(graph_path);
  g.features = read_features(features_path);
  std::size_t inferred = 0;
  for (const auto& e : edges) inferred = std::max<std::size_t>(inferred, std::max(e.u, e.v) + std::size_t{1});
  const std::size_t count = resolve_node_count(inferred, g.features.rows(), n, features_path);
  g.adjacency = build_csr(edges, count, &g.build);
  return g;
}

GraphDataset load_dataset(const std::string& graph_path, const std::string& features_path,
                          const std::string& labels_path, const std::optional<std::string>& splits_path,
                          const LoadOptions& options) {
  const auto edges = read_edge_list(graph_path);
  const auto label_entries = read_labels(labels_path);
  GraphDataset ds;
  ds.features = read_features(features_path);

  std::size_t inferred = 0;
  for (const auto& e : edges) inferred = std::max<std::size_t>(inferred, std::max(e.u, e.v) + std::size_t{1});
  for (const auto& l : label_entries) {
    if (l.node >= ds.features.rows()) {
      std::ostringstream os;
      os << labels_path << ":" << l.line << ": node id " << l.node << " exceeds feature rows (" << ds.features.rows() << ")";
      throw DataError(os.str());
    }
    inferred = std::max<std::size_t>(inferred, l.node + std::size_t{1});
  }
  ds.n = resolve_node_count(inferred, ds.features.rows(), options.n, features_path);
  ds.adjacency = build_csr(edges, ds.n, &ds.build);
  ds.labels = labels_for(label_entries, ds.n, labels_path);
  std::int32_t max_label = -1;
  for (auto l : ds.labels) max_label = std::max(max_label, l);
  ds.classes = static_cast<std::uint32_t>(max_label + 1);

  if (splits_path) {
    ds.splits = read_splits(*splits_path);
  } else if (options.fractions) {
    ds.splits = labeled_splits(ds.labels, *options.fractions, options.split_seed);
  }
  validate_splits(ds.splits, ds.labels);
  return ds;
}

void SbmSpec::validate() const {
  std::ostringstream os;
  if (blocks < 2) os << "blocks must be >= 2; ";
  if (!(0.0 <= p_out && p_out <= p_in && p_in <= 1.0)) os << "require 0 <= p_out <= p_in <= 1; ";
  if (feature_dim < 1) os << "feature_dim must be >= 1; ";
  if (n < blocks) os << "n must be >= blocks; ";
  const std::string msg = os.str();
  if (!msg.empty()) throw ConfigError("invalid SBM spec: " + msg.substr(0, msg.size() - 2));
}

namespace {

// Visits Bernoulli(p) successes over [0, total) by geometric skipping, which
// is distributionally identical to testing each index independently.
template <typename Visit>
void bernoulli_indices(std::uint64_t total, double p, std::mt19937_64& gen, Visit&& visit) {
  if (total == 0 || p <= 0.0) return;
  if (p >= 1.0) {
    for (std::uint64_t i = 0; i < total; ++i) visit(i);
    return;
  }
  const double log_q = std::log1p(-p);
  std::uint64_t i = 0;
  for (;;) {
    const double u = 1.0 - uniform01(gen);  // (0, 1]
    const double skip = std::floor(std::log(u) / log_q);
    if (skip >= static_cast<double>(total - i)) return;
    i += static_cast<std::uint64_t>(skip);
    visit(i);
    if (++i >= total) return;
  }
}

}  // namespace

GraphDataset generate_sbm(const SbmSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n;
  std::vector<std::vector<node_t>> members(spec.blocks);
  for (std::size_t i = 0; i < n; ++i) members[i % spec.blocks].push_back(static_cast<node_t>(i));

  auto edge_gen = make_stream(spec.seed, "sbm.edges");
  std::vector<Edge> edges;
  for (std::uint32_t a = 0; a < spec.blocks; ++a) {
    const auto& ma = members[a];
    // Within block: pair index r maps to (i, j), i > j, in row-major lower-triangle order.
    const std::uint64_t na = ma.size();
    std::uint64_t row = 1, row_start = 0;
    bernoulli_indices(na * (na - 1) / 2, spec.p_in, edge_gen, [&](std::uint64_t r) {
      while (r >= row_start + row) {
        row_start += row;
        ++row;
      }
      edges.emplace_back(ma[row], ma[r - row_start]);
    });
    for (std::uint32_t b = a + 1; b < spec.blocks; ++b) {
      const auto& mb = members[b];
      const std::uint64_t nb = mb.size();
      bernoulli_indices(na * nb, spec.p_out, edge_gen,
                        [&](std::uint64_t r) { edges.emplace_back(ma[r / nb], mb[r % nb]); });
    }
  }

  GraphDataset ds;
  ds.n = n;
  ds.adjacency = build_csr(edges, n, &ds.build);
  ds.classes = spec.blocks;
  ds.labels.resize(n);
  ds.features = Tensor2(n, spec.feature_dim);
  auto feat_gen = make_stream(spec.seed, "sbm.features");
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto block = static_cast<std::uint32_t>(i % spec.blocks);
    ds.labels[i] = static_cast<std::int32_t>(block);
    for (std::size_t c = 0; c < spec.feature_dim; ++c) ds.features(i, c) = normal(feat_gen);
    ds.features(i, block % spec.feature_dim) += spec.feature_signal;
  }
  ds.splits = make_splits(n, SplitFractions{}, spec.seed);
  return ds;
}

}  // namespace nag

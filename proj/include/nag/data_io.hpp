#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nag/graph.hpp"
#include "nag/tensor.hpp"

namespace nag {

struct SplitSpec {
  std::vector<node_t> train;
  std::vector<node_t> val;
  std::vector<node_t> test;

  friend bool operator==(const SplitSpec&, const SplitSpec&) = default;
};

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

inline constexpr std::int32_t unlabeled = -1;

struct GraphDataset {
  std::size_t n = 0;
  CsrMatrix adjacency;
  Tensor2 features;                  // n x d
  std::vector<std::int32_t> labels;  // length n, `unlabeled` where absent
  SplitSpec splits;
  std::uint32_t classes = 0;
  BuildSummary build;

  std::size_t d() const { return features.cols(); }
};

// Seeded shuffle of [0, n) cut into consecutive slices; floor for train and
// val, the remainder goes to test.
SplitSpec make_splits(std::size_t n, const SplitFractions& fractions, std::uint64_t seed);

// make_splits over every node, then unlabeled nodes are dropped from each slice.
SplitSpec labeled_splits(const std::vector<std::int32_t>& labels, const SplitFractions& fractions,
                         std::uint64_t seed);

// Throws DataError naming the problem if splits overlap, reference ids >= n,
// or reference unlabeled nodes.
void validate_splits(const SplitSpec& splits, const std::vector<std::int32_t>& labels);

// ---- file formats -----------------------------------------------------------
// Edge list: "u v" per line, '#' comments. Features: "d=<int>" then one row of
// d comma-separated decimals per node. Labels: "node_id,label" rows. Splits:
// sections "[train]", "[val]", "[test]" with one node id per line.

std::vector<Edge> read_edge_list(const std::string& path);
Tensor2 read_features(const std::string& path);

struct LabelEntry {
  node_t node;
  std::int32_t label;
  std::size_t line;
};
std::vector<LabelEntry> read_labels(const std::string& path);
SplitSpec read_splits(const std::string& path);

void write_edge_list(const CsrMatrix& adj, const std::string& path);
void write_features(const Tensor2& x, const std::string& path);
void write_labels(const std::vector<std::int32_t>& labels, const std::string& path);
void write_splits(const SplitSpec& splits, const std::string& path);

struct DatasetFiles {
  std::string graph = "graph.txt";
  std::string features = "features.csv";
  std::string labels = "labels.csv";
  std::string splits = "splits.txt";
};
// Writes the four files into dir (created if missing).
DatasetFiles write_dataset(const GraphDataset& ds, const std::string& dir);

// Labels indexed by node; entries beyond the file stay `unlabeled`.
std::vector<std::int32_t> labels_for(const std::vector<LabelEntry>& entries, std::size_t n,
                                     const std::string& source);

struct LoadOptions {
  std::optional<std::size_t> n;               // overrides inference; must equal feature rows
  std::optional<SplitFractions> fractions;    // used when no splits file is given
  std::uint64_t split_seed = 0;
};

// The node count is 1 + the largest id in the edge and label files; it must
// not exceed the feature row count, and nodes past it (up to the row count)
// are isolated and unlabeled.
GraphDataset load_dataset(const std::string& graph_path, const std::string& features_path,
                          const std::string& labels_path, const std::optional<std::string>& splits_path,
                          const LoadOptions& options = {});

// Graph + features only (no labels), for preprocessing.
struct GraphInputs {
  CsrMatrix adjacency;
  Tensor2 features;
  BuildSummary build;
};
GraphInputs load_graph_inputs(const std::string& graph_path, const std::string& features_path,
                              std::optional<std::size_t> n = std::nullopt);

// ---- synthetic data -----------------------------------------------------------

struct SbmSpec {
  std::size_t n = 400;
  std::uint32_t blocks = 2;
  double p_in = 0.1;
  double p_out = 0.01;
  std::size_t feature_dim = 16;
  double feature_signal = 0.5;
  std::uint64_t seed = 0;

  void validate() const;  // ConfigError
};

// Node i is in block i % blocks. Each unordered pair is an edge with
// probability p_in (same block) or p_out. Features are N(signal * e_b, I) with
// e_b the unit vector of dimension (b mod d). Labels are block ids; splits are
// make_splits(n, 60/20/20, seed).
GraphDataset generate_sbm(const SbmSpec& spec);

}  // namespace nag

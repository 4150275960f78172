#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hypersage/hypergraph.hpp"
#include "hypersage/tensor.hpp"

namespace hypersage {

struct DatasetBundle {
  std::string name;
  Hypergraph hypergraph;
  Matrix features;  // N x d, non-negative
  std::vector<int> labels;
  std::size_t num_classes = 0;

  std::size_t num_nodes() const noexcept { return hypergraph.num_nodes(); }
  /// Throws DatasetError if shapes or label ranges are inconsistent.
  void validate() const;

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

enum class SplitKind { kTransductive, kInductive };

struct SplitSpec {
  SplitKind kind = SplitKind::kTransductive;
  std::vector<NodeId> train_ids;
  std::vector<NodeId> test_ids;
  // Inductive only: a partition of test_ids.
  std::vector<NodeId> seen_test_ids;
  std::vector<NodeId> unseen_test_ids;
  std::uint64_t seed = 0;
};

struct DatasetStats {
  std::size_t num_nodes = 0;
  std::size_t num_edges = 0;
  double mean_cardinality = 0.0;
  /// Population standard deviation of hyperedge cardinality.
  double std_cardinality = 0.0;
  std::size_t num_features = 0;
  std::size_t num_classes = 0;
};

/// Reads hyperedges.txt, features.tsv, labels.tsv and the optional meta.json.
DatasetBundle load_dataset(const std::filesystem::path& dir);

/// Writes the canonical directory (creates it if needed). Reals are written
/// with round-trip precision, so load_dataset(write_dataset(b)) == b.
void write_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);

DatasetStats dataset_stats(const DatasetBundle& bundle);

/// Label-stratified split. round(fraction * N) training nodes in total,
/// allocated to classes by largest remainder of fraction * class size.
SplitSpec make_transductive_split(const DatasetBundle& bundle, double train_fraction, std::uint64_t seed);

struct InductiveSplit {
  SplitSpec split;
  /// Sub-hypergraph on train ∪ seen nodes over the same node-id space:
  /// unseen nodes are removed from every edge, emptied edges are dropped.
  Hypergraph train_hypergraph;
};

/// 1:4 train/test, then test halved into seen and unseen.
InductiveSplit make_inductive_split(const DatasetBundle& bundle, std::uint64_t seed);

/// Drops the listed nodes from every hyperedge; edges left empty are dropped,
/// singletons kept. Node ids are preserved.
Hypergraph remove_nodes(const Hypergraph& h, const std::vector<NodeId>& removed);

struct RawFormat {
  enum class Features { kDense, kSparseTriples };
  Features features = Features::kDense;
  /// Required for kSparseTriples.
  std::optional<std::size_t> num_features;
  bool one_indexed = false;
  std::string name = "dataset";
};

struct ConvertReport {
  DatasetBundle bundle;
  std::vector<std::string> warnings;
};

/// Converts raw files to the canonical layout and writes it to `out_dir`.
///  edges:    one hyperedge per line, node ids separated by whitespace or commas.
///  features: dense rows (whitespace/comma separated), or "node col value"
///            triples with ids following `one_indexed`.
///  labels:   one class id per line, or "node label" pairs.
/// Duplicate nodes within an edge line are dropped with a warning.
ConvertReport convert_external(const std::filesystem::path& edges, const std::filesystem::path& features,
                               const std::filesystem::path& labels, const RawFormat& format,
                               const std::filesystem::path& out_dir);

}  // namespace hypersage

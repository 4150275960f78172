#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace hypersage {

using NodeId = std::uint32_t;
using EdgeId = std::uint32_t;

/// Immutable hypergraph: N nodes and an ordered list of K hyperedges, each a
/// non-empty node set. Edges are stored sorted and deduplicated; the same node
/// set may appear under several edge ids. An incidence index (node -> edges)
/// is built at construction.
class Hypergraph {
 public:
  Hypergraph() = default;

  /// Throws InvalidArgument on an empty edge or a node id >= num_nodes.
  Hypergraph(std::size_t num_nodes, std::vector<std::vector<NodeId>> edges);

  std::size_t num_nodes() const noexcept { return num_nodes_; }
  std::size_t num_edges() const noexcept { return edges_.size(); }

  /// Sorted node ids of edge e.
  std::span<const NodeId> edge(EdgeId e) const;
  const std::vector<std::vector<NodeId>>& edges() const noexcept { return edges_; }

  /// E(v): ids of the edges containing v, ascending.
  std::span<const EdgeId> incident_edges(NodeId v) const;

  bool contains(EdgeId e, NodeId v) const;

  /// Largest edge cardinality M (0 for an edgeless hypergraph).
  std::size_t max_cardinality() const noexcept { return max_cardinality_; }
  bool is_graph() const noexcept { return max_cardinality_ == 2; }

  friend bool operator==(const Hypergraph& a, const Hypergraph& b) {
    return a.num_nodes_ == b.num_nodes_ && a.edges_ == b.edges_;
  }

 private:
  void check_node(NodeId v) const;

  std::size_t num_nodes_ = 0;
  std::vector<std::vector<NodeId>> edges_;
  std::vector<std::vector<EdgeId>> incidence_;
  std::size_t max_cardinality_ = 0;
};

struct NeighborhoodQuery {
  NodeId node = 0;
  std::optional<EdgeId> edge;
  std::optional<std::size_t> alpha;
  std::uint64_t seed = 0;
};

/// Replace `edge` by r >= 2 edges {anchor} ∪ parts[i]. Parts must partition
/// edge \ {anchor}.
struct SplitPlan {
  EdgeId edge = 0;
  NodeId anchor = 0;
  std::vector<std::vector<NodeId>> parts;
};

/// Weight per edge id of the split hypergraph. Only the edges created by a
/// split carry an entry; absent ids have weight 1.
using EdgeWeightMap = std::map<EdgeId, double>;

Hypergraph build_hypergraph(std::size_t num_nodes, std::vector<std::vector<NodeId>> edges);

/// N(v, e) = e \ {v}. Throws if v is not in e.
std::vector<NodeId> intra_edge_neighborhood(const Hypergraph& h, NodeId v, EdgeId e);

std::vector<EdgeId> incident_edges(const Hypergraph& h, NodeId v);

/// N(v): union of the intra-edge neighborhoods over E(v), sorted.
std::vector<NodeId> global_neighborhood(const Hypergraph& h, NodeId v);

/// Condensed neighborhood N(v, e; alpha): a uniform sample without
/// replacement of min(alpha, |N(v, e)|) nodes, a pure function of
/// (h, node, edge, alpha, seed). Returned sorted.
std::vector<NodeId> sample_condensed(const Hypergraph& h, const NeighborhoodQuery& q);

/// Relabels nodes and edges: edge edge_perm[e] of the result is
/// {node_perm[v] : v in edge(e)}. Both maps must be bijections.
Hypergraph permute(const Hypergraph& h, std::span<const NodeId> node_perm,
                   std::span<const EdgeId> edge_perm);

/// Inverse of a bijection on [0, n).
std::vector<std::uint32_t> invert_permutation(std::span<const std::uint32_t> perm);

struct SplitResult {
  Hypergraph hypergraph;
  /// New edge id -> |N(anchor, e')| / |N(anchor, e)|.
  EdgeWeightMap weights;
  /// Ids of the edges created by the split, in part order.
  std::vector<EdgeId> new_edges;
};

/// The r new edges take ids plan.edge .. plan.edge + r - 1; later edges shift
/// up by r - 1.
SplitResult split_hyperedge(const Hypergraph& h, const SplitPlan& plan);

}  // namespace hypersage

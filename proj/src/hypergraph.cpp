#include "hypersage/hypergraph.hpp"

#include <algorithm>
#include <string>

#include "hypersage/error.hpp"
#include "hypersage/random.hpp"

namespace hypersage {

Hypergraph::Hypergraph(std::size_t num_nodes, std::vector<std::vector<NodeId>> edges)
    : num_nodes_(num_nodes), edges_(std::move(edges)), incidence_(num_nodes) {
  for (std::size_t e = 0; e < edges_.size(); ++e) {
    auto& members = edges_[e];
    if (members.empty()) throw InvalidArgument("hyperedge " + std::to_string(e) + " is empty");
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    if (members.back() >= num_nodes_) {
      throw InvalidArgument("hyperedge " + std::to_string(e) + " references node " +
                            std::to_string(members.back()) + " but the hypergraph has " +
                            std::to_string(num_nodes_) + " nodes");
    }
    for (NodeId v : members) incidence_[v].push_back(static_cast<EdgeId>(e));
    max_cardinality_ = std::max(max_cardinality_, members.size());
  }
}

void Hypergraph::check_node(NodeId v) const {
  if (v >= num_nodes_) {
    throw InvalidArgument("node " + std::to_string(v) + " out of range (N=" + std::to_string(num_nodes_) + ")");
  }
}

std::span<const NodeId> Hypergraph::edge(EdgeId e) const {
  if (e >= edges_.size()) {
    throw InvalidArgument("edge " + std::to_string(e) + " out of range (K=" + std::to_string(edges_.size()) + ")");
  }
  return edges_[e];
}

std::span<const EdgeId> Hypergraph::incident_edges(NodeId v) const {
  check_node(v);
  return incidence_[v];
}

bool Hypergraph::contains(EdgeId e, NodeId v) const {
  const auto members = edge(e);
  return std::binary_search(members.begin(), members.end(), v);
}

Hypergraph build_hypergraph(std::size_t num_nodes, std::vector<std::vector<NodeId>> edges) {
  return Hypergraph(num_nodes, std::move(edges));
}

std::vector<NodeId> intra_edge_neighborhood(const Hypergraph& h, NodeId v, EdgeId e) {
  if (!h.contains(e, v)) {
    throw InvalidArgument("node " + std::to_string(v) + " is not in hyperedge " + std::to_string(e));
  }
  std::vector<NodeId> out;
  const auto members = h.edge(e);
  out.reserve(members.size() - 1);
  for (NodeId u : members)
    if (u != v) out.push_back(u);
  return out;
}

std::vector<EdgeId> incident_edges(const Hypergraph& h, NodeId v) {
  const auto es = h.incident_edges(v);
  return {es.begin(), es.end()};
}

std::vector<NodeId> global_neighborhood(const Hypergraph& h, NodeId v) {
  std::vector<NodeId> out;
  for (EdgeId e : h.incident_edges(v)) {
    for (NodeId u : h.edge(e))
      if (u != v) out.push_back(u);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<NodeId> sample_condensed(const Hypergraph& h, const NeighborhoodQuery& q) {
  if (!q.edge) throw InvalidArgument("sample_condensed requires an edge");
  if (!q.alpha) throw InvalidArgument("sample_condensed requires a sample budget alpha");
  if (*q.alpha == 0) throw InvalidArgument("sample budget alpha must be >= 1");

  auto neighbors = intra_edge_neighborhood(h, q.node, *q.edge);
  if (*q.alpha >= neighbors.size()) return neighbors;

  // Partial Fisher-Yates: the first alpha slots are a uniform subset.
  Rng rng(derive_seed(q.seed, {q.node, *q.edge}));
  const std::size_t k = *q.alpha;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(neighbors.size() - i);
    std::swap(neighbors[i], neighbors[j]);
  }
  neighbors.resize(k);
  std::sort(neighbors.begin(), neighbors.end());
  return neighbors;
}

namespace {

void check_bijection(std::span<const std::uint32_t> perm, std::size_t n, const char* what) {
  if (perm.size() != n) {
    throw InvalidArgument(std::string(what) + " permutation has size " + std::to_string(perm.size()) +
                          ", expected " + std::to_string(n));
  }
  std::vector<bool> seen(n, false);
  for (auto x : perm) {
    if (x >= n || seen[x]) throw InvalidArgument(std::string(what) + " map is not a bijection");
    seen[x] = true;
  }
}

}  // namespace

std::vector<std::uint32_t> invert_permutation(std::span<const std::uint32_t> perm) {
  check_bijection(perm, perm.size(), "input");
  std::vector<std::uint32_t> inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[perm[i]] = static_cast<std::uint32_t>(i);
  return inv;
}

Hypergraph permute(const Hypergraph& h, std::span<const NodeId> node_perm, std::span<const EdgeId> edge_perm) {
  check_bijection(node_perm, h.num_nodes(), "node");
  check_bijection(edge_perm, h.num_edges(), "edge");
  std::vector<std::vector<NodeId>> edges(h.num_edges());
  for (std::size_t e = 0; e < h.num_edges(); ++e) {
    auto& target = edges[edge_perm[e]];
    for (NodeId v : h.edge(static_cast<EdgeId>(e))) target.push_back(node_perm[v]);
  }
  return Hypergraph(h.num_nodes(), std::move(edges));
}

SplitResult split_hyperedge(const Hypergraph& h, const SplitPlan& plan) {
  const auto original = h.edge(plan.edge);
  if (!h.contains(plan.edge, plan.anchor)) {
    throw InvalidArgument("split anchor " + std::to_string(plan.anchor) + " is not in hyperedge " +
                          std::to_string(plan.edge));
  }
  if (plan.parts.size() < 2) throw InvalidArgument("a split needs at least two parts");

  std::vector<NodeId> covered;
  for (const auto& part : plan.parts) {
    if (part.empty()) throw InvalidArgument("split parts must be non-empty");
    covered.insert(covered.end(), part.begin(), part.end());
  }
  std::sort(covered.begin(), covered.end());
  if (std::adjacent_find(covered.begin(), covered.end()) != covered.end()) {
    throw InvalidArgument("split parts overlap");
  }
  std::vector<NodeId> expected;
  for (NodeId v : original)
    if (v != plan.anchor) expected.push_back(v);
  if (covered != expected) {
    throw InvalidArgument("split parts do not partition the non-anchor nodes of the hyperedge");
  }

  const double original_size = static_cast<double>(expected.size());
  std::vector<std::vector<NodeId>> edges;
  edges.reserve(h.num_edges() + plan.parts.size() - 1);
  SplitResult result;
  for (std::size_t e = 0; e < h.num_edges(); ++e) {
    if (e != plan.edge) {
      const auto m = h.edge(static_cast<EdgeId>(e));
      edges.emplace_back(m.begin(), m.end());
      continue;
    }
    for (const auto& part : plan.parts) {
      const auto id = static_cast<EdgeId>(edges.size());
      auto members = part;
      members.push_back(plan.anchor);
      edges.push_back(std::move(members));
      result.new_edges.push_back(id);
      result.weights[id] = static_cast<double>(part.size()) / original_size;
    }
  }
  result.hypergraph = Hypergraph(h.num_nodes(), std::move(edges));
  return result;
}

}  // namespace hypersage

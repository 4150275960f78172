#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "hypersage/hypergraph.hpp"
#include "hypersage/tape.hpp"
#include "hypersage/tensor.hpp"

namespace hypersage {

using FeatureRow = std::vector<double>;

enum class Mode { kTrain, kTest };

/// How the per-node aggregate enters the residual update.
enum class AccumulationSemantics {
  /// x_i <- x_i + F2(F1(.)): one aggregate per node per layer.
  kNodeCentric,
  /// Loop form that adds F2(F1(.)) once for every incident hyperedge,
  /// i.e. x_i <- x_i + |E(v_i)| * F2(F1(.)).
  kPerIncidentEdge,
};

/// Generalized-mean settings shared by the intra-edge (F1) and inter-edge (F2)
/// levels. A single exponent p is used for both.
struct AggregatorConfig {
  double p = 1.0;
  /// Condensed-neighborhood budget; nullopt uses full neighborhoods.
  std::optional<std::size_t> alpha;
  double epsilon = 1e-7;
  /// Multiply the inter-edge sum by 1/|E(v)| before the root. Off by default:
  /// with the |N(v,e)|/|N(v)| weights already summing to one over disjoint
  /// edges, the extra factor breaks the reduction to mean aggregation on
  /// graphs.
  bool edge_count_prefactor = false;

  /// Throws InvalidArgument for p == 0, non-finite p, epsilon <= 0, alpha == 0.
  void validate() const;
};

/// Elementwise M_p = ((1/n) sum_i max(x_i, eps)^p)^(1/p) over the rows of
/// `rows`. Throws on empty input, non-finite entries, p == 0, and on a
/// non-finite result.
FeatureRow generalized_mean(const Matrix& rows, double p, double epsilon = 1e-7);

/// F1: M_p over the (condensed in train mode, when alpha is set) intra-edge
/// neighborhood of v in e. nullopt when N(v, e) is empty.
std::optional<FeatureRow> intra_edge_aggregate(const Hypergraph& h, const Matrix& features, NodeId v, EdgeId e,
                                               const AggregatorConfig& cfg, std::uint64_t seed,
                                               Mode mode = Mode::kTest);

/// F2 over per-edge F1 results:
///   ( c * sum_e (|N(v,e)| / |N(v)|) * F1(v,e)^p )^(1/p)
/// where c = 1/|E'(v)| with the prefactor enabled and 1 otherwise, and E'(v)
/// holds the incident edges with non-empty intra-edge neighborhoods. Edges
/// missing from `f1_results` must have empty neighborhoods. A node with no
/// such edge gets a zero row of dimension `dim`.
FeatureRow inter_edge_aggregate(const Hypergraph& h, const std::map<EdgeId, FeatureRow>& f1_results, NodeId v,
                                const AggregatorConfig& cfg, std::size_t dim);

/// F2(F1(.)) for node v, evaluated level by level.
FeatureRow nested_aggregate(const Hypergraph& h, const Matrix& features, NodeId v, const AggregatorConfig& cfg,
                            std::uint64_t seed, Mode mode);

/// The same nested aggregate for every node as one PowerMeanStencil. Because
/// F1(v,e)^p is the mean of the (clamped) neighbor powers, F2(F1(.)) equals
/// (sum_j a_vj * max(x_j, eps)^p)^(1/p) with a_vj = sum over edges e holding
/// j of w_e / |sampled N(v,e)|, which the tape differentiates directly.
PowerMeanStencil build_aggregation_stencil(const Hypergraph& h, const AggregatorConfig& cfg, Mode mode,
                                           std::uint64_t seed,
                                           AccumulationSemantics semantics = AccumulationSemantics::kNodeCentric);

struct SplitInvarianceReport {
  /// S(anchor) = sum_e (|N(v,e)|/|N(v)|) F1(v,e)^p before and after the split.
  FeatureRow ratio_sum_before;
  FeatureRow ratio_sum_after;
  /// T(anchor) = sum_e F1(v,e)^p before, and the same sum with every split
  /// edge weighted by w_q = |N(v,e')|/|N(v,e_q)| after.
  FeatureRow split_weighted_before;
  FeatureRow split_weighted_after;
  double max_abs_deviation = 0.0;
  double max_rel_deviation = 0.0;
};

/// Evaluates both weighted sums at plan.anchor before and after
/// split_hyperedge(h, plan) with full neighborhoods. `outer_p` overrides the
/// exponent applied to F1 at the inter-edge level (mismatched p1 != p2);
/// by default p1 = p2 = cfg.p.
SplitInvarianceReport check_split_invariance(const Hypergraph& h, const Matrix& features, const SplitPlan& plan,
                                             const AggregatorConfig& cfg, std::optional<double> outer_p = {});

}  // namespace hypersage

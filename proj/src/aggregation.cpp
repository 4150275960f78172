#include "hypersage/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "hypersage/error.hpp"

namespace hypersage {

void AggregatorConfig::validate() const {
  if (p == 0.0) throw InvalidArgument("aggregation exponent p = 0 is not allowed; use a small value such as 0.01");
  if (!std::isfinite(p)) throw InvalidArgument("aggregation exponent p must be finite");
  if (!(epsilon > 0.0)) throw InvalidArgument("aggregation epsilon must be positive");
  if (alpha && *alpha == 0) throw InvalidArgument("sample budget alpha must be >= 1");
}

namespace {

double power(double y, double p) { return p == 1.0 ? y : std::pow(y, p); }
double root(double s, double p) { return p == 1.0 ? s : std::pow(s, 1.0 / p); }

void require_finite(const FeatureRow& row, const char* what) {
  for (double v : row)
    if (!std::isfinite(v)) throw NumericError(std::string(what) + " produced a non-finite value");
}

// Intra-edge members used for aggregation: the condensed sample in train mode
// with a budget, the whole neighborhood otherwise.
std::vector<NodeId> members_for(const Hypergraph& h, NodeId v, EdgeId e, const AggregatorConfig& cfg,
                                std::uint64_t seed, Mode mode) {
  if (mode == Mode::kTrain && cfg.alpha) return sample_condensed(h, NeighborhoodQuery{v, e, cfg.alpha, seed});
  return intra_edge_neighborhood(h, v, e);
}

FeatureRow mean_of_powers(const Matrix& features, const std::vector<NodeId>& members, double p, double eps) {
  FeatureRow acc(features.cols(), 0.0);
  for (NodeId u : members) {
    const auto x = features.row(u);
    for (std::size_t j = 0; j < acc.size(); ++j) acc[j] += power(std::max(x[j], eps), p);
  }
  for (double& a : acc) a /= static_cast<double>(members.size());
  return acc;
}

}  // namespace

FeatureRow generalized_mean(const Matrix& rows, double p, double epsilon) {
  if (rows.rows() == 0) throw InvalidArgument("generalized mean of an empty set");
  if (p == 0.0) throw InvalidArgument("generalized mean exponent p must be non-zero");
  if (!(epsilon > 0.0)) throw InvalidArgument("generalized mean epsilon must be positive");
  if (!all_finite(rows)) throw InvalidArgument("generalized mean input contains NaN or Inf");
  FeatureRow out(rows.cols(), 0.0);
  for (std::size_t r = 0; r < rows.rows(); ++r) {
    const auto x = rows.row(r);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += power(std::max(x[j], epsilon), p);
  }
  const double n = static_cast<double>(rows.rows());
  for (double& v : out) v = root(v / n, p);
  require_finite(out, "generalized mean");
  return out;
}

std::optional<FeatureRow> intra_edge_aggregate(const Hypergraph& h, const Matrix& features, NodeId v, EdgeId e,
                                               const AggregatorConfig& cfg, std::uint64_t seed, Mode mode) {
  cfg.validate();
  if (features.rows() != h.num_nodes()) throw InvalidArgument("feature rows do not match node count");
  const auto members = members_for(h, v, e, cfg, seed, mode);
  if (members.empty()) return std::nullopt;
  FeatureRow out = mean_of_powers(features, members, cfg.p, cfg.epsilon);
  for (double& x : out) x = root(x, cfg.p);
  require_finite(out, "intra-edge aggregation");
  return out;
}

FeatureRow inter_edge_aggregate(const Hypergraph& h, const std::map<EdgeId, FeatureRow>& f1_results, NodeId v,
                                const AggregatorConfig& cfg, std::size_t dim) {
  cfg.validate();
  const double global_size = static_cast<double>(global_neighborhood(h, v).size());
  FeatureRow sum(dim, 0.0);
  std::size_t contributing = 0;
  for (EdgeId e : h.incident_edges(v)) {
    const std::size_t local = h.edge(e).size() - 1;
    auto it = f1_results.find(e);
    if (local == 0) continue;
    if (it == f1_results.end()) {
      throw InvalidArgument("missing intra-edge result for edge " + std::to_string(e) + " at node " + std::to_string(v));
    }
    if (it->second.size() != dim) throw InvalidArgument("intra-edge result has the wrong dimension");
    const double ratio = static_cast<double>(local) / global_size;
    for (std::size_t j = 0; j < dim; ++j) sum[j] += ratio * power(it->second[j], cfg.p);
    ++contributing;
  }
  if (contributing == 0) return FeatureRow(dim, 0.0);
  const double prefactor = cfg.edge_count_prefactor ? 1.0 / static_cast<double>(contributing) : 1.0;
  for (double& s : sum) s = root(prefactor * s, cfg.p);
  require_finite(sum, "inter-edge aggregation");
  return sum;
}

FeatureRow nested_aggregate(const Hypergraph& h, const Matrix& features, NodeId v, const AggregatorConfig& cfg,
                            std::uint64_t seed, Mode mode) {
  std::map<EdgeId, FeatureRow> f1;
  for (EdgeId e : h.incident_edges(v)) {
    if (auto r = intra_edge_aggregate(h, features, v, e, cfg, seed, mode)) f1.emplace(e, std::move(*r));
  }
  return inter_edge_aggregate(h, f1, v, cfg, features.cols());
}

PowerMeanStencil build_aggregation_stencil(const Hypergraph& h, const AggregatorConfig& cfg, Mode mode,
                                           std::uint64_t seed, AccumulationSemantics semantics) {
  cfg.validate();
  PowerMeanStencil st;
  st.p = cfg.p;
  st.epsilon = cfg.epsilon;
  std::vector<std::pair<std::uint32_t, double>> terms;
  std::vector<std::uint32_t> srcs;
  std::vector<double> coeffs;
  for (NodeId v = 0; v < h.num_nodes(); ++v) {
    terms.clear();
    const auto incident = h.incident_edges(v);
    std::size_t contributing = 0;
    for (EdgeId e : incident)
      if (h.edge(e).size() > 1) ++contributing;
    if (contributing > 0) {
      const double global_size = static_cast<double>(global_neighborhood(h, v).size());
      const double prefactor = cfg.edge_count_prefactor ? 1.0 / static_cast<double>(contributing) : 1.0;
      for (EdgeId e : incident) {
        const std::size_t local = h.edge(e).size() - 1;
        if (local == 0) continue;
        const auto members = members_for(h, v, e, cfg, seed, mode);
        const double w = prefactor * static_cast<double>(local) / global_size / static_cast<double>(members.size());
        for (NodeId u : members) terms.emplace_back(u, w);
      }
      std::sort(terms.begin(), terms.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    }
    srcs.clear();
    coeffs.clear();
    for (const auto& [u, w] : terms) {
      if (!srcs.empty() && srcs.back() == u) {
        coeffs.back() += w;
      } else {
        srcs.push_back(u);
        coeffs.push_back(w);
      }
    }
    const double scale =
        semantics == AccumulationSemantics::kPerIncidentEdge ? static_cast<double>(incident.size()) : 1.0;
    st.add_row(srcs, coeffs, scale);
  }
  return st;
}

namespace {

struct WeightedSums {
  FeatureRow ratio_sum;
  FeatureRow split_weighted;
};

WeightedSums anchor_sums(const Hypergraph& h, const Matrix& features, NodeId v, double inner_p, double outer_p,
                         double eps, const EdgeWeightMap& weights) {
  const std::size_t d = features.cols();
  WeightedSums out{FeatureRow(d, 0.0), FeatureRow(d, 0.0)};
  const double global_size = static_cast<double>(global_neighborhood(h, v).size());
  for (EdgeId e : h.incident_edges(v)) {
    const auto members = intra_edge_neighborhood(h, v, e);
    if (members.empty()) continue;
    FeatureRow f1 = mean_of_powers(features, members, inner_p, eps);
    for (double& x : f1) x = root(x, inner_p);
    const double ratio = static_cast<double>(members.size()) / global_size;
    auto it = weights.find(e);
    // (w / |N| sum x^p1)^(p2/p1) = w^(p2/p1) * F1^p2
    const double w = it == weights.end() ? 1.0 : std::pow(it->second, outer_p / inner_p);
    for (std::size_t j = 0; j < d; ++j) {
      const double term = power(f1[j], outer_p);
      out.ratio_sum[j] += ratio * term;
      out.split_weighted[j] += w * term;
    }
  }
  return out;
}

}  // namespace

SplitInvarianceReport check_split_invariance(const Hypergraph& h, const Matrix& features, const SplitPlan& plan,
                                             const AggregatorConfig& cfg, std::optional<double> outer_p) {
  cfg.validate();
  if (features.rows() != h.num_nodes()) throw InvalidArgument("feature rows do not match node count");
  const double p2 = outer_p.value_or(cfg.p);
  if (p2 == 0.0) throw InvalidArgument("outer exponent must be non-zero");
  const SplitResult split = split_hyperedge(h, plan);

  const auto before = anchor_sums(h, features, plan.anchor, cfg.p, p2, cfg.epsilon, {});
  const auto after = anchor_sums(split.hypergraph, features, plan.anchor, cfg.p, p2, cfg.epsilon, split.weights);

  SplitInvarianceReport report{before.ratio_sum, after.ratio_sum, before.split_weighted, after.split_weighted};
  auto compare = [&](const FeatureRow& a, const FeatureRow& b) {
    for (std::size_t j = 0; j < a.size(); ++j) {
      const double dev = std::abs(a[j] - b[j]);
      report.max_abs_deviation = std::max(report.max_abs_deviation, dev);
      const double scale = std::max(std::abs(a[j]), std::abs(b[j]));
      if (scale > 0.0) report.max_rel_deviation = std::max(report.max_rel_deviation, dev / scale);
    }
  };
  compare(report.ratio_sum_before, report.ratio_sum_after);
  compare(report.split_weighted_before, report.split_weighted_after);
  return report;
}

}  // namespace hypersage

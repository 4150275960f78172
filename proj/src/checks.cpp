#include "hypersage/checks.hpp"

#include <algorithm>
#include <numeric>

#include "hypersage/error.hpp"
#include "hypersage/model.hpp"
#include "hypersage/random.hpp"
#include "hypersage/tape.hpp"

namespace hypersage {

namespace {

std::vector<NodeId> shuffled_nodes(Rng& rng, std::size_t n) {
  std::vector<NodeId> all(n);
  std::iota(all.begin(), all.end(), 0u);
  rng.shuffle(all.begin(), all.end());
  return all;
}

Hypergraph random_hypergraph(Rng& rng, std::size_t n, std::size_t k, std::size_t max_card) {
  std::vector<std::vector<NodeId>> edges;
  for (std::size_t e = 0; e < k; ++e) {
    auto nodes = shuffled_nodes(rng, n);
    nodes.resize(1 + rng.below(std::min(max_card, n)));
    edges.push_back(std::move(nodes));
  }
  return Hypergraph(n, std::move(edges));
}

Matrix random_features(Rng& rng, std::size_t n, std::size_t d) {
  Matrix x(n, d);
  for (double& v : x.data()) v = rng.uniform(0.1, 5.0);
  return x;
}

}  // namespace

InvarianceSummary run_invariance_trials(const InvarianceTrialConfig& cfg) {
  if (cfg.max_nodes < 3) throw InvalidArgument("split trials need at least 3 nodes");
  if (cfg.p_values.empty()) throw InvalidArgument("no p values given");
  Rng rng(cfg.seed);
  InvarianceSummary out;
  for (double p : cfg.p_values) {
    AggregatorConfig agg;
    agg.p = p;
    agg.validate();
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      const std::size_t n = 3 + rng.below(cfg.max_nodes - 2);
      const std::size_t background = cfg.num_edges > 0 ? cfg.num_edges - 1 : 0;
      auto edges = random_hypergraph(rng, n, background, std::min<std::size_t>(n, 8)).edges();

      // The edge to split, at a random position among the others.
      auto members = shuffled_nodes(rng, n);
      members.resize(3 + rng.below(std::min<std::size_t>(n, 12) - 2));
      const auto target = static_cast<EdgeId>(rng.below(edges.size() + 1));
      edges.insert(edges.begin() + target, members);
      const Hypergraph h(n, std::move(edges));

      const NodeId anchor = members[0];
      std::vector<NodeId> rest(members.begin() + 1, members.end());
      const std::size_t r = 2 + rng.below(rest.size() - 1);
      std::vector<std::vector<NodeId>> parts(r);
      for (std::size_t i = 0; i < rest.size(); ++i) parts[i < r ? i : rng.below(r)].push_back(rest[i]);

      const Matrix x = random_features(rng, n, cfg.feature_dim);
      const auto report = check_split_invariance(h, x, SplitPlan{target, anchor, std::move(parts)}, agg);
      ++out.trials;
      if (report.max_rel_deviation > out.max_rel_deviation || out.trials == 1) {
        out.max_rel_deviation = report.max_rel_deviation;
        out.worst_p = p;
        out.worst_trial = t;
      }
      out.max_abs_deviation = std::max(out.max_abs_deviation, report.max_abs_deviation);
    }
  }
  return out;
}

GradCheckReport model_gradient_check(const ModelGradCheckConfig& cfg) {
  cfg.aggregator.validate();
  if (cfg.nodes < 2 || cfg.classes < 2) throw InvalidArgument("gradient check needs at least 2 nodes and 2 classes");
  Rng rng(cfg.seed);
  const Hypergraph h = random_hypergraph(rng, cfg.nodes, cfg.num_edges, cfg.max_cardinality);
  const Matrix x = random_features(rng, cfg.nodes, cfg.feature_dim);
  std::vector<int> labels(cfg.nodes);
  for (auto& l : labels) l = static_cast<int>(rng.below(cfg.classes));
  std::vector<NodeId> mask(cfg.nodes);
  std::iota(mask.begin(), mask.end(), 0u);
  const auto params = ModelParams::glorot({cfg.feature_dim, cfg.hidden, cfg.classes}, rng.next());

  ForwardConfig fwd;
  fwd.aggregator = cfg.aggregator;
  LossFunction loss = [&](std::span<const Matrix> ws, bool need_grad) {
    Tape tape;
    tape.track_branches(true);
    Var features = tape.constant(x);
    std::vector<Var> vars;
    for (const auto& w : ws) vars.push_back(tape.leaf(w));
    Var l = masked_cross_entropy(forward(tape, h, features, vars, fwd), labels, mask);
    LossEvaluation out;
    out.loss = l.value()(0, 0);
    if (need_grad) {
      tape.backward(l);
      for (const auto& v : vars) out.grads.push_back(v.grad());
    }
    out.branch_signature = tape.branch_signature();
    return out;
  };
  GradCheckOptions opts;
  opts.max_coordinates = cfg.coordinates;
  opts.seed = derive_seed(cfg.seed, {1});
  return finite_diff_check(loss, params.weights, opts);
}

}  // namespace hypersage

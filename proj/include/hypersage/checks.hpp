#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "hypersage/aggregation.hpp"
#include "hypersage/optim.hpp"

namespace hypersage {

/// Randomized split-invariance trials: each draws a hypergraph with up to
/// max_nodes nodes and num_edges edges, non-negative features, one edge of
/// cardinality >= 3 and a random partition of it around an anchor.
struct InvarianceTrialConfig {
  std::size_t max_nodes = 30;
  std::size_t num_edges = 10;
  std::size_t trials = 100;
  std::size_t feature_dim = 3;
  std::vector<double> p_values{1.0};
  std::uint64_t seed = 0;
};

struct InvarianceSummary {
  std::size_t trials = 0;
  double max_rel_deviation = 0.0;
  double max_abs_deviation = 0.0;
  double worst_p = 0.0;
  std::size_t worst_trial = 0;
};

/// Runs cfg.trials trials per p value.
InvarianceSummary run_invariance_trials(const InvarianceTrialConfig& cfg);

/// Finite-difference check of a two-layer model's weight gradients under
/// masked cross-entropy on a random hypergraph.
struct ModelGradCheckConfig {
  std::size_t nodes = 10;
  std::size_t num_edges = 6;
  std::size_t max_cardinality = 4;
  std::size_t feature_dim = 12;
  std::size_t hidden = 16;
  std::size_t classes = 3;
  AggregatorConfig aggregator;
  /// 0 checks every weight.
  std::size_t coordinates = 200;
  std::uint64_t seed = 0;
};

GradCheckReport model_gradient_check(const ModelGradCheckConfig& cfg);

}  // namespace hypersage

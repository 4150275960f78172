#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hypersage/aggregation.hpp"
#include "hypersage/datasets.hpp"
#include "hypersage/model.hpp"

namespace hypersage {

struct TrainConfig {
  std::size_t hidden = 32;
  double dropout = 0.5;
  double lr = 0.01;
  double weight_decay = 0.0005;
  std::size_t epochs = 150;
  AggregatorConfig aggregator;  // p and alpha
  AccumulationSemantics semantics = AccumulationSemantics::kNodeCentric;
  /// Repeats: num_splits data splits x num_seeds weight initializations.
  std::size_t num_splits = 3;
  std::size_t num_seeds = 3;
  double train_fraction = 0.1;
  std::uint64_t master_seed = 0;
  /// Independent runs executed concurrently.
  std::size_t jobs = 1;

  void validate() const;
};

/// Default repeat counts of the full benchmark protocol.
inline constexpr std::size_t kFullProtocolSplits = 10;
inline constexpr std::size_t kFullProtocolSeeds = 8;

struct RunRecord {
  std::string dataset;
  std::uint64_t split_seed = 0;
  std::uint64_t weight_seed = 0;
  double p = 1.0;
  std::optional<std::size_t> alpha;
  double fraction = 0.0;
  double accuracy = 0.0;
  std::size_t epochs = 0;
  double wall_ms = 0.0;
  double first_loss = 0.0;
  double final_loss = 0.0;
  // Inductive runs only.
  std::optional<double> seen_accuracy;
  std::optional<double> unseen_accuracy;
};

/// Aggregate over runs, folded in ascending run order. std is the
/// population standard deviation of the listed accuracies.
struct RunMetrics {
  std::vector<RunRecord> runs;
  double mean = 0.0;
  double std = 0.0;
  double wall_ms = 0.0;

  static RunMetrics from_runs(std::vector<RunRecord> runs);
  std::vector<double> accuracies() const;
};

struct TrainResult {
  ModelParams params;
  RunRecord record;
  std::vector<double> loss_history;
};

/// Seeds of run (split_index, seed_index) under a master seed.
std::uint64_t split_seed_for(std::uint64_t master_seed, std::size_t split_index);
std::uint64_t weight_seed_for(std::uint64_t master_seed, std::size_t seed_index);

/// Full-batch training for cfg.epochs epochs on `graph` (the dataset's own
/// hypergraph when null) with masked cross-entropy over split.train_ids.
/// Reports final-epoch accuracy on split.test_ids. Throws NumericError
/// naming the seeds on divergence.
TrainResult train_one(const DatasetBundle& bundle, const SplitSpec& split, const TrainConfig& cfg,
                      std::uint64_t weight_seed, const Hypergraph* graph = nullptr);

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels, const std::vector<NodeId>& ids);

/// num_splits x num_seeds transductive runs at cfg.train_fraction.
RunMetrics run_protocol(const DatasetBundle& bundle, const TrainConfig& cfg);

struct StabilityRow {
  double fraction = 0.0;
  RunMetrics metrics;
};

struct StabilityCurve {
  std::vector<StabilityRow> rows;
  /// Mean accuracy never decreases as the train fraction grows.
  bool monotone = true;
};

StabilityCurve stability_curve(const DatasetBundle& bundle, const std::vector<double>& fractions, const TrainConfig& cfg);

struct SweepGrid {
  std::vector<double> p_values;
  std::vector<std::optional<std::size_t>> alpha_values;
  /// cells[i][j] for p_values[i], alpha_values[j].
  std::vector<std::vector<RunMetrics>> cells;
};

SweepGrid sweep_p_alpha(const DatasetBundle& bundle, const std::vector<double>& p_values,
                        const std::vector<std::optional<std::size_t>>& alpha_values, const TrainConfig& cfg);

struct InductiveResult {
  RunMetrics seen;
  RunMetrics unseen;
};

/// Trains on the inductive training hypergraph and evaluates seen and unseen
/// test nodes on the full hypergraph, over num_splits x num_seeds runs.
InductiveResult inductive_eval(const DatasetBundle& bundle, const TrainConfig& cfg);

// Reporting.
std::string alpha_label(const std::optional<std::size_t>& alpha);
nlohmann::json run_log_entry(const RunRecord& run, const TrainConfig& cfg);
void write_run_log(std::ostream& out, const RunMetrics& metrics, const TrainConfig& cfg);
void write_sweep_tsv(std::ostream& out, const SweepGrid& grid);
void write_stability_tsv(std::ostream& out, const StabilityCurve& curve);
std::string format_metrics(const RunMetrics& m);

}  // namespace hypersage

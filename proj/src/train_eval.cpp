#include "hypersage/train_eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

#include "hypersage/error.hpp"
#include "hypersage/optim.hpp"
#include "hypersage/random.hpp"

namespace hypersage {

void TrainConfig::validate() const {
  if (hidden == 0) throw InvalidArgument("hidden size must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw InvalidArgument("dropout must lie in [0, 1)");
  if (!(lr > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (weight_decay < 0.0) throw InvalidArgument("weight decay must be non-negative");
  if (num_splits == 0 || num_seeds == 0) throw InvalidArgument("repeat counts must be positive");
  if (jobs == 0) throw InvalidArgument("jobs must be positive");
  aggregator.validate();
}

RunMetrics RunMetrics::from_runs(std::vector<RunRecord> runs) {
  RunMetrics m;
  m.runs = std::move(runs);
  if (m.runs.empty()) return m;
  double sum = 0.0;
  for (const auto& r : m.runs) {
    sum += r.accuracy;
    m.wall_ms += r.wall_ms;
  }
  const double n = static_cast<double>(m.runs.size());
  m.mean = sum / n;
  double sq = 0.0;
  for (const auto& r : m.runs) sq += (r.accuracy - m.mean) * (r.accuracy - m.mean);
  m.std = std::sqrt(sq / n);
  return m;
}

std::vector<double> RunMetrics::accuracies() const {
  std::vector<double> out;
  for (const auto& r : runs) out.push_back(r.accuracy);
  return out;
}

std::uint64_t split_seed_for(std::uint64_t master_seed, std::size_t split_index) {
  return derive_seed(master_seed, {0x73706c6974ULL, split_index});
}

std::uint64_t weight_seed_for(std::uint64_t master_seed, std::size_t seed_index) {
  return derive_seed(master_seed, {0x696e6974ULL, seed_index});
}

double accuracy(const std::vector<int>& predicted, const std::vector<int>& labels, const std::vector<NodeId>& ids) {
  if (ids.empty()) return 0.0;
  std::size_t correct = 0;
  for (NodeId v : ids)
    if (predicted.at(v) == labels.at(v)) ++correct;
  return static_cast<double>(correct) / static_cast<double>(ids.size());
}

namespace {

ForwardConfig forward_config(const TrainConfig& cfg, Mode mode, std::uint64_t seed) {
  ForwardConfig f;
  f.aggregator = cfg.aggregator;
  f.dropout_rate = cfg.dropout;
  f.mode = mode;
  f.seed = seed;
  f.semantics = cfg.semantics;
  return f;
}

// Runs job(i) for i in [0, count) on `jobs` threads; rethrows the first error.
void parallel_for(std::size_t count, std::size_t jobs, const std::function<void(std::size_t)>& job) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  for (std::size_t t = 0; t < std::min(jobs, count); ++t) {
    workers.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

TrainResult train_one(const DatasetBundle& bundle, const SplitSpec& split, const TrainConfig& cfg,
                      std::uint64_t weight_seed, const Hypergraph* graph) {
  cfg.validate();
  const Hypergraph& h = graph ? *graph : bundle.hypergraph;
  if (split.train_ids.empty()) throw InvalidArgument("split has no training nodes");
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  result.params = ModelParams::glorot({bundle.features.cols(), cfg.hidden, bundle.num_classes}, weight_seed);
  AdamState adam(AdamOptions{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay}, result.params.weights);
  ForwardCache cache;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    Tape tape;
    Var x = tape.constant(bundle.features);
    std::vector<Var> ws;
    for (const auto& w : result.params.weights) ws.push_back(tape.leaf(w, true));
    Var logits;
    try {
      logits = forward(tape, h, x, ws, forward_config(cfg, Mode::kTrain, derive_seed(weight_seed, {epoch})), &cache);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch + 1) + ", split seed " +
                         std::to_string(split.seed) + ", weight seed " + std::to_string(weight_seed) + ")");
    }
    Var loss = masked_cross_entropy(logits, bundle.labels, split.train_ids);
    const double loss_value = loss.value()(0, 0);
    if (!std::isfinite(loss_value)) {
      throw NumericError("training loss diverged at epoch " + std::to_string(epoch + 1) + " (split seed " +
                         std::to_string(split.seed) + ", weight seed " + std::to_string(weight_seed) + ")");
    }
    result.loss_history.push_back(loss_value);
    tape.backward(loss);
    std::vector<Matrix> grads;
    for (const auto& w : ws) grads.push_back(w.grad());
    adam_step(result.params.weights, grads, adam);
  }

  const Matrix logits = forward(h, bundle.features, result.params, forward_config(cfg, Mode::kTest, weight_seed));
  const auto predicted = predict(logits);

  RunRecord& rec = result.record;
  rec.dataset = bundle.name;
  rec.split_seed = split.seed;
  rec.weight_seed = weight_seed;
  rec.p = cfg.aggregator.p;
  rec.alpha = cfg.aggregator.alpha;
  rec.fraction = static_cast<double>(split.train_ids.size()) / static_cast<double>(bundle.num_nodes());
  rec.accuracy = accuracy(predicted, bundle.labels, split.test_ids);
  rec.epochs = cfg.epochs;
  if (!result.loss_history.empty()) {
    rec.first_loss = result.loss_history.front();
    rec.final_loss = result.loss_history.back();
  }
  rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return result;
}

RunMetrics run_protocol(const DatasetBundle& bundle, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t total = cfg.num_splits * cfg.num_seeds;
  std::vector<SplitSpec> splits;
  for (std::size_t s = 0; s < cfg.num_splits; ++s) {
    splits.push_back(make_transductive_split(bundle, cfg.train_fraction, split_seed_for(cfg.master_seed, s)));
  }
  std::vector<RunRecord> runs(total);
  parallel_for(total, cfg.jobs, [&](std::size_t run) {
    const std::size_t s = run / cfg.num_seeds;
    const std::size_t w = run % cfg.num_seeds;
    runs[run] = train_one(bundle, splits[s], cfg, weight_seed_for(cfg.master_seed, w)).record;
    runs[run].fraction = cfg.train_fraction;
  });
  return RunMetrics::from_runs(std::move(runs));
}

StabilityCurve stability_curve(const DatasetBundle& bundle, const std::vector<double>& fractions, const TrainConfig& cfg) {
  StabilityCurve curve;
  for (double f : fractions) {
    TrainConfig c = cfg;
    c.train_fraction = f;
    curve.rows.push_back(StabilityRow{f, run_protocol(bundle, c)});
  }
  std::vector<StabilityRow> sorted = curve.rows;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.fraction < b.fraction; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].metrics.mean < sorted[i - 1].metrics.mean) curve.monotone = false;
  return curve;
}

SweepGrid sweep_p_alpha(const DatasetBundle& bundle, const std::vector<double>& p_values,
                        const std::vector<std::optional<std::size_t>>& alpha_values, const TrainConfig& cfg) {
  SweepGrid grid{p_values, alpha_values, {}};
  for (double p : p_values) {
    std::vector<RunMetrics> row;
    for (const auto& a : alpha_values) {
      TrainConfig c = cfg;
      c.aggregator.p = p;
      c.aggregator.alpha = a;
      row.push_back(run_protocol(bundle, c));
    }
    grid.cells.push_back(std::move(row));
  }
  return grid;
}

InductiveResult inductive_eval(const DatasetBundle& bundle, const TrainConfig& cfg) {
  cfg.validate();
  const std::size_t total = cfg.num_splits * cfg.num_seeds;
  std::vector<InductiveSplit> splits;
  for (std::size_t s = 0; s < cfg.num_splits; ++s) {
    splits.push_back(make_inductive_split(bundle, split_seed_for(cfg.master_seed, s)));
  }
  std::vector<RunRecord> seen(total), unseen(total);
  parallel_for(total, cfg.jobs, [&](std::size_t run) {
    const auto& ind = splits[run / cfg.num_seeds];
    const std::uint64_t wseed = weight_seed_for(cfg.master_seed, run % cfg.num_seeds);
    TrainResult trained = train_one(bundle, ind.split, cfg, wseed, &ind.train_hypergraph);
    const Matrix logits = forward_extended(ind.train_hypergraph, bundle.hypergraph, bundle.features, trained.params,
                                           forward_config(cfg, Mode::kTest, wseed));
    const auto predicted = predict(logits);
    RunRecord rec = trained.record;
    rec.fraction = 0.2;
    rec.seen_accuracy = accuracy(predicted, bundle.labels, ind.split.seen_test_ids);
    rec.unseen_accuracy = accuracy(predicted, bundle.labels, ind.split.unseen_test_ids);
    seen[run] = rec;
    seen[run].accuracy = *rec.seen_accuracy;
    unseen[run] = rec;
    unseen[run].accuracy = *rec.unseen_accuracy;
  });
  return InductiveResult{RunMetrics::from_runs(std::move(seen)), RunMetrics::from_runs(std::move(unseen))};
}

std::string alpha_label(const std::optional<std::size_t>& alpha) {
  return alpha ? std::to_string(*alpha) : std::string("max");
}

nlohmann::json run_log_entry(const RunRecord& run, const TrainConfig& cfg) {
  nlohmann::json j{
      {"dataset", run.dataset},
      {"split_seed", run.split_seed},
      {"weight_seed", run.weight_seed},
      {"p", run.p},
      {"alpha", alpha_label(run.alpha)},
      {"fraction", run.fraction},
      {"accuracy", run.accuracy},
      {"epochs", run.epochs},
      {"wall_ms", run.wall_ms},
      {"first_loss", run.first_loss},
      {"final_loss", run.final_loss},
      {"hidden", cfg.hidden},
      {"dropout", cfg.dropout},
      {"lr", cfg.lr},
      {"weight_decay", cfg.weight_decay},
      {"master_seed", cfg.master_seed},
      {"semantics", cfg.semantics == AccumulationSemantics::kNodeCentric ? "eq4" : "alg1-per-edge"},
      {"edge_count_prefactor", cfg.aggregator.edge_count_prefactor},
  };
  if (run.seen_accuracy) j["seen_accuracy"] = *run.seen_accuracy;
  if (run.unseen_accuracy) j["unseen_accuracy"] = *run.unseen_accuracy;
  return j;
}

void write_run_log(std::ostream& out, const RunMetrics& metrics, const TrainConfig& cfg) {
  for (const auto& r : metrics.runs) out << run_log_entry(r, cfg).dump() << '\n';
}

std::string format_metrics(const RunMetrics& m) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f ± %.1f", 100.0 * m.mean, 100.0 * m.std);
  return buf;
}

void write_sweep_tsv(std::ostream& out, const SweepGrid& grid) {
  out << "p";
  for (const auto& a : grid.alpha_values) out << "\talpha=" << alpha_label(a);
  out << '\n';
  for (std::size_t i = 0; i < grid.p_values.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", grid.p_values[i]);
    out << buf;
    for (const auto& cell : grid.cells[i]) out << '\t' << format_metrics(cell);
    out << '\n';
  }
}

void write_stability_tsv(std::ostream& out, const StabilityCurve& curve) {
  out << "fraction\tmean\tstd\truns\n";
  for (const auto& row : curve.rows) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%.4f\t%.4f\t%.4f\t%zu\n", row.fraction, row.metrics.mean, row.metrics.std,
                  row.metrics.runs.size());
    out << buf;
  }
}

}  // namespace hypersage

#include <gtest/gtest.h>

#include <sstream>

#include "hypersage/error.hpp"
#include "hypersage/train_eval.hpp"
#include "test_support.hpp"

using namespace hypersage;
using namespace hypersage::testing;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.epochs = 60;
  cfg.num_splits = 2;
  cfg.num_seeds = 2;
  cfg.train_fraction = 0.2;
  return cfg;
}

const DatasetBundle& planted() {
  static const DatasetBundle b = planted_dataset(150, 3, 100, 30, 21);
  return b;
}

}  // namespace

TEST(Train, LearnsAPlantedPartition) {
  const TrainConfig cfg = small_config();
  const auto split = make_transductive_split(planted(), 0.2, 1);
  const auto result = train_one(planted(), split, cfg, 5);
  EXPECT_EQ(result.loss_history.size(), 60u);
  EXPECT_LT(result.record.final_loss, result.record.first_loss);
  EXPECT_GE(result.record.accuracy, 0.9);
  EXPECT_NEAR(result.record.fraction, 0.2, 1e-12);
}

TEST(Train, SampledAggregationAlsoLearns) {
  TrainConfig cfg = small_config();
  cfg.aggregator.p = 0.01;
  cfg.aggregator.alpha = 2;
  const auto split = make_transductive_split(planted(), 0.2, 2);
  EXPECT_GE(train_one(planted(), split, cfg, 6).record.accuracy, 0.85);
}

TEST(Train, ZeroEpochsEvaluatesTheInitialization) {
  TrainConfig cfg = small_config();
  cfg.epochs = 0;
  const auto split = make_transductive_split(planted(), 0.2, 1);
  const auto result = train_one(planted(), split, cfg, 5);
  EXPECT_TRUE(result.loss_history.empty());
  EXPECT_EQ(result.params, ModelParams::glorot({30, 16, 3}, 5));
  const auto predicted = predict(forward(planted().hypergraph, planted().features, result.params, ForwardConfig{}));
  EXPECT_DOUBLE_EQ(result.record.accuracy, accuracy(predicted, planted().labels, split.test_ids));
}

TEST(Train, IsDeterministicForFixedSeeds) {
  TrainConfig cfg = small_config();
  cfg.epochs = 10;
  cfg.aggregator.alpha = 2;
  const auto split = make_transductive_split(planted(), 0.2, 1);
  const auto a = train_one(planted(), split, cfg, 5);
  const auto b = train_one(planted(), split, cfg, 5);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.loss_history, b.loss_history);
  EXPECT_NE(train_one(planted(), split, cfg, 6).params, a.params);
}

TEST(Train, RejectsInvalidConfig) {
  const auto split = make_transductive_split(planted(), 0.2, 1);
  TrainConfig cfg = small_config();
  cfg.dropout = 1.0;
  EXPECT_THROW(train_one(planted(), split, cfg, 1), InvalidArgument);
  cfg = small_config();
  cfg.aggregator.p = 0.0;
  EXPECT_THROW(train_one(planted(), split, cfg, 1), InvalidArgument);
  SplitSpec empty;
  EXPECT_THROW(train_one(planted(), empty, small_config(), 1), InvalidArgument);
}

TEST(Accuracy, CountsMatchesOverIds) {
  const std::vector<int> pred{0, 1, 2, 0}, labels{0, 2, 2, 1};
  EXPECT_DOUBLE_EQ(accuracy(pred, labels, {0, 1, 2, 3}), 0.5);
  EXPECT_DOUBLE_EQ(accuracy(pred, labels, {0, 2}), 1.0);
}

TEST(Protocol, RunCountsSeedsAndThreadIndependence) {
  TrainConfig cfg = small_config();
  cfg.epochs = 5;
  const auto serial = run_protocol(planted(), cfg);
  ASSERT_EQ(serial.runs.size(), 4u);
  EXPECT_EQ(serial.runs[0].split_seed, serial.runs[1].split_seed);
  EXPECT_NE(serial.runs[0].split_seed, serial.runs[2].split_seed);
  EXPECT_EQ(serial.runs[0].weight_seed, serial.runs[2].weight_seed);
  cfg.jobs = 3;
  const auto threaded = run_protocol(planted(), cfg);
  EXPECT_EQ(threaded.accuracies(), serial.accuracies());
  EXPECT_EQ(threaded.mean, serial.mean);
}

TEST(Protocol, MetricsArePopulationMeanAndStd) {
  std::vector<RunRecord> runs(4);
  const double acc[] = {0.5, 0.7, 0.6, 0.8};
  for (int i = 0; i < 4; ++i) runs[i].accuracy = acc[i];
  const auto m = RunMetrics::from_runs(runs);
  EXPECT_NEAR(m.mean, 0.65, 1e-15);
  EXPECT_NEAR(m.std, std::sqrt(0.0125), 1e-15);
  for (auto& r : runs) r.accuracy = 0.42;
  EXPECT_EQ(RunMetrics::from_runs(runs).std, 0.0);
  EXPECT_EQ(format_metrics(m), "65.0 ± 11.2");
}

TEST(Sweep, GridShapeAndTsv) {
  TrainConfig cfg = small_config();
  cfg.epochs = 3;
  cfg.num_splits = 1;
  cfg.num_seeds = 1;
  const auto grid = sweep_p_alpha(planted(), {-1.0, 1.0}, {std::nullopt, 2}, cfg);
  ASSERT_EQ(grid.cells.size(), 2u);
  ASSERT_EQ(grid.cells[0].size(), 2u);
  EXPECT_EQ(grid.cells[0][1].runs[0].p, -1.0);
  EXPECT_EQ(grid.cells[0][1].runs[0].alpha, std::optional<std::size_t>(2));
  std::ostringstream out;
  write_sweep_tsv(out, grid);
  const std::string text = out.str();
  EXPECT_EQ(text.substr(0, text.find('\n')), "p\talpha=max\talpha=2");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}

TEST(Stability, RowsPerFraction) {
  TrainConfig cfg = small_config();
  cfg.epochs = 3;
  cfg.num_splits = 1;
  cfg.num_seeds = 1;
  const auto curve = stability_curve(planted(), {0.1, 0.3}, cfg);
  ASSERT_EQ(curve.rows.size(), 2u);
  EXPECT_EQ(curve.rows[1].metrics.runs[0].fraction, 0.3);
  std::ostringstream out;
  write_stability_tsv(out, curve);
  EXPECT_EQ(out.str().substr(0, 24), "fraction\tmean\tstd\truns\n0");
}

TEST(Inductive, SeenAndUnseenAccuracies) {
  TrainConfig cfg = small_config();
  cfg.num_splits = 1;
  cfg.num_seeds = 1;
  const auto res = inductive_eval(planted(), cfg);
  ASSERT_EQ(res.seen.runs.size(), 1u);
  EXPECT_TRUE(res.seen.runs[0].unseen_accuracy);
  EXPECT_EQ(res.unseen.runs[0].accuracy, *res.seen.runs[0].unseen_accuracy);
  EXPECT_GE(res.seen.mean, 0.8);
  EXPECT_GE(res.unseen.mean, 0.8);
}

TEST(RunLog, EchoesConfiguration) {
  TrainConfig cfg = small_config();
  cfg.aggregator.alpha = 5;
  RunRecord r;
  r.dataset = "cora";
  r.alpha = 5;
  r.accuracy = 0.7;
  r.unseen_accuracy = 0.6;
  const auto j = run_log_entry(r, cfg);
  EXPECT_EQ(j.at("dataset"), "cora");
  EXPECT_EQ(j.at("alpha"), "5");
  EXPECT_EQ(j.at("semantics"), "eq4");
  EXPECT_EQ(j.at("hidden"), 16);
  EXPECT_EQ(j.at("unseen_accuracy"), 0.6);
  EXPECT_FALSE(j.contains("seen_accuracy"));
  std::ostringstream out;
  write_run_log(out, RunMetrics::from_runs({r, r}), cfg);
  const std::string log = out.str();
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);
}

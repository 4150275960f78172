#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "hypersage/aggregation.hpp"
#include "hypersage/error.hpp"
#include "test_support.hpp"

using namespace hypersage;
using namespace hypersage::testing;

namespace {

Matrix column(std::initializer_list<double> xs) {
  Matrix m(xs.size(), 1);
  std::size_t i = 0;
  for (double x : xs) m(i++, 0) = x;
  return m;
}

double mean1(std::initializer_list<double> xs, double p) { return generalized_mean(column(xs), p)[0]; }

AggregatorConfig with_p(double p) {
  AggregatorConfig c;
  c.p = p;
  return c;
}

}  // namespace

TEST(GeneralizedMean, ReferenceValues) {
  // Reference values computed independently in double precision.
  EXPECT_NEAR(mean1({1, 4}, 0.01), 2.0048102670759014, 1e-12);
  EXPECT_NEAR(mean1({1, 4}, 100.0), 3.9723699817481437, 1e-12);
  EXPECT_NEAR(mean1({1, 4}, -1.0), 1.6, 1e-12);
  EXPECT_NEAR(mean1({1, 4}, 1.0), 2.5, 1e-15);
  EXPECT_NEAR(mean1({1, 4}, 2.0), std::sqrt(8.5), 1e-12);
  EXPECT_NEAR(mean1({1, 4}, 3.0), std::cbrt(32.5), 1e-12);
}

TEST(GeneralizedMean, IsColumnWise) {
  const Matrix x{{1, 3}, {4, 3}};
  const auto m = generalized_mean(x, -1.0);
  EXPECT_NEAR(m[0], 1.6, 1e-12);
  EXPECT_NEAR(m[1], 3.0, 1e-12);
}

TEST(GeneralizedMean, SingletonAndConstantInputs) {
  for (double p : {-3.0, -1.0, 0.01, 1.0, 2.0, 7.0}) {
    EXPECT_NEAR(mean1({2.5}, p), 2.5, 1e-12) << p;
    EXPECT_NEAR(mean1({1.7, 1.7, 1.7}, p), 1.7, 1e-12) << p;
  }
}

TEST(GeneralizedMean, ZerosAreClampedForNegativeExponents) {
  const double v = mean1({0.0, 1.0}, -1.0);
  EXPECT_TRUE(std::isfinite(v));
  EXPECT_GT(v, 0.0);
  EXPECT_NEAR(v, 2.0 / (1.0 / 1e-7 + 1.0), 1e-18);
}

TEST(GeneralizedMean, BoundedAndMonotoneInP) {
  Rng rng(17);
  const std::vector<double> ps{-8, -3, -1, -0.5, 0.01, 0.5, 1, 2, 3, 8};
  for (int trial = 0; trial < 200; ++trial) {
    const Matrix x = random_features(rng, 1 + rng.below(8), 3, 0.05, 10.0);
    std::vector<double> lo(3, std::numeric_limits<double>::infinity()), hi(3, 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t j = 0; j < 3; ++j) {
        lo[j] = std::min(lo[j], x(r, j));
        hi[j] = std::max(hi[j], x(r, j));
      }
    FeatureRow prev;
    for (double p : ps) {
      const auto m = generalized_mean(x, p);
      for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_GE(m[j], lo[j] * (1 - 1e-12));
        EXPECT_LE(m[j], hi[j] * (1 + 1e-12));
        if (!prev.empty()) EXPECT_GE(m[j], prev[j] * (1 - 1e-12)) << "p=" << p;
      }
      prev = m;
    }
  }
}

TEST(GeneralizedMean, ApproachesMaxAndMin) {
  EXPECT_NEAR(mean1({0.5, 2.0, 3.0}, 400.0), 3.0, 0.01);
  EXPECT_NEAR(mean1({0.5, 2.0, 3.0}, -400.0), 0.5, 0.01);
}

TEST(GeneralizedMean, RejectsBadInput) {
  EXPECT_THROW(generalized_mean(Matrix(0, 2), 1.0), InvalidArgument);
  EXPECT_THROW(generalized_mean(column({1, 2}), 0.0), InvalidArgument);
  EXPECT_THROW(generalized_mean(column({1, std::nan("")}), 1.0), InvalidArgument);
  EXPECT_THROW(generalized_mean(column({1, std::numeric_limits<double>::infinity()}), 1.0), InvalidArgument);
}

TEST(AggregatorConfig, Validation) {
  EXPECT_THROW(with_p(0.0).validate(), InvalidArgument);
  EXPECT_THROW(with_p(std::numeric_limits<double>::infinity()).validate(), InvalidArgument);
  AggregatorConfig c;
  c.alpha = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c.alpha = 1;
  EXPECT_NO_THROW(c.validate());
  c.epsilon = 0.0;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(IntraEdge, MeanOverNeighborsExcludingSelf) {
  const Hypergraph h = build_hypergraph(3, {{0, 1, 2}});
  const Matrix x = column({100.0, 1.0, 4.0});
  const auto f1 = intra_edge_aggregate(h, x, 0, 0, with_p(-1.0), 0);
  ASSERT_TRUE(f1);
  EXPECT_NEAR((*f1)[0], 1.6, 1e-12);
  const Hypergraph single = build_hypergraph(2, {{1}});
  EXPECT_FALSE(intra_edge_aggregate(single, column({1, 2}), 1, 0, with_p(1.0), 0));
}

TEST(IntraEdge, TrainModeUsesCondensedSample) {
  std::vector<NodeId> all(9);
  std::iota(all.begin(), all.end(), 0u);
  const Hypergraph h = build_hypergraph(9, {all});
  Matrix x(9, 1);
  for (NodeId v = 0; v < 9; ++v) x(v, 0) = v + 1.0;
  AggregatorConfig cfg = with_p(1.0);
  cfg.alpha = 2;
  const auto sample = sample_condensed(h, NeighborhoodQuery{4, 0, 2, 77});
  const auto f1 = intra_edge_aggregate(h, x, 4, 0, cfg, 77, Mode::kTrain);
  EXPECT_NEAR((*f1)[0], (sample[0] + sample[1] + 2.0) / 2.0, 1e-12);
  // Test mode ignores the budget.
  EXPECT_NEAR((*intra_edge_aggregate(h, x, 4, 0, cfg, 77, Mode::kTest))[0], (45.0 - 5.0) / 8.0, 1e-12);
}

TEST(InterEdge, PrefactorToggle) {
  // v = 0 in {0,1} and {0,2}, both neighbors at 4: each ratio is 1/2.
  const Hypergraph h = build_hypergraph(3, {{0, 1}, {0, 2}});
  const std::map<EdgeId, FeatureRow> f1{{0, {4.0}}, {1, {4.0}}};
  AggregatorConfig cfg = with_p(1.0);
  EXPECT_NEAR(inter_edge_aggregate(h, f1, 0, cfg, 1)[0], 4.0, 1e-12);
  cfg.edge_count_prefactor = true;
  EXPECT_NEAR(inter_edge_aggregate(h, f1, 0, cfg, 1)[0], 2.0, 1e-12);
}

TEST(InterEdge, OverlappingEdgesUseGlobalNeighborhoodSize) {
  // N(0) = {1,2,3}; edges {0,1,2} and {0,2,3} give ratios 2/3 each.
  const Hypergraph h = build_hypergraph(4, {{0, 1, 2}, {0, 2, 3}});
  const std::map<EdgeId, FeatureRow> f1{{0, {3.0}}, {1, {6.0}}};
  EXPECT_NEAR(inter_edge_aggregate(h, f1, 0, with_p(1.0), 1)[0], 2.0 / 3.0 * 3.0 + 2.0 / 3.0 * 6.0, 1e-12);
  EXPECT_NEAR(inter_edge_aggregate(h, f1, 0, with_p(2.0), 1)[0], std::sqrt(2.0 / 3.0 * 9.0 + 2.0 / 3.0 * 36.0),
              1e-12);
}

TEST(InterEdge, IsolatedNodeGetsZeros) {
  const Hypergraph h = build_hypergraph(3, {{0, 1}, {2}});
  EXPECT_EQ(inter_edge_aggregate(h, {}, 2, with_p(1.0), 3), FeatureRow(3, 0.0));
  EXPECT_EQ(nested_aggregate(h, Matrix(3, 2, 1.0), 2, with_p(2.0), 0, Mode::kTest), FeatureRow(2, 0.0));
}

TEST(InterEdge, MissingResultThrows) {
  const Hypergraph h = build_hypergraph(3, {{0, 1}, {0, 2}});
  EXPECT_THROW(inter_edge_aggregate(h, {{0, {1.0}}}, 0, with_p(1.0), 1), InvalidArgument);
}

TEST(Nested, ReducesToMeanAggregationOnGraphs) {
  Rng rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng.below(30);
    const Hypergraph g = random_graph(rng, n, rng.below(3 * n));
    const Matrix x = random_features(rng, n, 4);
    const Matrix expected = graph_mean_oracle(n, edge_pairs(g), x);
    for (NodeId v = 0; v < n; ++v) {
      const auto got = nested_aggregate(g, x, v, with_p(1.0), 0, Mode::kTest);
      for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(got[j], expected(v, j), 1e-9 * (1 + std::abs(expected(v, j))));
    }
  }
}

TEST(Stencil, MatchesLevelByLevelEvaluation) {
  Rng rng(29);
  for (double p : {-1.0, 0.01, 1.0, 2.0, 3.0}) {
    for (int trial = 0; trial < 30; ++trial) {
      const std::size_t n = 2 + rng.below(25);
      const Hypergraph h = random_hypergraph(rng, n, rng.below(15), 6);
      const Matrix x = random_features(rng, n, 3);
      AggregatorConfig cfg = with_p(p);
      cfg.edge_count_prefactor = trial % 2 == 1;
      if (trial % 3 == 0) cfg.alpha = 1 + rng.below(3);
      const Mode mode = trial % 4 < 2 ? Mode::kTrain : Mode::kTest;
      const std::uint64_t seed = rng.next();
      const Matrix fused = apply_stencil(build_aggregation_stencil(h, cfg, mode, seed), x);
      for (NodeId v = 0; v < n; ++v) {
        const auto ref = nested_aggregate(h, x, v, cfg, seed, mode);
        for (std::size_t j = 0; j < 3; ++j)
          EXPECT_NEAR(fused(v, j), ref[j], 1e-9 * (1 + std::abs(ref[j]))) << "p=" << p << " node " << v;
      }
    }
  }
}

TEST(Stencil, PerIncidentEdgeSemanticsScalesByDegree) {
  const Hypergraph h = build_hypergraph(4, {{0, 1}, {0, 2, 3}, {0}});
  const Matrix x = column({1, 2, 3, 4});
  const Matrix a = apply_stencil(build_aggregation_stencil(h, with_p(1.0), Mode::kTest, 0), x);
  const Matrix b = apply_stencil(
      build_aggregation_stencil(h, with_p(1.0), Mode::kTest, 0, AccumulationSemantics::kPerIncidentEdge), x);
  EXPECT_NEAR(a(0, 0), 3.0, 1e-12);
  EXPECT_NEAR(b(0, 0), 9.0, 1e-12);
  EXPECT_NEAR(b(1, 0), a(1, 0), 1e-12);
}

TEST(Stencil, LargeBudgetSamplingEqualsFullNeighborhood) {
  Rng rng(31);
  const Hypergraph h = random_hypergraph(rng, 20, 12, 5);
  const Matrix x = random_features(rng, 20, 2);
  AggregatorConfig cfg = with_p(2.0);
  cfg.alpha = 5;
  const Matrix train = apply_stencil(build_aggregation_stencil(h, cfg, Mode::kTrain, 9), x);
  const Matrix test = apply_stencil(build_aggregation_stencil(h, cfg, Mode::kTest, 9), x);
  EXPECT_LE(max_abs_diff(train, test), 1e-12);
}

TEST(SplitInvariance, BothFormsHoldOnRandomSplits) {
  Rng rng(37);
  for (double p : {-1.0, 0.01, 1.0, 2.0, 3.0}) {
    for (int trial = 0; trial < 60; ++trial) {
      const std::size_t n = 4 + rng.below(30);
      Hypergraph h = random_hypergraph(rng, n, rng.below(8), 5);
      // One large edge to split.
      std::vector<NodeId> nodes(n);
      std::iota(nodes.begin(), nodes.end(), 0u);
      rng.shuffle(nodes.begin(), nodes.end());
      nodes.resize(3 + rng.below(std::min<std::size_t>(n - 2, 10)));
      auto edges = h.edges();
      edges.push_back(nodes);
      h = build_hypergraph(n, edges);
      const EdgeId target = static_cast<EdgeId>(h.num_edges() - 1);
      const NodeId anchor = nodes[0];
      std::vector<NodeId> rest(nodes.begin() + 1, nodes.end());
      const std::size_t r = 2 + rng.below(rest.size() - 1);
      std::vector<std::vector<NodeId>> parts(r);
      for (std::size_t i = 0; i < rest.size(); ++i) parts[i < r ? i : rng.below(r)].push_back(rest[i]);
      const Matrix x = random_features(rng, n, 3);
      const auto rep = check_split_invariance(h, x, SplitPlan{target, anchor, parts}, with_p(p));
      EXPECT_LE(rep.max_rel_deviation, 1e-9) << "p=" << p;
    }
  }
}

TEST(SplitInvariance, MismatchedInnerAndOuterExponentsBreakIt) {
  // Anchor 0 in {0,1,2} with x1 = 1, x2 = 4, split into {0,1} and {0,2};
  // p1 = 1, p2 = 2. Ratio form: 2.5^2 = 6.25 before, 0.5*1 + 0.5*16 = 8.5 after.
  const Hypergraph h = build_hypergraph(3, {{0, 1, 2}});
  const Matrix x = column({0.0, 1.0, 4.0});
  const auto rep = check_split_invariance(h, x, SplitPlan{0, 0, {{1}, {2}}}, with_p(1.0), 2.0);
  EXPECT_NEAR(rep.ratio_sum_before[0], 6.25, 1e-12);
  EXPECT_NEAR(rep.ratio_sum_after[0], 8.5, 1e-12);
  EXPECT_NEAR(rep.split_weighted_after[0], 0.25 * 1 + 0.25 * 16, 1e-12);
  EXPECT_NEAR(rep.max_abs_deviation, 2.25, 1e-12);
}

#include "anchorgae/data_io.hpp"
#include "anchorgae/metrics.hpp"
#include "anchorgae/pipeline.hpp"
#include "anchorgae/self_supervised.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace anchorgae;

namespace {

AnchorGaeConfig small_config(LoopMode mode = LoopMode::full) {
  AnchorGaeConfig cfg;
  cfg.anchors = 30;
  cfg.clusters = 3;
  cfg.hidden = {16, 8};
  cfg.k0 = 3;
  cfg.outer_epochs = 3;
  cfg.train.inner_epochs = 20;
  cfg.mode = mode;
  cfg.seed = 1;
  return cfg;
}

DenseMatrix small_data(std::uint64_t seed = 2) {
  SeededRng rng(seed);
  return minmax_scale(make_blobs(300, 6, 3, 8.0, rng).x);
}

}  // namespace

TEST(Schedule, GrowthPath) {
  const SparsitySchedule s = SparsitySchedule::make(10000, 500, 10, 5, 3, Index{1000});
  EXPECT_EQ(s.k_max, 50);
  EXPECT_EQ(s.delta_k, 9);
  std::vector<Index> path{s.k0};
  for (int e = 0; e < 5; ++e) path.push_back(step_sparsity(s, path.back()));
  EXPECT_EQ(path, (std::vector<Index>{3, 12, 21, 30, 39, 48}));
}

TEST(Schedule, NoGrowthWhenCapBelowStart) {
  const SparsitySchedule s = SparsitySchedule::make(1000, 20, 10, 5, 3);
  EXPECT_EQ(s.n_s, 100);
  EXPECT_EQ(s.k_max, 3);
  EXPECT_EQ(s.delta_k, 0);
  EXPECT_EQ(step_sparsity(s, 3), 3);
}

TEST(Schedule, DefaultSmallestClusterIsBalanced) {
  const SparsitySchedule s = SparsitySchedule::make(2000, 200, 4, 5, 3);
  EXPECT_EQ(s.n_s, 500);
  EXPECT_EQ(s.k_max, 50);
  EXPECT_EQ(s.delta_k, 9);
}

TEST(Schedule, StepCappedBelowAnchorCount) {
  const SparsitySchedule s = SparsitySchedule::make(100, 10, 1, 1, 3, Index{100});
  EXPECT_EQ(step_sparsity(s, 3), 9);
}

TEST(Schedule, Validation) {
  EXPECT_THROW(SparsitySchedule::make(100, 10, 2, 5, 10), std::invalid_argument);
  EXPECT_THROW(SparsitySchedule::make(100, 10, 2, -1, 3), std::invalid_argument);
  EXPECT_THROW(SparsitySchedule::make(100, 1, 2, 5, 3), std::invalid_argument);
  EXPECT_THROW(SparsitySchedule::make(100, 10, 2, 5, 3, Index{0}), std::invalid_argument);
}

TEST(LoopModeNames, RoundTrip) {
  for (LoopMode m : {LoopMode::full, LoopMode::fixed_b, LoopMode::fixed_k, LoopMode::knn}) EXPECT_EQ(parse_loop_mode(to_string(m)), m);
  EXPECT_THROW(parse_loop_mode("bogus"), std::invalid_argument);
}

TEST(Pullback, IdentityGraphReturnsSamples) {
  SeededRng rng(3);
  const DenseMatrix x = oracle::random_matrix(5, 3, rng);
  const AnchorGraph g = AnchorGraph::from_dense(DenseMatrix::Identity(5, 5));
  EXPECT_LT((pullback_anchors(x, g) - x).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Pullback, SharedAnchorIsMidpoint) {
  DenseMatrix x(2, 2), b(2, 1);
  x << 0, 0, 2, 4;
  b << 1, 1;
  const DenseMatrix c = pullback_anchors(x, AnchorGraph::from_dense(b));
  EXPECT_DOUBLE_EQ(c(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(c(0, 1), 2.0);
}

TEST(Pullback, MatchesWeightedMeanLoop) {
  SeededRng rng(4);
  const AnchorGraph g = oracle::random_graph(40, 7, 3, rng);
  const DenseMatrix x = oracle::random_matrix(40, 3, rng);
  const DenseMatrix b = g.dense_b();
  const DenseMatrix c = pullback_anchors(x, g);
  for (Index j = 0; j < 7; ++j) {
    Eigen::RowVectorXd s = Eigen::RowVectorXd::Zero(3);
    double w = 0.0;
    for (Index i = 0; i < 40; ++i) {
      s += b(i, j) * x.row(i);
      w += b(i, j);
    }
    EXPECT_LT((c.row(j) - s / w).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(Pullback, AnchorsInsideBoundingBox) {
  SeededRng rng(5);
  const AnchorGraph g = oracle::random_graph(50, 6, 2, rng);
  const DenseMatrix x = oracle::random_matrix(50, 4, rng, -2, 3);
  const DenseMatrix c = pullback_anchors(x, g);
  for (Index t = 0; t < 4; ++t) {
    EXPECT_GE(c.col(t).minCoeff(), x.col(t).minCoeff() - 1e-12);
    EXPECT_LE(c.col(t).maxCoeff(), x.col(t).maxCoeff() + 1e-12);
  }
}

TEST(Collapse, UniformRowsHaveZeroGap) {
  DenseMatrix b = DenseMatrix::Zero(4, 4);
  for (Index i = 0; i < 4; ++i) {
    b(i, i) = 0.5;
    b(i, (i + 1) % 4) = 0.5;
  }
  const AnchorGraph g = AnchorGraph::from_dense(b);
  const CollapseDiagnostics d = measure_collapse(g, b);
  EXPECT_EQ(d.uniformity_gap, 0.0);
  EXPECT_EQ(d.mean_uniformity_gap, 0.0);
  EXPECT_EQ(d.reconstruction_gap, 0.0);
  EXPECT_EQ(d.component_count, 1);
}

TEST(Collapse, ThreeBlocksThreeComponents) {
  DenseMatrix b = DenseMatrix::Zero(9, 6);
  for (Index i = 0; i < 9; ++i) {
    b(i, 2 * (i / 3)) = 0.7;
    b(i, 2 * (i / 3) + 1) = 0.3;
  }
  const AnchorGraph g = AnchorGraph::from_dense(b);
  const CollapseDiagnostics d = measure_collapse(g, b);
  EXPECT_EQ(d.component_count, 3);
  EXPECT_NEAR(d.uniformity_gap, 0.2, 1e-15);
}

TEST(Collapse, UnusedAnchorIsItsOwnComponent) {
  DenseMatrix b(2, 3);
  b << 1, 0, 0, 0.5, 0.5, 0;
  EXPECT_EQ(bipartite_components(AnchorGraph::from_dense(b)), 2);
}

TEST(Collapse, ReconstructionGapIsMaxOnSupport) {
  DenseMatrix b(1, 3), q(1, 3);
  b << 0.5, 0.5, 0;
  q << 0.2, 0.3, 0.5;
  EXPECT_NEAR(measure_collapse(AnchorGraph::from_dense(b), q).reconstruction_gap, 0.3, 1e-15);
}

TEST(Loop, ZeroOuterEpochsTrainsOnceWithoutRefit) {
  const DenseMatrix x = small_data();
  AnchorGaeConfig cfg = small_config();
  cfg.outer_epochs = 0;
  int calls = 0;
  const AnchorGaeResult r = run_anchorgae(x, cfg, [&](const IterationSnapshot&) { ++calls; });
  EXPECT_EQ(calls, 1);
  EXPECT_EQ(r.traces.size(), 1u);
  EXPECT_EQ(r.diagnostics.size(), 1u);
  EXPECT_EQ(r.k_path, (std::vector<Index>{3}));
  EXPECT_EQ(r.graph.k, 3);
}

TEST(Loop, FullModeKPathGrowsByStepAndIsCapped) {
  const DenseMatrix x = small_data();
  const AnchorGaeResult r = run_anchorgae(x, small_config());
  ASSERT_EQ(r.k_path.size(), 4u);
  // n=300, m=30, n_s=100 -> k_max=10, delta_k=2
  EXPECT_EQ(r.k_path, (std::vector<Index>{3, 5, 7, 9}));
  for (const auto& d : r.diagnostics) EXPECT_LE(d.k, r.schedule.k_max);
}

TEST(Loop, FixedKModeKeepsSparsity) {
  const AnchorGaeResult r = run_anchorgae(small_data(), small_config(LoopMode::fixed_k));
  for (Index k : r.k_path) EXPECT_EQ(k, 3);
  for (const auto& d : r.diagnostics) EXPECT_EQ(d.k, 3);
}

TEST(Loop, FixedBModeKeepsInitialGraph) {
  const DenseMatrix x = small_data();
  const AnchorGraph* first = nullptr;
  std::vector<double> first_vals;
  const AnchorGaeResult r = run_anchorgae(x, small_config(LoopMode::fixed_b), [&](const IterationSnapshot& s) {
    if (!first) {
      first = s.graph;
      first_vals = s.graph->val;
    }
  });
  EXPECT_EQ(r.graph.val, first_vals);
}

TEST(Loop, KnnModeRowsAreUniform) {
  const AnchorGaeResult r = run_anchorgae(small_data(), small_config(LoopMode::knn));
  for (double v : r.graph.val) EXPECT_NEAR(v, 1.0 / static_cast<double>(r.graph.k), 1e-15);
}

TEST(Loop, DeterministicForFixedSeed) {
  const DenseMatrix x = small_data();
  const AnchorGaeResult a = run_anchorgae(x, small_config());
  const AnchorGaeResult b = run_anchorgae(x, small_config());
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.graph.val, b.graph.val);
}

TEST(Loop, NonFiniteInputNamesStage) {
  DenseMatrix x = small_data();
  x(4, 2) = std::numeric_limits<double>::quiet_NaN();
  try {
    run_anchorgae(x, small_config());
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("input"), std::string::npos);
  }
}

TEST(Loop, ConfigValidation) {
  const DenseMatrix x = small_data();
  AnchorGaeConfig cfg = small_config();
  cfg.anchors = 301;
  EXPECT_THROW(run_anchorgae(x, cfg), std::invalid_argument);
  cfg = small_config();
  cfg.hidden = {8, 8, 8, 8, 8};
  EXPECT_THROW(run_anchorgae(x, cfg), std::invalid_argument);
}

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "loopbench/errors.hpp"
#include "loopbench/metrics.hpp"
#include "loopbench/predictors.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"

using namespace loopbench;

namespace {

PredictionMode shifted_mode(const TrajectorySample& gt, double dy, double prob, double sigma = 1.0) {
  PredictionMode m;
  m.prob = prob;
  for (const auto& s : gt.states()) m.steps.push_back({s.x, s.y + dy, sigma, sigma, 0.0});
  return m;
}

TrajectorySample straight_gt(int n = 10) {
  std::vector<AgentState> s;
  for (int k = 1; k <= n; ++k) s.push_back({k * 0.1, k * 1.0, 0.0, 0.0, 10.0, 0.0});
  return TrajectorySample(0.1, s);
}

// Motion along a ray with a constant-deceleration speed profile (stops at zero).
TrajectorySample braking_ray(double x0, double y0, double heading, double v0, double decel, double duration,
                             double dt) {
  std::vector<AgentState> s;
  const int n = static_cast<int>(std::lround(duration / dt));
  const double t_stop = decel > 0.0 ? v0 / decel : 1e9;
  for (int k = 0; k <= n; ++k) {
    const double t = k * dt;
    const double tt = std::min(t, t_stop);
    const double dist = v0 * tt - 0.5 * decel * tt * tt;
    s.push_back({t, x0 + dist * std::cos(heading), y0 + dist * std::sin(heading), heading,
                 std::max(0.0, v0 - decel * t), 0.0});
  }
  return TrajectorySample(dt, s);
}

}  // namespace

TEST(MinAde, ExactModeIsZero) {
  const auto gt = straight_gt();
  const PredictionSet p("a", 0.0, 0.1, {shifted_mode(gt, 0.0, 1.0)});
  EXPECT_EQ(min_ade(p, gt, 1), 0.0);
  EXPECT_EQ(min_fde(p, gt, 1), 0.0);
}

TEST(MinAde, ConstantOffsets) {
  const auto gt = straight_gt();
  const PredictionSet p("a", 0.0, 0.1, {shifted_mode(gt, 1.0, 0.5), shifted_mode(gt, -2.0, 0.5)});
  EXPECT_DOUBLE_EQ(min_ade(p, gt, 2), 1.0);
  const PredictionSet q("a", 0.0, 0.1, {shifted_mode(gt, 2.0, 1.0)});
  EXPECT_DOUBLE_EQ(min_fde(q, gt, 1), 2.0);
}

TEST(MinFde, FinalStepOnly) {
  const auto gt = straight_gt();
  PredictionMode m = shifted_mode(gt, 3.0, 1.0);
  m.steps.back().mean_y = 0.0;
  const PredictionSet p("a", 0.0, 0.1, {m});
  EXPECT_EQ(min_fde(p, gt, 1), 0.0);
  EXPECT_GT(min_ade(p, gt, 1), 2.0);
}

TEST(MinNll, UnitGaussianAtMean) {
  const auto gt = straight_gt();
  const PredictionSet p("a", 0.0, 0.1, {shifted_mode(gt, 0.0, 1.0, 1.0)});
  EXPECT_NEAR(min_nll(p, gt, 1), std::log(2.0 * kPi), 1e-12);
  EXPECT_NEAR(gaussian_nll({0, 0, 1, 1, 0}, 0, 0), 1.8378770664093453, 1e-12);
}

TEST(MinNll, ShrinkingSigmaDecreases) {
  const auto gt = straight_gt();
  double prev = std::numeric_limits<double>::infinity();
  for (double sigma : {2.0, 1.0, 0.5, 0.25, 0.1}) {
    const PredictionSet p("a", 0.0, 0.1, {shifted_mode(gt, 0.0, 1.0, sigma)});
    const double v = min_nll(p, gt, 1);
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(GaussianNll, MatchesMatrixForm) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 500; ++i) {
    const GaussianStep g{u(rng) * 4 - 2, u(rng) * 4 - 2, 0.05 + 3 * u(rng), 0.05 + 3 * u(rng), 1.98 * (u(rng) - 0.5)};
    const double x = u(rng) * 6 - 3, y = u(rng) * 6 - 3;
    EXPECT_NEAR(gaussian_nll(g, x, y), oracle::bvn_nll(g, x, y), 1e-9 * std::max(1.0, oracle::bvn_nll(g, x, y)));
  }
}

TEST(MinMetrics, RandomSetsMatchBruteForce) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t modes = 1 + trial % 6;
    const auto p = build::random_prediction(rng, modes, 12);
    const auto gt = build::random_gt(rng, 12);
    const auto pos = build::positions(gt);
    for (std::size_t k = 1; k <= modes; ++k) {
      EXPECT_EQ(min_ade(p, gt, k), oracle::brute_min(p, pos, k, oracle::Metric::kAde));
      EXPECT_EQ(min_fde(p, gt, k), oracle::brute_min(p, pos, k, oracle::Metric::kFde));
      EXPECT_NEAR(min_nll(p, gt, k), oracle::brute_min(p, pos, k, oracle::Metric::kNll), 1e-9);
      if (k > 1) {
        EXPECT_LE(min_ade(p, gt, k), min_ade(p, gt, k - 1));
        EXPECT_LE(min_fde(p, gt, k), min_fde(p, gt, k - 1));
        EXPECT_LE(min_nll(p, gt, k), min_nll(p, gt, k - 1));
      }
    }
  }
}

TEST(MinMetrics, AlignmentErrors) {
  const auto gt = straight_gt(10);
  const PredictionSet p("a", 0.0, 0.1, {shifted_mode(gt, 0.0, 1.0)});
  EXPECT_THROW(min_ade(p, straight_gt(9), 1), AlignmentError);
  EXPECT_THROW(min_ade(p, gt, 2), AlignmentError);
  EXPECT_THROW(min_ade(p, gt, 0), AlignmentError);
  const PredictionSet late("a", 0.5, 0.1, {shifted_mode(gt, 0.0, 1.0)});
  EXPECT_THROW(min_fde(late, gt, 1), AlignmentError);
}

TEST(TemporalConsistency, DirectQuotient) {
  const GaussianStep g0{10.0, 0.0, 1, 1, 0};
  const GaussianStep g1{10.0, 1.0, 1, 1, 0};
  const PredictionSet a("x", 0.0, 0.1, {{1.0, {g0, g0, g0}}});
  const PredictionSet b("x", 0.1, 0.1, {{1.0, {g0, g1, g0}}});
  EXPECT_DOUBLE_EQ(temporal_consistency(a, b, 2.0), 0.5);
  // Velocity floor.
  EXPECT_DOUBLE_EQ(temporal_consistency(a, b, 0.1), 1.0 / kVelocityFloor);
  const PredictionSet c("x", 0.3, 0.1, {{1.0, {g0, g1, g0}}});
  EXPECT_THROW(temporal_consistency(a, c, 1.0), AlignmentError);
  const PredictionSet other("y", 0.1, 0.1, {{1.0, {g0, g1, g0}}});
  EXPECT_THROW(temporal_consistency(a, other, 1.0), AlignmentError);
}

TEST(TemporalConsistency, ConstantVelocityAgentIsZero) {
  const PredictorConfig cfg;
  for (int i = 0; i < 20; ++i) {
    const double t = i * 0.1;
    const TrajectorySample h0(0.1, {{t, 8.0 * t, 0.0, 0.0, 8.0, 0.0}});
    const TrajectorySample h1(0.1, {{t + 0.1, 8.0 * (t + 0.1), 0.0, 0.0, 8.0, 0.0}});
    const auto a = predict_constant_velocity("v", h0, cfg);
    const auto b = predict_constant_velocity("v", h1, cfg);
    EXPECT_NEAR(temporal_consistency(a, b, 8.0), 0.0, 1e-12);
  }
}

TEST(TemporalConsistency, BestMatchingNeverExceedsMostProbable) {
  const GaussianStep e0{0.0, 0.0, 1, 1, 0};
  const GaussianStep far{5.0, 0.0, 1, 1, 0};
  const GaussianStep near{0.0, 0.5, 1, 1, 0};
  const PredictionSet a("x", 0.0, 0.1, {{0.6, {e0, e0}}, {0.4, {e0, e0}}});
  const PredictionSet b("x", 0.1, 0.1, {{0.6, {far, far}}, {0.4, {near, near}}});
  EXPECT_DOUBLE_EQ(temporal_consistency(a, b, 1.0, kVelocityFloor, TcMode::kMostProbable), 5.0);
  EXPECT_DOUBLE_EQ(temporal_consistency(a, b, 1.0, kVelocityFloor, TcMode::kBestMatching), 0.5);
  EXPECT_GE(temporal_consistency(a, b, 1.0), 0.0);
}

TEST(DeltaTtcp, PerpendicularCrossing) {
  const auto a = build::line_log(-20.0, 0.0, 0.0, 10.0, 6.0);
  const auto b = build::line_log(0.0, -24.0, kPi / 2.0, 10.0, 6.0);
  const auto d = delta_ttcp_min(a, b);
  ASSERT_TRUE(d.has_value());
  EXPECT_NEAR(*d, 0.4, 1e-12);
  const auto swapped = delta_ttcp_min(b, a);
  ASSERT_TRUE(swapped.has_value());
  EXPECT_EQ(*d, *swapped);
}

TEST(DeltaTtcp, ParallelPathsHaveNoConflict) {
  const auto a = build::line_log(0.0, 0.0, 0.0, 10.0, 6.0);
  const auto b = build::line_log(0.0, 10.0, 0.0, 10.0, 6.0);
  EXPECT_FALSE(delta_ttcp_min(a, b).has_value());
  EXPECT_TRUE(conflict_points(a, b).empty());
}

TEST(DeltaTtcp, MergeCountsAsConflict) {
  // Second path converges onto the first within the merge threshold.
  std::vector<AgentState> s;
  for (int k = 0; k <= 60; ++k) {
    const double t = k * 0.1;
    const double y = std::max(0.0, 3.5 - 0.6 * t);
    s.push_back({t, 5.0 + 9.0 * t, y, y > 0.0 ? -0.066 : 0.0, 9.0, 0.0});
  }
  const TrajectorySample merging(0.1, s);
  const auto a = build::line_log(0.0, 0.0, 0.0, 10.0, 6.0);
  EXPECT_TRUE(delta_ttcp_min(a, merging).has_value());
}

TEST(DeltaTtcp, DeceleratingAgentMatchesOversampledEvaluation) {
  const double dt = 0.1;
  const auto a = braking_ray(-30.0, 0.0, 0.0, 10.0, 1.5, 8.0, dt);
  const auto b = build::line_log(0.0, -40.0, kPi / 2.0, 8.0, 8.0, dt);
  const auto d = delta_ttcp_min(a, b);
  ASSERT_TRUE(d.has_value());

  // Brute force on a 10x finer grid, conflict point at the origin.
  const double fine = dt / 10.0;
  double best = std::numeric_limits<double>::infinity();
  double max_jump = 0.0;
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (int k = 0; k <= 800; ++k) {
    const double t = k * fine;
    const double t_stop = 10.0 / 1.5;
    const double tt = std::min(t, t_stop);
    const double xa = -30.0 + 10.0 * tt - 0.75 * tt * tt;
    const double va = std::max(0.0, 10.0 - 1.5 * t);
    const double yb = -40.0 + 8.0 * t;
    if (xa >= 0.0 || yb >= 0.0 || va <= kVelocityFloor) {
      prev = std::numeric_limits<double>::quiet_NaN();
      continue;
    }
    const double v = std::abs(-xa / va - (-yb) / 8.0);
    best = std::min(best, v);
    if (!std::isnan(prev)) max_jump = std::max(max_jump, std::abs(v - prev));
    prev = v;
  }
  EXPECT_NEAR(*d, best, 10.0 * max_jump + 1e-9);
}

TEST(IsInteractive, ThresholdSemantics) {
  const Scenario cross = build::scenario(
      "cross", {build::track("c", build::line_log(60.0, -24.0 - 40.0, kPi / 2.0, 10.0, 15.0))}, 10.0);
  const auto d = scenario_delta_ttcp(cross);
  ASSERT_TRUE(d.has_value());
  EXPECT_TRUE(is_interactive(cross, 3.0));
  EXPECT_EQ(is_interactive(cross, 0.0), *d == 0.0);
  EXPECT_TRUE(is_interactive(cross, std::numeric_limits<double>::infinity()));

  const Scenario parallel =
      build::scenario("par", {build::track("p", build::line_log(10.0, 10.0, 0.0, 10.0, 15.0))}, 10.0);
  EXPECT_FALSE(is_interactive(parallel, 3.0));
  EXPECT_FALSE(is_interactive(parallel, std::numeric_limits<double>::infinity()));
}

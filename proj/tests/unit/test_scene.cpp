#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "loopbench/errors.hpp"
#include "loopbench/scene.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"

using namespace loopbench;

namespace {

TrajectorySample two_point(double x0, double x1, double h0 = 0.0, double h1 = 0.0) {
  return TrajectorySample(1.0, {{0.0, x0, 0.0, h0, 1.0, 0.0}, {1.0, x1, 0.0, h1, 3.0, 0.0}});
}

}  // namespace

TEST(Interpolate, LinearMidpoint) {
  const auto s = interpolate_state(two_point(0.0, 10.0), 0.5);
  EXPECT_DOUBLE_EQ(s.x, 5.0);
  EXPECT_DOUBLE_EQ(s.speed, 2.0);
}

TEST(Interpolate, ExactAtSampleTimes) {
  const auto log = build::line_log(1.0, 2.0, 0.3, 7.0, 2.0);
  for (std::size_t i = 0; i < log.size(); ++i) {
    const auto s = interpolate_state(log, log[i].t);
    EXPECT_EQ(s.x, log[i].x);
    EXPECT_EQ(s.y, log[i].y);
    EXPECT_EQ(s.heading, log[i].heading);
  }
}

TEST(Interpolate, HeadingWrapsAcrossCut) {
  const auto s = interpolate_state(two_point(0.0, 1.0, 3.1, -3.1), 0.5);
  EXPECT_NEAR(std::abs(s.heading), kPi, 1e-12);

  // Angle-space brute force: the heading path of least total rotation, sampled finely.
  const double total = std::remainder(-3.1 - 3.1, 2.0 * kPi);
  EXPECT_NEAR(total, 2.0 * kPi - 6.2, 1e-12);
  for (int i = 0; i <= 100; ++i) {
    const double f = i / 100.0;
    const double expected = std::remainder(3.1 + f * total, 2.0 * kPi);
    const double got = interpolate_state(two_point(0.0, 1.0, 3.1, -3.1), f).heading;
    EXPECT_NEAR(std::abs(angle_diff(got, expected)), 0.0, 1e-12) << f;
  }
}

TEST(Interpolate, OutOfRangeThrows) {
  EXPECT_THROW(interpolate_state(two_point(0.0, 1.0), 1.5), RangeError);
  EXPECT_THROW(interpolate_state(two_point(0.0, 1.0), -0.1), RangeError);
  EXPECT_NO_THROW(sample_clamped(two_point(0.0, 1.0), 7.0));
}

TEST(Interpolate, ContinuousBetweenSamples) {
  std::vector<AgentState> states;
  for (int k = 0; k < 20; ++k) states.push_back({k * 0.1, std::sin(k * 0.3), std::cos(k * 0.2), 0.1 * k, 2.0, 0.0});
  const TrajectorySample log(0.1, states);
  for (int k = 1; k < 19; ++k) {
    const double t = k * 0.1;
    const auto a = interpolate_state(log, t - 1e-9);
    const auto b = interpolate_state(log, t + 1e-9);
    EXPECT_NEAR(a.x, b.x, 1e-7);
    EXPECT_NEAR(a.y, b.y, 1e-7);
  }
}

TEST(TrajectorySample, RejectsBadInput) {
  EXPECT_THROW(TrajectorySample(0.1, {}), InvariantError);
  EXPECT_THROW(TrajectorySample(0.1, {{0.0, 0, 0, 0, 1, 0}, {0.15, 0, 0, 0, 1, 0}}), InvariantError);
  EXPECT_THROW(TrajectorySample(0.1, {{0.0, 0, 0, 0, -1, 0}}), InvariantError);
  const TrajectorySample wrapped(0.1, {{0.0, 0, 0, 4.0, 1, 0}});
  EXPECT_NEAR(wrapped[0].heading, 4.0 - 2.0 * kPi, 1e-12);
}

TEST(WrapAngle, Range) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3.0 * kPi + 0.1), -kPi + 0.1, 1e-12);
  EXPECT_NEAR(angle_diff(-3.1, 3.1), 2.0 * kPi - 6.2, 1e-12);
}

TEST(PredictionSet, Invariants) {
  const GaussianStep g{0, 0, 1, 1, 0};
  EXPECT_THROW(PredictionSet("a", 0, 0.1, {{0.5, {g}}, {0.4, {g}}}), InvariantError);
  EXPECT_THROW(PredictionSet("a", 0, 0.1, {{1.0, {{0, 0, 0.0, 1, 0}}}}), InvariantError);
  EXPECT_THROW(PredictionSet("a", 0, 0.1, {{1.0, {{0, 0, 1, 1, 1.0}}}}), InvariantError);
  EXPECT_THROW(PredictionSet("a", 0, 0.1, {{0.5, {g}}, {0.5, {g, g}}}), InvariantError);
  EXPECT_THROW(PredictionSet("a", 0, 0.1, {}), InvariantError);
  EXPECT_NO_THROW(PredictionSet("a", 0, 0.1, {{0.5 + 5e-10, {g}}, {0.5, {g}}}));
}

TEST(PredictionSet, TopKAndTies) {
  const GaussianStep g{0, 0, 1, 1, 0};
  const PredictionSet p("a", 0, 0.1, {{0.2, {g}}, {0.4, {g}}, {0.4, {g}}});
  EXPECT_EQ(p.most_probable(), 1u);
  EXPECT_EQ(p.top_k(3), (std::vector<std::size_t>{1, 2, 0}));
  const PredictionSet tie("a", 0, 0.1, {{0.5, {g}}, {0.5, {g}}});
  EXPECT_EQ(tie.most_probable(), 0u);
}

TEST(Frenet, OnPathPoints) {
  const MapModel map = build::straight_map(100.0, 3.0, 3.0, 10.0, 0.0);
  const auto [s, d] = frenet_project(map, 12.5, 0.0);
  EXPECT_NEAR(s, 12.5, 1e-12);
  EXPECT_NEAR(d, 0.0, 1e-12);
  const auto [s2, d2] = frenet_project(map, 5.0, 2.0);
  EXPECT_NEAR(s2, 5.0, 1e-12);
  EXPECT_NEAR(d2, 2.0, 1e-12);
}

TEST(Frenet, GridOnArc) {
  std::vector<ReferencePoint> ref;
  const double r = 40.0;
  for (int i = 0; i <= 60; ++i) {
    const double a = i * kPi / 120.0;
    ref.push_back({r * std::sin(a), r - r * std::cos(a), 10.0});
  }
  const MapModel map = make_corridor(ref, 3.0, 3.0);
  for (double s = 0.0; s <= map.length(); s += 0.1) {
    const Point2 p = map.position_at(s);
    const auto [ps, pd] = frenet_project(map, p.x, p.y);
    EXPECT_NEAR(ps, s, 1e-3);
    EXPECT_NEAR(pd, 0.0, 1e-3);
  }
}

TEST(Frenet, ArcMatchesDenseResampling) {
  std::vector<ReferencePoint> ref;
  std::vector<Point2> pts;
  const double r = 30.0;
  for (int i = 0; i <= 40; ++i) {
    const double a = i * kPi / 80.0;
    ref.push_back({r * std::sin(a), r - r * std::cos(a), 10.0});
    pts.push_back({ref.back().x, ref.back().y});
  }
  const MapModel map = make_corridor(ref, 3.0, 3.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 40; ++i) {
    const Point2 base = map.position_at(2.0 + u(rng) * (map.length() - 4.0));
    const double x = base.x + 6.0 * (u(rng) - 0.5);
    const double y = base.y + 6.0 * (u(rng) - 0.5);
    const auto [s, d] = frenet_project(map, x, y);
    const auto [os, od] = oracle::dense_project(pts, x, y);
    EXPECT_NEAR(s, os, 0.01);
    EXPECT_NEAR(d, od, 0.01);
  }
}

TEST(Frenet, FarPointAndEmptyMap) {
  const MapModel map = build::straight_map(100.0, 3.0, 3.0, 10.0, 0.0);
  EXPECT_THROW(frenet_project(map, 50.0, 60.0), ProjectionError);
  EXPECT_THROW(frenet_project(MapModel{}, 0.0, 0.0), ConfigError);
}

TEST(MapModel, HintedProjectionAgreesWithExhaustive) {
  const MapModel map = build::straight_map(200.0, 3.0, 3.0, 10.0, 0.0);
  std::size_t hint = 0;
  for (double x = 0.0; x < 200.0; x += 3.7) {
    const auto a = map.project(x, 1.0, hint);
    const auto b = map.project(x, 1.0);
    hint = a.segment;
    EXPECT_NEAR(a.s, b.s, 1e-9);
    EXPECT_NEAR(a.d, b.d, 1e-9);
  }
}

TEST(MapModel, RejectsBadGeometry) {
  std::vector<ReferencePoint> ref{{0, 0, 10}, {0, 0, 10}};
  EXPECT_THROW(make_corridor(ref, 2.0, 2.0), InvariantError);
  std::vector<ReferencePoint> ok{{0, 0, 10}, {10, 0, 10}};
  EXPECT_THROW(MapModel(ok, {{0, -1}, {10, -1}}, {{0, -2}, {10, -2}}), InvariantError);
}

TEST(Scenario, DurationMustDivide) {
  Scenario sc = build::scenario("s", {});
  sc.duration = 15.05;
  EXPECT_THROW(sc.validate(), InvariantError);
}

TEST(Scenario, ExtendToDuration) {
  AgentTrack t = build::track("a", build::line_log(0, 5, 0, 2.0, 5.0));
  EXPECT_TRUE(extend_to_duration(t, 15.0));
  EXPECT_NEAR(t.log.end_time(), 15.0, 1e-9);
  EXPECT_DOUBLE_EQ(t.log.back().x, 10.0);
  EXPECT_FALSE(extend_to_duration(t, 15.0));
}

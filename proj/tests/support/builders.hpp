#pragma once

// Small constructors for hand-built test worlds.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "loopbench/ocp.hpp"
#include "loopbench/scene.hpp"

namespace build {

inline loopbench::MapModel straight_map(double length = 400.0, double left = 5.25, double right = 1.75,
                                        double speed_limit = 13.9, double x0 = -50.0) {
  std::vector<loopbench::ReferencePoint> ref;
  for (double x = x0; x <= x0 + length + 1e-9; x += 5.0) ref.push_back({x, 0.0, speed_limit});
  return loopbench::make_corridor(ref, left, right);
}

inline loopbench::TrajectorySample line_log(double x0, double y0, double heading, double speed, double duration,
                                            double dt = 0.1) {
  std::vector<loopbench::AgentState> s;
  const int n = static_cast<int>(std::lround(duration / dt));
  for (int k = 0; k <= n; ++k) {
    const double t = k * dt;
    s.push_back({t, x0 + speed * t * std::cos(heading), y0 + speed * t * std::sin(heading), heading, speed, 0.0});
  }
  return loopbench::TrajectorySample(dt, std::move(s));
}

inline loopbench::AgentTrack track(std::string id, loopbench::TrajectorySample log,
                                   loopbench::AgentKind kind = loopbench::AgentKind::kVehicle, double length = 4.5,
                                   double width = 1.8) {
  return {{std::move(id), kind, length, width}, std::move(log), false};
}

inline loopbench::Scenario scenario(std::string name, std::vector<loopbench::AgentTrack> agents,
                                    double ego_speed = 10.0, double duration = 15.0) {
  loopbench::Scenario sc;
  sc.name = std::move(name);
  sc.sim_dt = 0.1;
  sc.duration = duration;
  sc.map = straight_map();
  sc.ego.init = {0.0, 0.0, 0.0, 0.0, ego_speed, 0.0};
  sc.ego.log = line_log(0.0, 0.0, 0.0, ego_speed, duration);
  sc.agents = std::move(agents);
  sc.validate();
  return sc;
}

// Random K-mode prediction with normalized probabilities and valid covariances.
inline loopbench::PredictionSet random_prediction(std::mt19937_64& rng, std::size_t modes, std::size_t horizon,
                                                  double dt = 0.1) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> w(modes);
  double total = 0.0;
  for (auto& x : w) total += (x = 0.05 + u(rng));
  std::vector<loopbench::PredictionMode> out(modes);
  for (std::size_t m = 0; m < modes; ++m) {
    out[m].prob = w[m] / total;
    double x = 20.0 * (u(rng) - 0.5), y = 20.0 * (u(rng) - 0.5);
    for (std::size_t k = 0; k < horizon; ++k) {
      x += 2.0 * (u(rng) - 0.3);
      y += 2.0 * (u(rng) - 0.5);
      out[m].steps.push_back({x, y, 0.1 + 2.0 * u(rng), 0.1 + 2.0 * u(rng), 1.8 * (u(rng) - 0.5)});
    }
  }
  // Renormalize exactly so the sum check cannot trip on rounding.
  double s = 0.0;
  for (std::size_t m = 0; m + 1 < modes; ++m) s += out[m].prob;
  out.back().prob = 1.0 - s;
  return loopbench::PredictionSet("agent", 0.0, dt, std::move(out));
}

inline loopbench::TrajectorySample random_gt(std::mt19937_64& rng, std::size_t horizon, double dt = 0.1) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<loopbench::AgentState> s;
  double x = 10.0 * (u(rng) - 0.5), y = 10.0 * (u(rng) - 0.5);
  for (std::size_t k = 1; k <= horizon; ++k) {
    x += 2.0 * u(rng);
    y += u(rng) - 0.5;
    s.push_back({static_cast<double>(k) * dt, x, y, 0.0, 1.0, 0.0});
  }
  return loopbench::TrajectorySample(dt, std::move(s));
}

inline std::vector<std::pair<double, double>> positions(const loopbench::TrajectorySample& t) {
  std::vector<std::pair<double, double>> out;
  for (const auto& s : t.states()) out.emplace_back(s.x, s.y);
  return out;
}

// Constant-velocity agent whose modes drift sideways by `offset` metres over
// the horizon. Modes are (probability, offset) pairs.
inline loopbench::AgentPrediction cv_agent(std::string id, double x, double y, double heading, double speed,
                                           const std::vector<std::pair<double, double>>& modes, double t0 = 0.0,
                                           std::size_t horizon = 60, double dt = 0.1, double sigma = 0.5) {
  const double c = std::cos(heading), s = std::sin(heading);
  std::vector<loopbench::PredictionMode> out;
  for (const auto& [prob, offset] : modes) {
    loopbench::PredictionMode m;
    m.prob = prob;
    for (std::size_t k = 1; k <= horizon; ++k) {
      const double along = speed * static_cast<double>(k) * dt;
      const double side = offset * static_cast<double>(k) / static_cast<double>(horizon);
      m.steps.push_back({x + along * c - side * s, y + along * s + side * c, sigma, sigma, 0.0});
    }
    out.push_back(std::move(m));
  }
  loopbench::AgentPrediction a{{id, loopbench::AgentKind::kVehicle, 4.5, 1.8},
                               {t0, x, y, heading, speed, 0.0},
                               loopbench::PredictionSet(id, t0, dt, std::move(out))};
  return a;
}

}  // namespace build

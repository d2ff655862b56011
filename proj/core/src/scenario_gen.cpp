#include "loopbench/scenario_gen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>

#include "loopbench/errors.hpp"
#include "loopbench/metrics.hpp"
#include "loopbench/random.hpp"

namespace loopbench {

namespace {

constexpr std::array<ScenarioTemplate, 5> kTemplates = {
    ScenarioTemplate::kLeadBrake, ScenarioTemplate::kCutIn, ScenarioTemplate::kMerge,
    ScenarioTemplate::kPedestrianCrossing, ScenarioTemplate::kUnprotectedCrossing};
constexpr std::array<std::string_view, 5> kTemplateNames = {"lead_brake", "cut_in", "merge", "pedestrian_crossing",
                                                            "unprotected_crossing"};

constexpr double kDt = 0.1;
constexpr double kDuration = 15.0;
constexpr double kEgoLength = 4.5;
constexpr double kEgoWidth = 1.8;
constexpr double kCarLength = 4.5;
constexpr double kCarWidth = 1.8;
constexpr double kPedSize = 0.6;
constexpr double kPedStart = -4.5;   // lateral start of the pedestrian walk
constexpr double kCrossStart = -30.0;
constexpr double kMergeStart = -6.0;
constexpr double kCutInDuration = 3.0;
constexpr double kMergeDuration = 4.0;

double smoothstep5(double u) {
  u = std::clamp(u, 0.0, 1.0);
  return u * u * u * (10.0 + u * (-15.0 + 6.0 * u));
}

// Constant speed v0 until t_change, then constant accel until v_final.
struct SpeedProfile {
  double v0;
  double t_change;
  double accel;
  double v_final;

  double distance(double t) const {
    if (t <= t_change || accel == 0.0) return v0 * t;
    const double ramp = std::max(0.0, (v_final - v0) / accel);
    const double tau = t - t_change;
    const double head = v0 * t_change;
    if (tau <= ramp) return head + v0 * tau + 0.5 * accel * tau * tau;
    return head + v0 * ramp + 0.5 * accel * ramp * ramp + v_final * (tau - ramp);
  }
};

// Samples a position function on the scenario grid. Speed and heading are the
// forward differences, so the log is consistent with its own positions.
AgentTrack make_track(std::string id, AgentKind kind, double length, double width,
                      const std::function<Point2(double)>& pos, double initial_heading) {
  const int n = static_cast<int>(std::llround(kDuration / kDt));
  std::vector<Point2> p(static_cast<std::size_t>(n) + 1);
  for (int k = 0; k <= n; ++k) p[static_cast<std::size_t>(k)] = pos(k * kDt);
  std::vector<AgentState> states(p.size());
  double heading = initial_heading;
  for (std::size_t k = 0; k < p.size(); ++k) {
    AgentState& s = states[k];
    s.t = static_cast<double>(k) * kDt;
    s.x = p[k].x;
    s.y = p[k].y;
    if (k + 1 < p.size()) {
      const double dx = p[k + 1].x - p[k].x;
      const double dy = p[k + 1].y - p[k].y;
      const double dist = std::hypot(dx, dy);
      s.speed = dist / kDt;
      if (dist > 1e-9) heading = std::atan2(dy, dx);
    } else {
      s.speed = states[k - 1].speed;
    }
    s.heading = heading;
  }
  fill_yaw_rates(states, kDt);
  return {{std::move(id), kind, length, width}, TrajectorySample(kDt, std::move(states)), false};
}

MapModel straight_corridor() {
  std::vector<ReferencePoint> ref;
  for (int i = 0; i <= 110; ++i) ref.push_back({-50.0 + 5.0 * i, 0.0, kRoadSpeedLimit});
  return make_corridor(ref, 1.5 * kLaneWidth, 0.5 * kLaneWidth + 0.5);
}

// Intelligent-driver-model follower along the reference (y = 0, heading 0).
// Crossing agents become a stop line while their passage overlaps the ego's.
TrajectorySample expert_log(const std::vector<AgentTrack>& agents, const std::vector<bool>& crossing, double v_desired) {
  constexpr double a_max = 1.5;
  constexpr double b = 2.0;
  constexpr double headway = 1.2;
  constexpr double s0 = 3.0;
  constexpr double stop_margin = 1.0;
  constexpr double yield_buffer = 1.0;  // s

  const int n = static_cast<int>(std::llround(kDuration / kDt));
  std::vector<AgentState> states;
  double x = 0.0;
  double v = v_desired;
  for (int k = 0; k <= n; ++k) {
    const double t = k * kDt;
    states.push_back({t, x, 0.0, 0.0, v, 0.0});
    double accel = a_max * (1.0 - std::pow(v / v_desired, 4.0));
    for (std::size_t i = 0; i < agents.size(); ++i) {
      const AgentState& a = agents[i].log[static_cast<std::size_t>(k)];
      const double la = agents[i].info.length;
      const double wa = agents[i].info.width;
      double gap = 0.0;
      double lead_speed = 0.0;
      if (crossing[i]) {
        const double front = x + 0.5 * kEgoLength;
        const double zone_start = a.x - 0.5 * wa;
        if (front >= zone_start) continue;  // committed
        const double vy = a.speed * std::sin(a.heading);
        const double band = 0.5 * kEgoWidth + 0.5 * la + 0.5;
        const double vv = std::max(v, 0.1);
        const double ego_in = (zone_start - front) / vv;
        const double ego_out = (a.x + 0.5 * wa - (x - 0.5 * kEgoLength)) / vv;
        double agent_in = 0.0;
        double agent_out = 0.0;
        if (std::abs(a.y) < band) {
          agent_out = vy > 1e-6 ? (band - a.y) / vy : 1e9;
        } else if (a.y < -band && vy > 1e-6) {
          agent_in = (-band - a.y) / vy;
          agent_out = (band - a.y) / vy;
        } else {
          continue;
        }
        if (agent_in - yield_buffer > ego_out || agent_out + yield_buffer < ego_in) continue;
        gap = std::max(0.1, zone_start - front - stop_margin);
      } else {
        if (std::abs(a.y) > 0.5 * (wa + kEgoWidth) + 0.3 || a.x <= x) continue;
        gap = std::max(0.1, a.x - x - 0.5 * (la + kEgoLength));
        lead_speed = a.speed * std::cos(a.heading);
      }
      const double s_star = s0 + std::max(0.0, v * headway + v * (v - lead_speed) / (2.0 * std::sqrt(a_max * b)));
      accel = std::min(accel, a_max * (1.0 - std::pow(v / v_desired, 4.0) - (s_star / gap) * (s_star / gap)));
    }
    accel = std::clamp(accel, -8.0, a_max);
    const double v_next = std::max(0.0, v + accel * kDt);
    x += v * kDt;
    v = v_next;
  }
  return TrajectorySample(kDt, std::move(states));
}

void require_positive(const char* what, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ParameterError(std::string(what) + " must be positive");
}

}  // namespace

std::string_view to_string(ScenarioTemplate t) { return kTemplateNames[static_cast<std::size_t>(t)]; }

std::span<const ScenarioTemplate> all_templates() { return kTemplates; }

ScenarioTemplate scenario_template_from_string(std::string_view name) {
  for (std::size_t i = 0; i < kTemplateNames.size(); ++i) {
    if (kTemplateNames[i] == name) return kTemplates[i];
  }
  std::string valid;
  for (auto n : kTemplateNames) valid += (valid.empty() ? "" : ", ") + std::string(n);
  throw ParameterError("unknown template '" + std::string(name) + "' (valid: " + valid + ")");
}

std::string scenario_name(ScenarioTemplate t, std::uint64_t seed) {
  return std::string(to_string(t)) + "_s" + std::to_string(seed);
}

Scenario generate_scenario(ScenarioTemplate tmpl, const TemplateParams& params, std::uint64_t seed) {
  Rng rng(hash_combine(seed, hash_string(to_string(tmpl))));
  // Every draw is made regardless of overrides so streams stay aligned.
  const double u_speed = rng.uniform();
  const double u_gap = rng.uniform();
  const double u_agent = rng.uniform();
  const double u_trigger = rng.uniform();
  const double u_decel = rng.uniform();
  const auto pick = [](const std::optional<double>& v, double lo, double hi, double u) {
    return v ? *v : lo + (hi - lo) * u;
  };

  const double v_e = pick(params.ego_speed, 9.0, 12.0, u_speed);
  require_positive("ego_speed", v_e);
  if (params.gap && (!(*params.gap >= 0.0) || !std::isfinite(*params.gap))) {
    throw ParameterError("gap must be non-negative");
  }

  Scenario sc;
  sc.name = scenario_name(tmpl, seed);
  sc.sim_dt = kDt;
  sc.duration = kDuration;
  sc.map = straight_corridor();
  sc.ego.init = {0.0, 0.0, 0.0, 0.0, v_e, 0.0};
  sc.ego.length = kEgoLength;
  sc.ego.width = kEgoWidth;
  sc.ego.wheelbase = 2.7;
  std::vector<bool> crossing;

  switch (tmpl) {
    case ScenarioTemplate::kLeadBrake: {
      const double gap = pick(params.gap, 12.0, 20.0, u_gap);
      const double v_a = pick(params.agent_speed, v_e, v_e, u_agent);
      const double t_b = pick(params.trigger_time, 2.0, 4.0, u_trigger);
      const double decel = pick(params.decel, 3.0, 5.0, u_decel);
      require_positive("agent_speed", v_a);
      require_positive("decel", decel);
      if (t_b < 0.0) throw ParameterError("trigger_time must be non-negative");
      const double x0 = gap + 0.5 * (kEgoLength + kCarLength);
      const SpeedProfile prof{v_a, t_b, -decel, 0.0};
      sc.agents.push_back(make_track("lead", AgentKind::kVehicle, kCarLength, kCarWidth,
                                     [=](double t) { return Point2{x0 + prof.distance(t), 0.0}; }, 0.0));
      crossing.push_back(false);
      break;
    }
    case ScenarioTemplate::kCutIn: {
      const double gap = pick(params.gap, 5.0, 12.0, u_gap);
      const double v_a = pick(params.agent_speed, v_e - 2.5, v_e - 1.0, u_agent);
      const double t_c = pick(params.trigger_time, 1.5, 3.0, u_trigger);
      require_positive("agent_speed", v_a);
      if (t_c < 0.0) throw ParameterError("trigger_time must be non-negative");
      const double x0 = gap + 0.5 * (kEgoLength + kCarLength);
      sc.agents.push_back(make_track(
          "cutter", AgentKind::kVehicle, kCarLength, kCarWidth,
          [=](double t) {
            return Point2{x0 + v_a * t, kLaneWidth * (1.0 - smoothstep5((t - t_c) / kCutInDuration))};
          },
          0.0));
      crossing.push_back(false);
      break;
    }
    case ScenarioTemplate::kMerge: {
      const double gap = pick(params.gap, 1.0, 6.0, u_gap);
      const double v_a = pick(params.agent_speed, v_e - 1.0, v_e + 1.0, u_agent);
      const double t_m = pick(params.trigger_time, 1.5, 3.0, u_trigger);
      require_positive("agent_speed", v_a);
      if (t_m < 0.0) throw ParameterError("trigger_time must be non-negative");
      const double x0 = gap + 0.5 * (kEgoLength + kCarLength);
      sc.agents.push_back(make_track(
          "merger", AgentKind::kVehicle, kCarLength, kCarWidth,
          [=](double t) {
            return Point2{x0 + v_a * t, kMergeStart * (1.0 - smoothstep5((t - t_m) / kMergeDuration))};
          },
          0.0));
      crossing.push_back(false);
      break;
    }
    case ScenarioTemplate::kPedestrianCrossing: {
      const double gap = pick(params.gap, 3.0, 9.0, u_gap);
      const double v_p = pick(params.agent_speed, 1.2, 1.6, u_agent);
      const double t_w = pick(params.trigger_time, 0.0, 1.0, u_trigger);
      require_positive("agent_speed", v_p);
      if (t_w < 0.0) throw ParameterError("trigger_time must be non-negative");
      const double x_c = v_e * (t_w - kPedStart / v_p) + gap;
      sc.agents.push_back(make_track(
          "pedestrian", AgentKind::kPedestrian, kPedSize, kPedSize,
          [=](double t) { return Point2{x_c, kPedStart + v_p * std::max(0.0, t - t_w)}; },
          0.5 * kPi));
      crossing.push_back(true);
      break;
    }
    case ScenarioTemplate::kUnprotectedCrossing: {
      const double gap = pick(params.gap, 3.0, 9.0, u_gap);
      const double v_a = pick(params.agent_speed, 7.0, 10.0, u_agent);
      require_positive("agent_speed", v_a);
      const double x_c = v_e * (-kCrossStart / v_a) + gap;
      sc.agents.push_back(make_track("crosser", AgentKind::kVehicle, kCarLength, kCarWidth,
                                     [=](double t) { return Point2{x_c, kCrossStart + v_a * t}; }, 0.5 * kPi));
      crossing.push_back(true);
      break;
    }
  }

  sc.ego.log = expert_log(sc.agents, crossing, v_e);
  sc.validate();
  return sc;
}

Scenario empty_road_scenario(double ego_speed) {
  require_positive("ego_speed", ego_speed);
  Scenario sc;
  sc.name = "empty_road";
  sc.sim_dt = kDt;
  sc.duration = kDuration;
  sc.map = straight_corridor();
  sc.ego.init = {0.0, 0.0, 0.0, 0.0, ego_speed, 0.0};
  sc.ego.length = kEgoLength;
  sc.ego.width = kEgoWidth;
  sc.ego.wheelbase = 2.7;
  sc.ego.log = expert_log({}, {}, ego_speed);
  sc.validate();
  return sc;
}

std::vector<Scenario> filter_interactive(const std::vector<Scenario>& scenarios, double threshold) {
  std::vector<Scenario> out;
  for (const auto& s : scenarios) {
    if (is_interactive(s, threshold)) out.push_back(s);
  }
  return out;
}

}  // namespace loopbench

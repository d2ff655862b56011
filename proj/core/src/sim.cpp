#include "loopbench/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <Eigen/Dense>

#include "loopbench/errors.hpp"
#include "loopbench/random.hpp"

namespace loopbench {

namespace {

constexpr double kMovingSpeed = 0.1;
constexpr double kMinLinearisationSpeed = 1.0;

using Vector5d = Eigen::Matrix<double, 5, 1>;
using Matrix5d = Eigen::Matrix<double, 5, 5>;

}  // namespace

void SimConfig::validate() const {
  if (!(sim_dt > 0.0)) throw ConfigError("sim_dt must be positive");
  if (replan_period < 1) throw ConfigError("replan_period must be >= 1");
  if (history_len < 1) throw ConfigError("history_len must be >= 1");
  if (lqr.horizon < 1) throw ConfigError("lqr horizon must be >= 1");
  if (!(lqr.r_accel > 0.0 && lqr.r_steer > 0.0)) throw ConfigError("lqr R weights must be positive");
  if (!(prediction_radius > 0.0)) throw ConfigError("prediction_radius must be positive");
  ego.validate();
}

std::vector<std::pair<AgentInfo, AgentState>> replay_agents(const Scenario& scenario, double t) {
  std::vector<std::pair<AgentInfo, AgentState>> out;
  out.reserve(scenario.agents.size());
  for (const auto& a : scenario.agents) out.emplace_back(a.info, interpolate_state(a.log, t));
  return out;
}

EgoState plan_state_at(const PlanResult& plan, double t) {
  const auto& s = plan.states;
  if (s.empty()) throw ConfigError("plan has no states");
  double u = (t - plan.t0) / plan.dt;
  const double r = std::round(u);
  if (std::abs(u - r) < 1e-9) u = r;
  u = std::clamp(u, 0.0, static_cast<double>(s.size() - 1));
  const auto i = static_cast<std::size_t>(std::floor(u));
  const double f = u - static_cast<double>(i);
  if (f == 0.0 || i + 1 >= s.size()) return s[std::min(i, s.size() - 1)];
  const EgoState& a = s[i];
  const EgoState& b = s[i + 1];
  const auto lerp = [f](double p, double q) { return p + f * (q - p); };
  return {lerp(a.x, b.x), lerp(a.y, b.y), lerp(a.heading, b.heading),
          lerp(a.v, b.v), lerp(a.a, b.a), lerp(a.delta, b.delta)};
}

TrackCommand lqr_track(const PlanResult& plan, const EgoState& ego, double t, const SimConfig& cfg) {
  const EgoModelParams& p = cfg.ego;
  const double dt = cfg.sim_dt;
  const EgoState ref = plan_state_at(plan, t);
  const EgoState ff = plan_state_at(plan, t + dt);

  // Error state (lateral, heading, speed, accel, steering); the inputs are the
  // jerk and steering rate the actuators can actually deliver in one step.
  const double c = std::cos(ref.heading);
  const double s = std::sin(ref.heading);
  Vector5d e;
  e << -s * (ego.x - ref.x) + c * (ego.y - ref.y), angle_diff(ego.heading, ref.heading), ego.v - ref.v,
      ego.a - ref.a, ego.delta - ref.delta;

  const double v = std::max(ref.v, kMinLinearisationSpeed);
  const double cd = std::cos(ref.delta);
  Matrix5d A = Matrix5d::Identity();
  A(0, 1) = v * dt;
  A(1, 4) = v / (p.wheelbase * cd * cd) * dt;
  A(2, 3) = dt;
  Eigen::Matrix<double, 5, 2> B = Eigen::Matrix<double, 5, 2>::Zero();
  B(3, 0) = dt;
  B(4, 1) = dt;
  Vector5d q;
  q << cfg.lqr.q_lateral, cfg.lqr.q_heading, cfg.lqr.q_speed, 0.0, 0.0;
  const Matrix5d Q = q.asDiagonal();
  const Eigen::Matrix2d R = Eigen::Vector2d(cfg.lqr.r_accel, cfg.lqr.r_steer).asDiagonal();

  Matrix5d P = Q;
  Eigen::Matrix<double, 2, 5> K = Eigen::Matrix<double, 2, 5>::Zero();
  for (int i = 0; i < cfg.lqr.horizon; ++i) {
    K = (R + B.transpose() * P * B).ldlt().solve(B.transpose() * P * A);
    P = Q + A.transpose() * P * (A - B * K);
    P = 0.5 * (P + P.transpose()).eval();
  }
  const Eigen::Vector2d rate = -K * e;
  const double accel = ff.a + e(3) + rate(0) * dt;
  const double steer = ff.delta + e(4) + rate(1) * dt;
  return {std::clamp(accel, p.a_min, p.a_max), std::clamp(steer, -p.delta_max, p.delta_max)};
}

EgoControl actuate(const EgoState& ego, const TrackCommand& cmd, double dt, const EgoModelParams& params) {
  return clamp_control({(cmd.accel - ego.a) / dt, (cmd.steer - ego.delta) / dt}, params);
}

Box ego_box(const EgoState& z, const EgoModelParams& params) {
  return {z.x, z.y, z.heading, params.length, params.width};
}

Box agent_box(const AgentState& s, const AgentInfo& info) { return {s.x, s.y, s.heading, info.length, info.width}; }

bool classify_at_fault(const EgoState& ego, const AgentState& agent, const Point2& contact) {
  if (!(ego.v > kMovingSpeed)) return false;
  const double ahead = (contact.x - ego.x) * std::cos(ego.heading) + (contact.y - ego.y) * std::sin(ego.heading);
  return ahead > 0.0 || agent.speed < kMovingSpeed;
}

bool is_offroad(const MapModel& map, const EgoState& ego, const EgoModelParams& params, double tolerance,
                std::size_t& hint) {
  bool off = false;
  for (const Point2& c : ego_box(ego, params).corners()) {
    const PathProjection pr = map.project(c.x, c.y, hint);
    const double left = map.segment_left_width(pr.segment);
    const double right = map.segment_right_width(pr.segment);
    if (pr.d > left + tolerance || -pr.d > right + tolerance || std::abs(pr.lag) > tolerance) off = true;
  }
  hint = map.project(ego.x, ego.y, hint).segment;
  return off;
}

TrajectorySample agent_history(const AgentTrack& track, double t, int history_len, double dt) {
  std::vector<AgentState> states;
  states.reserve(static_cast<std::size_t>(history_len) + 1);
  for (int i = history_len; i >= 0; --i) {
    const double ti = t - i * dt;
    if (ti < track.log.start_time() - 1e-9) continue;
    states.push_back(interpolate_state(track.log, std::max(ti, track.log.start_time())));
  }
  return TrajectorySample(dt, std::move(states));
}

SimTrace run_closed_loop(const Scenario& scenario, const PredictorSpec& predictor, const PlannerSpec& planner_spec,
                         const SimConfig& cfg_in) {
  scenario.validate();
  SimConfig cfg = cfg_in;
  cfg.sim_dt = scenario.sim_dt;
  cfg.ego.length = scenario.ego.length;
  cfg.ego.width = scenario.ego.width;
  cfg.ego.wheelbase = scenario.ego.wheelbase;
  cfg.validate();

  PredictorSpec pred = predictor;
  pred.config.degraded.seed =
      hash_combine(hash_combine(cfg.seed, predictor.config.degraded.seed), hash_string(scenario.name));
  pred.config.validate();

  Planner planner(planner_spec, cfg.ego);
  const int n = scenario.step_count();
  const double dt = scenario.sim_dt;

  SimTrace trace;
  trace.scenario = scenario.name;
  trace.dt = dt;
  trace.steps.reserve(static_cast<std::size_t>(n) + 1);

  const auto& init = scenario.ego.init;
  EgoState ego{init.x, init.y, init.heading, init.speed, 0.0, 0.0};
  std::optional<PlanResult> active;
  int plan_id = -1;
  std::vector<bool> in_contact(scenario.agents.size(), false);
  std::size_t road_hint = scenario.map.project(ego.x, ego.y).segment;

  for (int k = 0; k <= n; ++k) {
    const double t = k * dt;
    StepRecord rec;
    rec.t = t;
    rec.ego = ego;
    rec.agents.reserve(scenario.agents.size());
    for (const auto& a : scenario.agents) rec.agents.push_back(interpolate_state(a.log, t));

    const Box eb = ego_box(ego, cfg.ego);
    for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
      const Box ab = agent_box(rec.agents[i], scenario.agents[i].info);
      const auto contact = contact_point(eb, ab);
      if (contact && !in_contact[i]) {
        rec.collisions.push_back({scenario.agents[i].info.id, t, classify_at_fault(ego, rec.agents[i], *contact)});
      }
      in_contact[i] = contact.has_value();
    }
    rec.offroad = is_offroad(scenario.map, ego, cfg.ego, cfg.offroad_tolerance, road_hint);

    if (k == n) {
      rec.plan_id = plan_id;
      trace.steps.push_back(std::move(rec));
      break;
    }

    if (!trace.failed && k % cfg.replan_period == 0) {
      std::vector<AgentPrediction> inputs;
      for (std::size_t i = 0; i < scenario.agents.size(); ++i) {
        const AgentState& s = rec.agents[i];
        if (std::hypot(s.x - ego.x, s.y - ego.y) > cfg.prediction_radius) continue;
        const AgentTrack& track = scenario.agents[i];
        const TrajectorySample hist = agent_history(track, t, cfg.history_len, dt);
        PredictionContext ctx{scenario, track, hist, static_cast<std::uint64_t>(k), t};
        inputs.push_back({track.info, s, predict(pred, ctx)});
      }
      try {
        PlanResult plan = planner.plan(ego, scenario.map, inputs, t);
        rec.solve_time = plan.solve_time;
        rec.solver_iterations = plan.iterations;
        rec.branch_count = plan.branches.size();
        active = std::move(plan);
        ++plan_id;
        rec.replanned = true;
      } catch (const Error& e) {
        trace.failed = true;
        trace.failure_step = k;
        trace.failure_message = e.what();
        active.reset();
      }
      for (auto& in : inputs) rec.predictions.push_back(std::move(in.prediction));
    }

    EgoControl u{};
    if (active && !trace.failed) {
      const TrackCommand cmd = lqr_track(*active, ego, t, cfg);
      rec.accel_cmd = cmd.accel;
      rec.steer_cmd = cmd.steer;
      u = actuate(ego, cmd, dt, cfg.ego);
    }
    rec.applied = u;
    rec.plan_id = plan_id;
    trace.steps.push_back(std::move(rec));
    ego = bicycle_step(ego, u, dt, cfg.ego);
  }
  return trace;
}

}  // namespace loopbench

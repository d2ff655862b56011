#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "loopbench/geometry.hpp"
#include "loopbench/planner.hpp"
#include "loopbench/predictors.hpp"
#include "loopbench/scene.hpp"

namespace loopbench {

/// R weights act on jerk and steering rate: the regulator sees the actuator
/// states, so its corrections respect the rate limits.
struct LqrWeights {
  double q_lateral{8.0};
  double q_heading{4.0};
  double q_speed{1.0};
  double r_accel{1.0};
  double r_steer{0.3};
  int horizon{10};
};

struct SimConfig {
  double sim_dt{0.1};
  int replan_period{1};
  int history_len{10};
  LqrWeights lqr;
  std::uint64_t seed{0};
  double prediction_radius{50.0};
  double offroad_tolerance{0.3};
  EgoModelParams ego;

  void validate() const;
};

struct CollisionEvent {
  std::string agent_id;
  double t{0.0};
  bool at_fault{false};
};

struct StepRecord {
  double t{0.0};
  EgoState ego;
  EgoControl applied;       // jerk and steering rate integrated over [t, t + dt)
  double accel_cmd{0.0};    // LQR output before rate limiting
  double steer_cmd{0.0};
  int plan_id{-1};          // -1: no active plan
  bool replanned{false};
  std::vector<AgentState> agents;            // same order as Scenario::agents
  std::vector<PredictionSet> predictions;    // issued at this step
  std::vector<CollisionEvent> collisions;    // contact onsets at this step
  bool offroad{false};
  double solve_time{0.0};
  int solver_iterations{0};
  std::size_t branch_count{0};
};

struct SimTrace {
  std::string scenario;
  double dt{0.1};
  std::vector<StepRecord> steps;  // steps 0..N inclusive
  bool failed{false};
  int failure_step{-1};
  std::string failure_message;
};

/// Logged agent states at time t (exact at sample times).
std::vector<std::pair<AgentInfo, AgentState>> replay_agents(const Scenario& scenario, double t);

struct TrackCommand {
  double accel{0.0};
  double steer{0.0};
};

/// Time-matched plan state (linear interpolation on the plan grid).
EgoState plan_state_at(const PlanResult& plan, double t);

/// Finite-horizon discrete LQR on (lateral, heading, speed, accel, steering)
/// errors with exact feedforward of the plan's actuation at t + dt. Commands
/// are saturated.
TrackCommand lqr_track(const PlanResult& plan, const EgoState& ego, double t, const SimConfig& cfg);

/// Turns an (accel, steering) command into rate-limited bicycle controls.
EgoControl actuate(const EgoState& ego, const TrackCommand& cmd, double dt, const EgoModelParams& params);

Box ego_box(const EgoState& z, const EgoModelParams& params);
Box agent_box(const AgentState& s, const AgentInfo& info);

/// Decision rule on a detected contact; see README for the exact rule.
bool classify_at_fault(const EgoState& ego, const AgentState& agent, const Point2& contact);

/// True if any ego corner lies more than `tolerance` outside the corridor.
bool is_offroad(const MapModel& map, const EgoState& ego, const EgoModelParams& params, double tolerance,
                std::size_t& hint);

TrajectorySample agent_history(const AgentTrack& track, double t, int history_len, double dt);

SimTrace run_closed_loop(const Scenario& scenario, const PredictorSpec& predictor, const PlannerSpec& planner,
                         const SimConfig& cfg);

}  // namespace loopbench

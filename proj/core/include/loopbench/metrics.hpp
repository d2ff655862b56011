#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "loopbench/scene.hpp"
#include "loopbench/sim.hpp"

namespace loopbench {

inline constexpr double kVelocityFloor = 0.5;  // m/s

/// Ground truth must hold one state per prediction step, at t0 + (k + 1) * dt.
double min_ade(const PredictionSet& prediction, const TrajectorySample& gt, std::size_t k);
double min_fde(const PredictionSet& prediction, const TrajectorySample& gt, std::size_t k);
double min_nll(const PredictionSet& prediction, const TrajectorySample& gt, std::size_t k);

/// Negative log density of a bivariate normal at (x, y).
double gaussian_nll(const GaussianStep& g, double x, double y);

/// Which mode of the later prediction is compared with the earlier most
/// probable mode: its own most probable one, or the one closest at the endpoint.
enum class TcMode { kMostProbable, kBestMatching };

/// Endpoint displacement between the most probable mode of `pred_t` and the
/// selected mode of `pred_t1` (issued one step later), over max(v, v_floor).
double temporal_consistency(const PredictionSet& pred_t, const PredictionSet& pred_t1, double v,
                            double v_floor = kVelocityFloor, TcMode mode = TcMode::kMostProbable);

struct TtcpConfig {
  double merge_threshold{1.5};          // m
  double merge_heading{kPi / 6.0};      // rad
  double v_floor{kVelocityFloor};
};

/// Candidate conflict points of two paths: every polyline intersection plus
/// merge midpoints of near-parallel close approaches. Order independent.
std::vector<Point2> conflict_points(const TrajectorySample& a, const TrajectorySample& b, const TtcpConfig& cfg = {});

/// min over time and conflict points of |d_a / v_a - d_b / v_b| while both
/// approach the point faster than v_floor; nullopt without a conflict.
std::optional<double> delta_ttcp_min(const TrajectorySample& a, const TrajectorySample& b, const TtcpConfig& cfg = {});

/// Expert ego drive, or a constant-velocity stand-in when the scenario has none.
TrajectorySample ego_reference_log(const Scenario& scenario);

/// Minimum over agents of delta_ttcp_min against the ego log.
std::optional<double> scenario_delta_ttcp(const Scenario& scenario, const TtcpConfig& cfg = {});
bool is_interactive(const Scenario& scenario, double threshold = 3.0, const TtcpConfig& cfg = {});

struct OpenLoopMetrics {
  double min_ade_1{0.0};
  double min_ade_6{0.0};
  double min_fde_1{0.0};
  double min_fde_6{0.0};
  double min_nll_1{0.0};
  double min_nll_6{0.0};
  double tc{0.0};
  std::size_t samples{0};
  std::size_t tc_samples{0};
};

/// Averages over every in-simulation prediction whose horizon lies inside the log.
OpenLoopMetrics open_loop_metrics(const SimTrace& trace, const Scenario& scenario,
                                  TcMode tc_mode = TcMode::kMostProbable);

struct ComfortBounds {
  double jerk{8.37};
  double accel{4.89};
  double yaw_rate{0.95};
  double yaw_accel{1.93};
};

struct ScoreConfig {
  double w_ttc{5.0};
  double w_progress{5.0};
  double w_comfort{2.0};
  double ttc_threshold{0.95};
  double ttc_cap{5.0};
  double ttc_step{0.1};
  ComfortBounds comfort;
};

struct Comfort {
  double max_abs_jerk{0.0};
  double max_abs_accel{0.0};
  double max_abs_yaw_rate{0.0};
  double max_abs_yaw_accel{0.0};
  double mean_abs_jerk{0.0};
};

struct ClosedLoopMetrics {
  int collision_count{0};
  bool at_fault_collision{false};
  bool offroad{false};
  double progress_ratio{0.0};
  double ttc_min{0.0};
  double mean_speed{0.0};
  Comfort comfort;
  double comfort_score{0.0};
  double score{0.0};
};

/// Finite differences of executed speed and heading.
Comfort comfort_from_states(const std::vector<EgoState>& states, double dt);

/// Time until the constant-velocity boxes first overlap, capped.
double time_to_collision(const Box& ego, double ego_speed, const Box& agent, double agent_speed,
                         const ScoreConfig& cfg = {});

double composite_score(bool at_fault, bool offroad, double ttc_min, double progress_ratio, double comfort_score,
                       const ScoreConfig& cfg = {});
double comfort_score(const Comfort& c, const ComfortBounds& bounds);

/// Throws ConfigError on an empty trace.
ClosedLoopMetrics closed_loop_metrics(const SimTrace& trace, const Scenario& scenario, const ScoreConfig& cfg = {});

}  // namespace loopbench

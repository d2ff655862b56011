#pragma once

#include <cstddef>
#include <vector>

#include "loopbench/scene.hpp"
#include "loopbench/vehicle.hpp"

namespace loopbench {

struct OcpWeights {
  double w_contour{2.0};
  double w_lag{1.0};
  double w_progress{1.0};
  double w_jerk{0.1};
  double w_steer_rate{5.0};
  double w_potential{50.0};
  double w_speed_limit{10.0};
  double w_corridor{50.0};
  double sigma_long{1.0};  // m
  double sigma_lat{0.5};   // m
  int horizon{30};
  double dt{0.2};

  void validate() const;
};

struct SolverOptions {
  int max_iterations{50};
  double tolerance{1e-4};
  double mu_init{1e-3};
  double mu_max{1e8};
  int line_search_steps{12};
  /// Constant-deceleration profiles (m/s^2) tried as extra initial guesses.
  std::vector<double> braking_seeds{1.5, 3.0, 6.0};
};

/// One predicted agent mode resampled onto the plan grid. Entry k describes
/// plan step k + 1.
struct Obstacle {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> heading;
  std::vector<double> sigma_long;  // Gaussian spread along `heading`
  std::vector<double> sigma_lat;
  double length{4.5};
  double width{1.8};
  double weight{1.0};
  /// Obstacles of one branch sharing a group (modes of the same agent) are
  /// combined as sum(P^2) / sum(P); -1 stands alone.
  int group{-1};
};

struct PotentialShape {
  double sigma_long{1.0};
  double sigma_lat{0.5};
};

/// Value and derivatives of the potential field with respect to (x, y, heading).
struct PotentialEval {
  double value{0.0};
  double dx{0.0};
  double dy{0.0};
  double dheading{0.0};
};

/// Gaussian bump around a predicted agent position, expressed in that
/// agent's heading frame. Effective widths grow with the ego footprint seen
/// under the relative heading, the agent half-extents and the Gaussian spread.
PotentialEval potential_field(double ego_x, double ego_y, double ego_heading, double ego_length, double ego_width,
                              double agent_x, double agent_y, double agent_heading, double agent_length,
                              double agent_width, double gauss_sigma_long, double gauss_sigma_lat,
                              const PotentialShape& shape, double w);

/// Effective (long, lat) widths used by potential_field; exposed for tests.
std::pair<double, double> potential_sigmas(double relative_heading, double ego_length, double ego_width,
                                           double agent_length, double agent_width, double gauss_sigma_long,
                                           double gauss_sigma_lat, const PotentialShape& shape);

/// Standard deviation of a bivariate Gaussian along the unit direction (c, s).
double projected_sigma(const GaussianStep& g, double c, double s);

struct OcpBranch {
  double prob{1.0};
  std::vector<Obstacle> obstacles;
};

/// Branches share controls over [0, trunk_len). A single branch with
/// trunk_len == horizon is the plain MPCC problem.
struct OcpProblem {
  EgoState z0;
  const MapModel* map{nullptr};
  EgoModelParams params;
  OcpWeights weights;
  std::vector<OcpBranch> branches;
  int trunk_len{30};
  std::size_t path_hint{0};
};

enum class ModeSelector { kMostProbable, kAllModes };

struct AgentPrediction {
  AgentInfo info;
  AgentState current;
  PredictionSet prediction;
};

/// Resamples one mode onto the plan grid (times t0 + k * dt_plan, k = 1..N).
Obstacle make_obstacle(const AgentPrediction& agent, std::size_t mode, double t0, const OcpWeights& weights,
                       double weight = 1.0);

/// Throws ConfigError on an empty reference path.
OcpProblem assemble_ocp(const EgoState& ego, const MapModel& map, const std::vector<AgentPrediction>& predictions,
                        const OcpWeights& weights, const EgoModelParams& params, ModeSelector selector, double t0);

/// Per-stage cost and its Gauss-Newton quadratic model.
struct StageQuadratic {
  double value{0.0};
  StateVec lx{StateVec::Zero()};
  ControlVec lu{ControlVec::Zero()};
  StateMat lxx{StateMat::Zero()};
  Eigen::Matrix2d luu{Eigen::Matrix2d::Zero()};
};

/// State-dependent cost at plan step k (0..N) for one branch: contour, lag,
/// speed limit, corridor and potential terms; the progress reward is added at
/// k == N as -w_progress * s. `path_scale` multiplies the path terms and
/// `potential_scale` the potential terms. Updates `hint` with the projected
/// segment.
void state_cost(const OcpProblem& problem, const OcpBranch& branch, int k, const EgoState& z, double path_scale,
                double potential_scale, std::size_t& hint, StageQuadratic* out_quadratic, double& value);

/// Control cost w_jerk * j^2 + w_steer_rate * r^2.
double control_cost(const OcpWeights& w, const EgoControl& u, StageQuadratic* out_quadratic);

}  // namespace loopbench

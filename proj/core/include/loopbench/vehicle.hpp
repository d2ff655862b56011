#pragma once

#include <Eigen/Core>

namespace loopbench {

struct EgoModelParams {
  double wheelbase{2.7};
  double a_min{-6.0};
  double a_max{3.0};
  double delta_max{0.6};
  double steer_rate_max{0.7};
  double jerk_max{10.0};
  double length{4.5};
  double width{1.8};

  void validate() const;
};

struct EgoState {
  double x{0.0};
  double y{0.0};
  double heading{0.0};  // continuous, not wrapped
  double v{0.0};
  double a{0.0};
  double delta{0.0};
};

struct EgoControl {
  double jerk{0.0};
  double steer_rate{0.0};
};

using StateVec = Eigen::Matrix<double, 6, 1>;
using ControlVec = Eigen::Matrix<double, 2, 1>;
using StateMat = Eigen::Matrix<double, 6, 6>;
using ControlMat = Eigen::Matrix<double, 6, 2>;

StateVec to_vec(const EgoState& z);
EgoState from_vec(const StateVec& v);

/// Forward-Euler kinematic bicycle; speed clamped at 0, accel and steering
/// clamped to their bounds. At standstill the accel state cannot go negative.
EgoState bicycle_step(const EgoState& z, const EgoControl& u, double dt, const EgoModelParams& p);

/// Jacobians of bicycle_step. Clamped components get zero sensitivity.
void bicycle_jacobians(const EgoState& z, const EgoControl& u, double dt, const EgoModelParams& p, StateMat& A,
                       ControlMat& B);

EgoControl clamp_control(const EgoControl& u, const EgoModelParams& p);
EgoState clamp_state(const EgoState& z, const EgoModelParams& p);

}  // namespace loopbench

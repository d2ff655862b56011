#include "loopbench/vehicle.hpp"

#include <algorithm>
#include <cmath>

#include "loopbench/errors.hpp"

namespace loopbench {

void EgoModelParams::validate() const {
  if (!(wheelbase > 0.0)) throw ConfigError("wheelbase must be positive");
  if (!(a_min < 0.0 && a_max > 0.0)) throw ConfigError("accel bounds must satisfy a_min < 0 < a_max");
  if (!(delta_max > 0.0)) throw ConfigError("delta_max must be positive");
  if (!(steer_rate_max > 0.0 && jerk_max > 0.0)) throw ConfigError("rate bounds must be positive");
  if (!(length > 0.0 && width > 0.0)) throw ConfigError("ego geometry must be positive");
}

StateVec to_vec(const EgoState& z) {
  StateVec v;
  v << z.x, z.y, z.heading, z.v, z.a, z.delta;
  return v;
}

EgoState from_vec(const StateVec& v) { return {v(0), v(1), v(2), v(3), v(4), v(5)}; }

EgoState bicycle_step(const EgoState& z, const EgoControl& u, double dt, const EgoModelParams& p) {
  EgoState n;
  n.x = z.x + z.v * std::cos(z.heading) * dt;
  n.y = z.y + z.v * std::sin(z.heading) * dt;
  n.heading = z.heading + (z.v / p.wheelbase) * std::tan(z.delta) * dt;
  n.v = std::max(0.0, z.v + z.a * dt);
  // At standstill the brakes hold the car; deceleration does not accumulate.
  n.a = std::clamp(z.a + u.jerk * dt, n.v > 0.0 ? p.a_min : 0.0, p.a_max);
  n.delta = std::clamp(z.delta + u.steer_rate * dt, -p.delta_max, p.delta_max);
  return n;
}

void bicycle_jacobians(const EgoState& z, const EgoControl& u, double dt, const EgoModelParams& p, StateMat& A,
                       ControlMat& B) {
  const double c = std::cos(z.heading);
  const double s = std::sin(z.heading);
  const double t = std::tan(z.delta);
  A.setIdentity();
  B.setZero();
  A(0, 2) = -z.v * s * dt;
  A(0, 3) = c * dt;
  A(1, 2) = z.v * c * dt;
  A(1, 3) = s * dt;
  A(2, 3) = t / p.wheelbase * dt;
  A(2, 5) = z.v / p.wheelbase * (1.0 + t * t) * dt;

  // Derivatives are one-sided at the bounds, pointing into the feasible side.
  const bool moving = z.v + z.a * dt >= 0.0;
  if (moving) {
    A(3, 4) = dt;
  } else {
    A(3, 3) = 0.0;
  }
  const double a_next = z.a + u.jerk * dt;
  const double a_lo = z.v + z.a * dt > 0.0 ? p.a_min : 0.0;
  if (a_next >= a_lo && a_next < p.a_max) {
    B(4, 0) = dt;
  } else {
    A(4, 4) = 0.0;
  }
  const double d_next = z.delta + u.steer_rate * dt;
  if (d_next > -p.delta_max && d_next < p.delta_max) {
    B(5, 1) = dt;
  } else {
    A(5, 5) = 0.0;
  }
}

EgoControl clamp_control(const EgoControl& u, const EgoModelParams& p) {
  return {std::clamp(u.jerk, -p.jerk_max, p.jerk_max), std::clamp(u.steer_rate, -p.steer_rate_max, p.steer_rate_max)};
}

EgoState clamp_state(const EgoState& z, const EgoModelParams& p) {
  EgoState out = z;
  out.v = std::max(0.0, z.v);
  out.a = std::clamp(z.a, p.a_min, p.a_max);
  out.delta = std::clamp(z.delta, -p.delta_max, p.delta_max);
  return out;
}

}  // namespace loopbench

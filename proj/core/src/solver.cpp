#include "loopbench/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "loopbench/errors.hpp"

namespace loopbench {

namespace {

using GainMat = Eigen::Matrix<double, 2, 6>;

double prob_sum(const OcpProblem& p) {
  double s = 0.0;
  for (const auto& b : p.branches) s += b.prob;
  return s;
}

int trunk_len(const OcpProblem& p) {
  return p.branches.size() == 1 ? p.weights.horizon : std::clamp(p.trunk_len, 1, p.weights.horizon);
}

// Shared-trunk stage: every branch's terms at its own probability.
double trunk_node(const OcpProblem& p, int k, const EgoState& z, const EgoControl& u, std::size_t& hint,
                  StageQuadratic* q) {
  double value = 0.0;
  std::size_t out_hint = hint;
  for (const auto& br : p.branches) {
    std::size_t h = hint;
    state_cost(p, br, k, z, br.prob, br.prob, h, q, value);
    out_hint = h;
  }
  hint = out_hint;
  const double ps = prob_sum(p);
  StageQuadratic cq;
  value += ps * control_cost(p.weights, u, &cq);
  if (q != nullptr) {
    q->value += ps * cq.value;
    q->lu += ps * cq.lu;
    q->luu += ps * cq.luu;
  }
  return value;
}

double branch_node(const OcpProblem& p, std::size_t b, int k, const EgoState& z, const EgoControl* u,
                   std::size_t& hint, StageQuadratic* q) {
  const OcpBranch& br = p.branches[b];
  double value = 0.0;
  state_cost(p, br, k, z, br.prob, br.prob, hint, q, value);
  if (u != nullptr) {
    StageQuadratic cq;
    value += br.prob * control_cost(p.weights, *u, &cq);
    if (q != nullptr) {
      q->value += br.prob * cq.value;
      q->lu += br.prob * cq.lu;
      q->luu += br.prob * cq.luu;
    }
  }
  return value;
}

struct BoxQpResult {
  ControlVec x{ControlVec::Zero()};
  bool free[2]{true, true};
};

// Exact minimiser of 0.5 x'Hx + g'x over a 2-D box (H positive definite):
// the optimum is the interior stationary point or lies on one of the faces.
BoxQpResult solve_box_qp(const Eigen::Matrix2d& H, const ControlVec& g, const ControlVec& lo,
                         const ControlVec& hi) {
  constexpr double kEps = 1e-12;
  BoxQpResult best;
  const ControlVec interior = -H.ldlt().solve(g);
  if ((interior.array() >= lo.array() - kEps).all() && (interior.array() <= hi.array() + kEps).all()) {
    best.x = interior.cwiseMax(lo).cwiseMin(hi);
    return best;
  }
  const auto objective = [&](const ControlVec& x) { return 0.5 * x.dot(H * x) + g.dot(x); };
  double best_f = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 2; ++i) {
    const int j = 1 - i;
    for (double bound : {lo(i), hi(i)}) {
      ControlVec x;
      x(i) = bound;
      const double xj = -(g(j) + H(j, i) * bound) / H(j, j);
      x(j) = std::clamp(xj, lo(j), hi(j));
      const double f = objective(x);
      if (f < best_f) {
        best_f = f;
        best.x = x;
        best.free[i] = false;
        best.free[j] = x(j) > lo(j) && x(j) < hi(j);
      }
    }
  }
  return best;
}

struct Gains {
  std::vector<GainMat> K;
  std::vector<ControlVec> d;
};

struct Value {
  StateVec Vx{StateVec::Zero()};
  StateMat Vxx{StateMat::Zero()};
};

// One Riccati step; returns the expected cost change of the full step.
double backup(const StageQuadratic& l, const StateMat& A, const ControlMat& B, const Value& next,
              const EgoControl& u, const EgoModelParams& params, double mu, Value& out, GainMat& K,
              ControlVec& d) {
  const StateVec Qx = l.lx + A.transpose() * next.Vx;
  const ControlVec Qu = l.lu + B.transpose() * next.Vx;
  const StateMat Qxx = l.lxx + A.transpose() * next.Vxx * A;
  Eigen::Matrix2d Quu = l.luu + B.transpose() * next.Vxx * B;
  Quu = 0.5 * (Quu + Quu.transpose()).eval();
  Quu += mu * Eigen::Matrix2d::Identity();
  const GainMat Qux = B.transpose() * next.Vxx * A;

  const ControlVec lo(-params.jerk_max - u.jerk, -params.steer_rate_max - u.steer_rate);
  const ControlVec hi(params.jerk_max - u.jerk, params.steer_rate_max - u.steer_rate);
  const BoxQpResult qp = solve_box_qp(Quu, Qu, lo.cwiseMin(0.0), hi.cwiseMax(0.0));
  d = qp.x;
  K.setZero();
  if (qp.free[0] && qp.free[1]) {
    K = -Quu.ldlt().solve(Qux);
  } else {
    for (int i = 0; i < 2; ++i) {
      if (qp.free[i]) K.row(i) = -Qux.row(i) / Quu(i, i);
    }
  }
  out.Vx = Qx + K.transpose() * Quu * d + K.transpose() * Qu + Qux.transpose() * d;
  out.Vxx = Qxx + K.transpose() * Quu * K + K.transpose() * Qux + Qux.transpose() * K;
  out.Vxx = 0.5 * (out.Vxx + out.Vxx.transpose()).eval();
  return d.dot(Qu) + 0.5 * d.dot(Quu * d);
}

struct Iterate {
  ControlTree u;
  StateTree z;
  double cost{0.0};
};

Iterate make_iterate(const OcpProblem& p, ControlTree u) {
  Iterate it;
  it.z = rollout(p, u);
  it.u = std::move(u);
  it.cost = 0.0;
  const int ns = trunk_len(p);
  const int n = p.weights.horizon;
  std::size_t hint = p.path_hint;
  for (int k = 0; k < ns; ++k) {
    it.cost += trunk_node(p, k, it.z[0][static_cast<std::size_t>(k)], it.u[0][static_cast<std::size_t>(k)], hint,
                          nullptr);
  }
  for (std::size_t b = 0; b < p.branches.size(); ++b) {
    std::size_t h = hint;
    for (int k = ns; k <= n; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      it.cost += branch_node(p, b, k, it.z[b][kk], k < n ? &it.u[b][kk] : nullptr, h, nullptr);
    }
  }
  return it;
}

// Controls swallowed by the accel or steering clamps are replaced by the ones
// that produce the same rollout. The trajectory is unchanged, the control cost
// can only drop, and the solver no longer sits on a zero gradient at the bound.
Iterate project_iterate(const OcpProblem& p, Iterate it) {
  const int ns = trunk_len(p);
  const int n = p.weights.horizon;
  const double dt = p.weights.dt;
  bool changed = false;
  for (std::size_t b = 0; b < it.u.size(); ++b) {
    for (int k = 0; k < n; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const std::size_t src = k < ns ? 0 : b;
      const EgoState& z = it.z[src][kk];
      const EgoState& zn = it.z[src][kk + 1];
      EgoControl& u = it.u[b][kk];
      const double jerk = (zn.a - z.a) / dt;
      const double rate = (zn.delta - z.delta) / dt;
      if (std::abs(jerk) < std::abs(u.jerk) - 1e-9) {
        u.jerk = jerk;
        changed = true;
      }
      if (std::abs(rate) < std::abs(u.steer_rate) - 1e-9) {
        u.steer_rate = rate;
        changed = true;
      }
    }
  }
  return changed ? make_iterate(p, std::move(it.u)) : it;
}

// Backward pass over the tree; returns the total expected change.
double backward(const OcpProblem& p, const Iterate& it, double mu, std::vector<Gains>& gains) {
  const int ns = trunk_len(p);
  const int n = p.weights.horizon;
  const std::size_t nb = p.branches.size();
  gains.assign(nb + 1, Gains{});
  double expected = 0.0;

  // Hints along the trunk, needed to start each branch's projection walk.
  std::vector<std::size_t> trunk_hints(static_cast<std::size_t>(ns) + 1);
  std::size_t hint = p.path_hint;
  std::vector<StageQuadratic> trunk_q(static_cast<std::size_t>(ns));
  for (int k = 0; k < ns; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    trunk_hints[kk] = hint;
    trunk_node(p, k, it.z[0][kk], it.u[0][kk], hint, &trunk_q[kk]);
  }
  trunk_hints[static_cast<std::size_t>(ns)] = hint;

  Value at_fork;
  for (std::size_t b = 0; b < nb; ++b) {
    auto& g = gains[b + 1];
    g.K.resize(static_cast<std::size_t>(n));
    g.d.resize(static_cast<std::size_t>(n));
    std::vector<StageQuadratic> q(static_cast<std::size_t>(n - ns + 1));
    std::size_t h = trunk_hints[static_cast<std::size_t>(ns)];
    for (int k = ns; k <= n; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      branch_node(p, b, k, it.z[b][kk], k < n ? &it.u[b][kk] : nullptr, h, &q[kk - static_cast<std::size_t>(ns)]);
    }
    Value v;
    v.Vx = q.back().lx;
    v.Vxx = q.back().lxx;
    for (int k = n - 1; k >= ns; --k) {
      const auto kk = static_cast<std::size_t>(k);
      StateMat A;
      ControlMat B;
      bicycle_jacobians(it.z[b][kk], it.u[b][kk], p.weights.dt, p.params, A, B);
      Value nv;
      expected += backup(q[kk - static_cast<std::size_t>(ns)], A, B, v, it.u[b][kk], p.params, mu, nv, g.K[kk], g.d[kk]);
      v = nv;
    }
    at_fork.Vx += v.Vx;
    at_fork.Vxx += v.Vxx;
  }

  auto& tg = gains[0];
  tg.K.resize(static_cast<std::size_t>(ns));
  tg.d.resize(static_cast<std::size_t>(ns));
  Value v = at_fork;
  for (int k = ns - 1; k >= 0; --k) {
    const auto kk = static_cast<std::size_t>(k);
    StateMat A;
    ControlMat B;
    bicycle_jacobians(it.z[0][kk], it.u[0][kk], p.weights.dt, p.params, A, B);
    Value nv;
    expected += backup(trunk_q[kk], A, B, v, it.u[0][kk], p.params, mu, nv, tg.K[kk], tg.d[kk]);
    v = nv;
  }
  return expected;
}

EgoControl apply_gain(const EgoControl& u, const GainMat& K, const ControlVec& d, double alpha, const EgoState& z_new,
                      const EgoState& z_old, const EgoModelParams& params) {
  StateVec dz = to_vec(z_new) - to_vec(z_old);
  const ControlVec du = alpha * d + K * dz;
  return clamp_control({u.jerk + du(0), u.steer_rate + du(1)}, params);
}

ControlTree forward(const OcpProblem& p, const Iterate& it, const std::vector<Gains>& gains, double alpha) {
  const int ns = trunk_len(p);
  const int n = p.weights.horizon;
  const std::size_t nb = p.branches.size();
  ControlTree u(nb, std::vector<EgoControl>(static_cast<std::size_t>(n)));
  EgoState z = p.z0;
  for (int k = 0; k < ns; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    const EgoControl uk = apply_gain(it.u[0][kk], gains[0].K[kk], gains[0].d[kk], alpha, z, it.z[0][kk], p.params);
    for (std::size_t b = 0; b < nb; ++b) u[b][kk] = uk;
    z = bicycle_step(z, uk, p.weights.dt, p.params);
  }
  const EgoState fork = z;
  for (std::size_t b = 0; b < nb; ++b) {
    z = fork;
    for (int k = ns; k < n; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      const EgoControl uk =
          apply_gain(it.u[b][kk], gains[b + 1].K[kk], gains[b + 1].d[kk], alpha, z, it.z[b][kk], p.params);
      u[b][kk] = uk;
      z = bicycle_step(z, uk, p.weights.dt, p.params);
    }
  }
  return u;
}

// Jerk that drives the acceleration to -decel as fast as the bounds allow.
std::vector<EgoControl> braking_profile(const OcpProblem& p, double decel) {
  std::vector<EgoControl> u(static_cast<std::size_t>(p.weights.horizon));
  EgoState z = p.z0;
  const double target = std::max(-std::abs(decel), p.params.a_min);
  for (auto& c : u) {
    c.jerk = std::clamp((target - z.a) / p.weights.dt, -p.params.jerk_max, p.params.jerk_max);
    z = bicycle_step(z, c, p.weights.dt, p.params);
  }
  return u;
}

void check_problem(const OcpProblem& p) {
  if (p.map == nullptr || p.map->empty()) throw ConfigError("OCP has no reference path");
  if (p.branches.empty()) throw ConfigError("OCP has no branches");
  p.weights.validate();
}

void check_finite(const OcpProblem& p, double cost) {
  if (std::isfinite(cost)) return;
  std::ostringstream msg;
  msg << "non-finite OCP cost (" << cost << ") at initial state x=" << p.z0.x << " y=" << p.z0.y
      << " heading=" << p.z0.heading << " v=" << p.z0.v << " a=" << p.z0.a << " delta=" << p.z0.delta;
  throw NumericalError(msg.str());
}

}  // namespace

ControlTree make_tree(const OcpProblem& problem, const std::vector<EgoControl>& controls) {
  const auto n = static_cast<std::size_t>(problem.weights.horizon);
  std::vector<EgoControl> base(n);
  for (std::size_t k = 0; k < n; ++k) {
    base[k] = k < controls.size() ? controls[k] : (controls.empty() ? EgoControl{} : controls.back());
    base[k] = clamp_control(base[k], problem.params);
  }
  return ControlTree(problem.branches.size(), base);
}

StateTree rollout(const OcpProblem& p, const ControlTree& controls) {
  const int ns = trunk_len(p);
  const int n = p.weights.horizon;
  const std::size_t nb = p.branches.size();
  StateTree z(nb, std::vector<EgoState>(static_cast<std::size_t>(n) + 1));
  EgoState s = p.z0;
  for (int k = 0; k <= ns; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    for (std::size_t b = 0; b < nb; ++b) z[b][kk] = s;
    if (k < ns) s = bicycle_step(s, controls[0][kk], p.weights.dt, p.params);
  }
  for (std::size_t b = 0; b < nb; ++b) {
    for (int k = ns; k < n; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      z[b][kk + 1] = bicycle_step(z[b][kk], controls[b][kk], p.weights.dt, p.params);
    }
  }
  return z;
}

double evaluate_cost(const OcpProblem& problem, const ControlTree& controls) {
  check_problem(problem);
  return make_iterate(problem, controls).cost;
}

std::vector<std::vector<ControlVec>> cost_gradient(const OcpProblem& p, const ControlTree& controls) {
  check_problem(p);
  const int ns = trunk_len(p);
  const int n = p.weights.horizon;
  const std::size_t nb = p.branches.size();
  const StateTree z = rollout(p, controls);
  std::vector<std::vector<ControlVec>> grad(nb, std::vector<ControlVec>(static_cast<std::size_t>(n)));

  std::size_t hint = p.path_hint;
  std::vector<StageQuadratic> trunk_q(static_cast<std::size_t>(ns));
  for (int k = 0; k < ns; ++k) {
    const auto kk = static_cast<std::size_t>(k);
    trunk_node(p, k, z[0][kk], controls[0][kk], hint, &trunk_q[kk]);
  }
  StateVec lambda_fork = StateVec::Zero();
  for (std::size_t b = 0; b < nb; ++b) {
    std::vector<StageQuadratic> q(static_cast<std::size_t>(n - ns + 1));
    std::size_t h = hint;
    for (int k = ns; k <= n; ++k) {
      const auto kk = static_cast<std::size_t>(k);
      branch_node(p, b, k, z[b][kk], k < n ? &controls[b][kk] : nullptr, h, &q[kk - static_cast<std::size_t>(ns)]);
    }
    StateVec lambda = q.back().lx;
    for (int k = n - 1; k >= ns; --k) {
      const auto kk = static_cast<std::size_t>(k);
      StateMat A;
      ControlMat B;
      bicycle_jacobians(z[b][kk], controls[b][kk], p.weights.dt, p.params, A, B);
      const auto& l = q[kk - static_cast<std::size_t>(ns)];
      grad[b][kk] = l.lu + B.transpose() * lambda;
      lambda = l.lx + A.transpose() * lambda;
    }
    lambda_fork += lambda;
  }
  StateVec lambda = lambda_fork;
  for (int k = ns - 1; k >= 0; --k) {
    const auto kk = static_cast<std::size_t>(k);
    StateMat A;
    ControlMat B;
    bicycle_jacobians(z[0][kk], controls[0][kk], p.weights.dt, p.params, A, B);
    const ControlVec g = trunk_q[kk].lu + B.transpose() * lambda;
    for (std::size_t b = 0; b < nb; ++b) grad[b][kk] = g;
    lambda = trunk_q[kk].lx + A.transpose() * lambda;
  }
  return grad;
}

namespace {

struct Descent {
  Iterate it;
  std::vector<double> history;
  int iterations{0};
  bool converged{false};
};

Descent descend(const OcpProblem& problem, Iterate start, const SolverOptions& options) {
  Descent d;
  d.it = std::move(start);
  d.history.push_back(d.it.cost);
  double mu = options.mu_init;
  std::vector<Gains> gains;
  while (d.iterations < options.max_iterations) {
    ++d.iterations;
    const double expected = backward(problem, d.it, mu, gains);
    if (-expected < options.tolerance) {
      d.converged = true;
      break;
    }
    bool accepted = false;
    double alpha = 1.0;
    for (int ls = 0; ls < options.line_search_steps; ++ls, alpha *= 0.5) {
      Iterate cand = make_iterate(problem, forward(problem, d.it, gains, alpha));
      if (std::isfinite(cand.cost) && cand.cost < d.it.cost) {
        const double before = d.it.cost;
        d.it = project_iterate(problem, std::move(cand));
        d.history.push_back(d.it.cost);
        accepted = true;
        d.converged = before - d.it.cost < options.tolerance;
        break;
      }
    }
    if (accepted) {
      if (d.converged) break;
      mu = std::max(mu * 0.25, 1e-8);
    } else {
      mu *= 10.0;
      if (mu > options.mu_max) {
        d.converged = true;
        break;
      }
    }
  }
  return d;
}

}  // namespace

PlanResult solve_ocp(const OcpProblem& problem, const std::optional<ControlTree>& warm_start,
                     const SolverOptions& options) {
  check_problem(problem);
  const auto start = std::chrono::steady_clock::now();
  const int n = problem.weights.horizon;
  const int ns = trunk_len(problem);
  const std::size_t nb = problem.branches.size();

  // Cold start: the cheaper of coasting and the braking profiles.
  Iterate cold = make_iterate(problem, ControlTree(nb, std::vector<EgoControl>(static_cast<std::size_t>(n))));
  check_finite(problem, cold.cost);
  for (double decel : options.braking_seeds) {
    Iterate seed = make_iterate(problem, make_tree(problem, braking_profile(problem, decel)));
    check_finite(problem, seed.cost);
    if (seed.cost < cold.cost) cold = std::move(seed);
  }
  Descent best = descend(problem, std::move(cold), options);

  // The shifted previous plan is descended separately; following it alone can
  // leave the ego creeping in a basin the cold start escapes.
  if (warm_start && !warm_start->empty()) {
    ControlTree w(nb);
    for (std::size_t b = 0; b < nb; ++b) {
      const auto& src = (*warm_start)[std::min(b, warm_start->size() - 1)];
      w[b].resize(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k) {
        const auto kk = static_cast<std::size_t>(k);
        // The trunk always comes from the first warm-start branch.
        const auto& seq = k < ns ? (*warm_start)[0] : src;
        const EgoControl raw = kk < seq.size() ? seq[kk] : (seq.empty() ? EgoControl{} : seq.back());
        w[b][kk] = clamp_control(raw, problem.params);
      }
    }
    Iterate warm = project_iterate(problem, make_iterate(problem, std::move(w)));
    check_finite(problem, warm.cost);
    Descent other = descend(problem, std::move(warm), options);
    other.iterations += best.iterations;
    if (other.it.cost <= best.it.cost) {
      best = std::move(other);
    } else {
      best.iterations = other.iterations;
    }
  }

  PlanResult result;
  result.dt = problem.weights.dt;
  result.converged = best.converged;
  result.iterations = best.iterations;
  result.cost = best.it.cost;
  result.cost_history = std::move(best.history);
  result.trunk_len = ns;
  std::size_t main = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    result.branches.push_back({problem.branches[b].prob, best.it.z[b], best.it.u[b]});
    if (problem.branches[b].prob > problem.branches[main].prob) main = b;
  }
  result.states = best.it.z[main];
  result.controls = best.it.u[main];
  result.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace loopbench

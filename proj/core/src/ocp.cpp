#include "loopbench/ocp.hpp"

#include <algorithm>
#include <cmath>

#include "loopbench/errors.hpp"

namespace loopbench {

namespace {

constexpr double kMinHeadingDisplacement = 1e-3;

struct Sample {
  double x;
  double y;
  GaussianStep g;
};

// Position u on the prediction index axis; u = -1 is the agent's current state.
Sample sample_mode(const AgentPrediction& agent, const PredictionMode& mode, double u) {
  const double last = static_cast<double>(mode.steps.size() - 1);
  u = std::clamp(u, -1.0, last);
  const auto at = [&](long i) -> Sample {
    if (i < 0) {
      GaussianStep g = mode.steps.front();
      g.mean_x = agent.current.x;
      g.mean_y = agent.current.y;
      return {agent.current.x, agent.current.y, g};
    }
    const GaussianStep& g = mode.steps[static_cast<std::size_t>(i)];
    return {g.mean_x, g.mean_y, g};
  };
  const double fl = std::floor(u);
  const double f = u - fl;
  const long i = static_cast<long>(fl);
  Sample a = at(i);
  if (f < 1e-9) return a;
  const Sample b = at(i + 1);
  const auto lerp = [f](double p, double q) { return p + f * (q - p); };
  a.x = lerp(a.x, b.x);
  a.y = lerp(a.y, b.y);
  a.g.mean_x = a.x;
  a.g.mean_y = a.y;
  a.g.sigma_x = lerp(a.g.sigma_x, b.g.sigma_x);
  a.g.sigma_y = lerp(a.g.sigma_y, b.g.sigma_y);
  a.g.rho = lerp(a.g.rho, b.g.rho);
  return a;
}

}  // namespace

void OcpWeights::validate() const {
  for (double w : {w_contour, w_lag, w_progress, w_jerk, w_steer_rate, w_potential, w_speed_limit, w_corridor}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("OCP weights must be finite and non-negative");
  }
  if (!(sigma_long > 0.0 && sigma_lat > 0.0)) throw ConfigError("potential field sigmas must be positive");
  if (horizon < 2) throw ConfigError("planner horizon must be >= 2");
  if (!(dt > 0.0)) throw ConfigError("planner dt must be positive");
}

double projected_sigma(const GaussianStep& g, double c, double s) {
  const double var = c * c * g.sigma_x * g.sigma_x + 2.0 * g.rho * g.sigma_x * g.sigma_y * c * s +
                     s * s * g.sigma_y * g.sigma_y;
  return std::sqrt(std::max(var, 0.0));
}

std::pair<double, double> potential_sigmas(double relative_heading, double ego_length, double ego_width,
                                           double agent_length, double agent_width, double gauss_sigma_long,
                                           double gauss_sigma_lat, const PotentialShape& shape) {
  const double c = std::cos(relative_heading);
  const double s = std::sin(relative_heading);
  const double ext_long = 0.5 * std::hypot(ego_length * c, ego_width * s);
  const double ext_lat = 0.5 * std::hypot(ego_length * s, ego_width * c);
  return {shape.sigma_long + ext_long + 0.5 * agent_length + gauss_sigma_long,
          shape.sigma_lat + ext_lat + 0.5 * agent_width + gauss_sigma_lat};
}

PotentialEval potential_field(double ego_x, double ego_y, double ego_heading, double ego_length, double ego_width,
                              double agent_x, double agent_y, double agent_heading, double agent_length,
                              double agent_width, double gauss_sigma_long, double gauss_sigma_lat,
                              const PotentialShape& shape, double w) {
  const double ca = std::cos(agent_heading);
  const double sa = std::sin(agent_heading);
  const double ex = ego_x - agent_x;
  const double ey = ego_y - agent_y;
  const double dl = ca * ex + sa * ey;
  const double dt = -sa * ex + ca * ey;

  const double phi = ego_heading - agent_heading;
  const double cp = std::cos(phi);
  const double sp = std::sin(phi);
  const double hl = std::hypot(ego_length * cp, ego_width * sp);
  const double ht = std::hypot(ego_length * sp, ego_width * cp);
  const double sig_l = shape.sigma_long + 0.5 * hl + 0.5 * agent_length + gauss_sigma_long;
  const double sig_t = shape.sigma_lat + 0.5 * ht + 0.5 * agent_width + gauss_sigma_lat;
  const double dsig_l = 0.5 * (ego_width * ego_width - ego_length * ego_length) * sp * cp / hl;
  const double dsig_t = 0.5 * (ego_length * ego_length - ego_width * ego_width) * sp * cp / ht;

  const double il2 = 1.0 / (sig_l * sig_l);
  const double it2 = 1.0 / (sig_t * sig_t);
  const double q = dl * dl * il2 + dt * dt * it2;

  PotentialEval out;
  out.value = w * std::exp(-0.5 * q);
  const double qx = 2.0 * dl * ca * il2 - 2.0 * dt * sa * it2;
  const double qy = 2.0 * dl * sa * il2 + 2.0 * dt * ca * it2;
  const double qh = -2.0 * dl * dl * il2 / sig_l * dsig_l - 2.0 * dt * dt * it2 / sig_t * dsig_t;
  out.dx = -0.5 * out.value * qx;
  out.dy = -0.5 * out.value * qy;
  out.dheading = -0.5 * out.value * qh;
  return out;
}

Obstacle make_obstacle(const AgentPrediction& agent, std::size_t mode_index, double t0, const OcpWeights& weights,
                       double weight) {
  const PredictionSet& pred = agent.prediction;
  const PredictionMode& mode = pred.mode(mode_index);
  const auto n = static_cast<std::size_t>(weights.horizon);
  Obstacle ob;
  ob.length = agent.info.length;
  ob.width = agent.info.width;
  ob.weight = weight;
  ob.x.resize(n);
  ob.y.resize(n);
  ob.heading.resize(n);
  ob.sigma_long.resize(n);
  ob.sigma_lat.resize(n);
  std::vector<GaussianStep> gs(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = t0 + static_cast<double>(k + 1) * weights.dt;
    double u = (t - pred.t0()) / pred.dt() - 1.0;
    const double ur = std::round(u);
    if (std::abs(u - ur) < 1e-9) u = ur;
    const Sample smp = sample_mode(agent, mode, u);
    ob.x[k] = smp.x;
    ob.y[k] = smp.y;
    gs[k] = smp.g;
  }
  double prev_heading = agent.current.heading;
  double prev_x = agent.current.x;
  double prev_y = agent.current.y;
  for (std::size_t k = 0; k < n; ++k) {
    double dx = ob.x[k] - prev_x;
    double dy = ob.y[k] - prev_y;
    if (std::hypot(dx, dy) < kMinHeadingDisplacement && k + 1 < n) {
      dx = ob.x[k + 1] - ob.x[k];
      dy = ob.y[k + 1] - ob.y[k];
    }
    const double h = std::hypot(dx, dy) >= kMinHeadingDisplacement ? std::atan2(dy, dx) : prev_heading;
    ob.heading[k] = h;
    prev_heading = h;
    prev_x = ob.x[k];
    prev_y = ob.y[k];
    const double c = std::cos(h);
    const double s = std::sin(h);
    ob.sigma_long[k] = projected_sigma(gs[k], c, s);
    ob.sigma_lat[k] = projected_sigma(gs[k], -s, c);
  }
  return ob;
}

OcpProblem assemble_ocp(const EgoState& ego, const MapModel& map, const std::vector<AgentPrediction>& predictions,
                        const OcpWeights& weights, const EgoModelParams& params, ModeSelector selector, double t0) {
  if (map.empty()) throw ConfigError("cannot assemble an OCP on an empty reference path");
  weights.validate();
  OcpProblem problem;
  problem.z0 = clamp_state(ego, params);
  problem.map = &map;
  problem.params = params;
  problem.weights = weights;
  problem.trunk_len = weights.horizon;
  problem.path_hint = map.project(ego.x, ego.y).segment;
  OcpBranch branch;
  branch.prob = 1.0;
  for (const auto& ap : predictions) {
    if (selector == ModeSelector::kMostProbable) {
      branch.obstacles.push_back(make_obstacle(ap, ap.prediction.most_probable(), t0, weights));
    } else {
      for (std::size_t m = 0; m < ap.prediction.mode_count(); ++m) {
        branch.obstacles.push_back(make_obstacle(ap, m, t0, weights));
      }
    }
  }
  problem.branches.push_back(std::move(branch));
  return problem;
}

void state_cost(const OcpProblem& problem, const OcpBranch& branch, int k, const EgoState& z, double path_scale,
                double potential_scale, std::size_t& hint, StageQuadratic* q, double& value) {
  const OcpWeights& w = problem.weights;
  const MapModel& map = *problem.map;
  const PathProjection proj = map.project(z.x, z.y, hint);
  hint = proj.segment;

  // Gradient of d, lag and s with respect to (x, y).
  const double ddx = -proj.ty;
  const double ddy = proj.tx;
  double v = 0.0;
  Eigen::Vector3d g = Eigen::Vector3d::Zero();  // over (x, y, heading)
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();
  double gv = 0.0;
  double hv = 0.0;

  const auto add_linear_sq = [&](double weight, double r, double rx, double ry) {
    v += weight * r * r;
    g(0) += 2.0 * weight * r * rx;
    g(1) += 2.0 * weight * r * ry;
    h(0, 0) += 2.0 * weight * rx * rx;
    h(0, 1) += 2.0 * weight * rx * ry;
    h(1, 0) += 2.0 * weight * rx * ry;
    h(1, 1) += 2.0 * weight * ry * ry;
  };

  add_linear_sq(path_scale * w.w_contour, proj.d, ddx, ddy);
  if (proj.clamped) add_linear_sq(path_scale * w.w_lag, proj.lag, proj.tx, proj.ty);

  const double half_w = 0.5 * problem.params.width;
  const double excess_left = proj.d - (map.segment_left_width(proj.segment) - half_w);
  const double excess_right = -proj.d - (map.segment_right_width(proj.segment) - half_w);
  if (excess_left > 0.0) add_linear_sq(path_scale * w.w_corridor, excess_left, ddx, ddy);
  if (excess_right > 0.0) add_linear_sq(path_scale * w.w_corridor, excess_right, -ddx, -ddy);

  const double over = z.v - map.segment_speed_limit(proj.segment);
  if (over > 0.0) {
    const double ws = path_scale * w.w_speed_limit;
    v += ws * over * over;
    gv += 2.0 * ws * over;
    hv += 2.0 * ws;
  }

  // Stage progress -w_p * (s_{k+1} - s_k) telescopes to w_p * (s_0 - s_N).
  if (k == 0 || k == w.horizon) {
    const double wp = (k == 0 ? 1.0 : -1.0) * path_scale * w.w_progress;
    v += wp * proj.s;
    if (!proj.clamped) {
      g(0) += wp * proj.tx;
      g(1) += wp * proj.ty;
    }
  }

  if (k > 0 && potential_scale > 0.0) {
    const PotentialShape shape{w.sigma_long, w.sigma_lat};
    const auto idx = static_cast<std::size_t>(k - 1);
    const auto add_potential = [&](double p, const Eigen::Vector3d& gp) {
      if (p <= 0.0) return;
      v += p;
      g += gp;
      // Gauss-Newton: P = r^2 with r = sqrt(P), so H ~ 2 grad(r) grad(r)^T = grad(P) grad(P)^T / (2P).
      h += gp * gp.transpose() / (2.0 * p);
    };
    struct Group {
      int id;
      double s1{0.0};
      double s2{0.0};
      Eigen::Vector3d g1{Eigen::Vector3d::Zero()};
      Eigen::Vector3d g2{Eigen::Vector3d::Zero()};
    };
    std::vector<Group> groups;
    for (const Obstacle& ob : branch.obstacles) {
      const PotentialEval pe = potential_field(z.x, z.y, z.heading, problem.params.length, problem.params.width,
                                               ob.x[idx], ob.y[idx], ob.heading[idx], ob.length, ob.width,
                                               ob.sigma_long[idx], ob.sigma_lat[idx], shape,
                                               potential_scale * w.w_potential * ob.weight);
      const Eigen::Vector3d gp(pe.dx, pe.dy, pe.dheading);
      if (ob.group < 0) {
        add_potential(pe.value, gp);
        continue;
      }
      auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& gr) { return gr.id == ob.group; });
      if (it == groups.end()) it = groups.insert(groups.end(), Group{ob.group});
      it->s1 += pe.value;
      it->s2 += pe.value * pe.value;
      it->g1 += gp;
      it->g2 += 2.0 * pe.value * gp;
    }
    for (const Group& gr : groups) {
      if (gr.s1 <= 0.0) continue;
      add_potential(gr.s2 / gr.s1, (gr.g2 * gr.s1 - gr.s2 * gr.g1) / (gr.s1 * gr.s1));
    }
  }

  value += v;
  if (q != nullptr) {
    q->value += v;
    q->lx.head<3>() += g;
    q->lx(3) += gv;
    q->lxx.topLeftCorner<3, 3>() += h;
    q->lxx(3, 3) += hv;
  }
}

double control_cost(const OcpWeights& w, const EgoControl& u, StageQuadratic* q) {
  const double v = w.w_jerk * u.jerk * u.jerk + w.w_steer_rate * u.steer_rate * u.steer_rate;
  if (q != nullptr) {
    q->value += v;
    q->lu(0) += 2.0 * w.w_jerk * u.jerk;
    q->lu(1) += 2.0 * w.w_steer_rate * u.steer_rate;
    q->luu(0, 0) += 2.0 * w.w_jerk;
    q->luu(1, 1) += 2.0 * w.w_steer_rate;
  }
  return v;
}

}  // namespace loopbench

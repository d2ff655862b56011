#include "loopbench/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "loopbench/errors.hpp"

namespace loopbench {

namespace {

void check_alignment(const PredictionSet& prediction, const TrajectorySample& gt, std::size_t k) {
  if (gt.size() != prediction.horizon()) {
    throw AlignmentError("ground truth has " + std::to_string(gt.size()) + " states, prediction horizon is " +
                         std::to_string(prediction.horizon()));
  }
  if (std::abs(gt.dt() - prediction.dt()) > 1e-9) throw AlignmentError("ground truth dt differs from prediction dt");
  if (std::abs(gt.start_time() - (prediction.t0() + prediction.dt())) > 1e-6) {
    throw AlignmentError("ground truth does not start one step after the prediction time");
  }
  if (k == 0 || k > prediction.mode_count()) throw AlignmentError("top-K must lie in [1, mode count]");
}

template <typename PerMode>
double min_over_top_k(const PredictionSet& prediction, std::size_t k, PerMode per_mode) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t m : prediction.top_k(k)) best = std::min(best, per_mode(prediction.mode(m)));
  return best;
}

// Intersection of segments p0p1 and q0q1, computed on a canonical ordering of
// the two segments so that swapping them cannot change a single bit.
std::optional<Point2> segment_intersection(Point2 p0, Point2 p1, Point2 q0, Point2 q1) {
  const auto less = [](const Point2& a, const Point2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); };
  if (less(p1, p0)) std::swap(p0, p1);
  if (less(q1, q0)) std::swap(q0, q1);
  if (less(q0, p0) || (q0.x == p0.x && q0.y == p0.y && less(q1, p1))) {
    std::swap(p0, q0);
    std::swap(p1, q1);
  }
  const double rx = p1.x - p0.x;
  const double ry = p1.y - p0.y;
  const double sx = q1.x - q0.x;
  const double sy = q1.y - q0.y;
  const double den = rx * sy - ry * sx;
  if (std::abs(den) < 1e-12) return std::nullopt;  // parallel or collinear: handled as a merge
  const double qpx = q0.x - p0.x;
  const double qpy = q0.y - p0.y;
  const double t = (qpx * sy - qpy * sx) / den;
  const double u = (qpx * ry - qpy * rx) / den;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
  return Point2{p0.x + t * rx, p0.y + t * ry};
}

struct Nearest {
  Point2 point;
  double dist{std::numeric_limits<double>::infinity()};
  double heading{0.0};
};

Nearest nearest_on(const std::vector<Point2>& poly, const Point2& p) {
  Nearest best;
  for (std::size_t i = 0; i + 1 < poly.size(); ++i) {
    const Point2& a = poly[i];
    const Point2& b = poly[i + 1];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    if (len2 < 1e-12) continue;
    const double u = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    const Point2 c{a.x + u * dx, a.y + u * dy};
    const double d = std::hypot(p.x - c.x, p.y - c.y);
    if (d < best.dist) best = {c, d, std::atan2(dy, dx)};
  }
  return best;
}

std::vector<Point2> positions(const TrajectorySample& t) {
  std::vector<Point2> out;
  out.reserve(t.size());
  for (const auto& s : t.states()) out.push_back({s.x, s.y});
  return out;
}

double motion_heading(const std::vector<Point2>& poly, std::size_t i, double fallback) {
  if (poly.size() < 2) return fallback;
  const std::size_t j = std::min(i, poly.size() - 2);
  const double dx = poly[j + 1].x - poly[j].x;
  const double dy = poly[j + 1].y - poly[j].y;
  return std::hypot(dx, dy) < 1e-9 ? fallback : std::atan2(dy, dx);
}

void add_merge_points(const TrajectorySample& from, const std::vector<Point2>& from_pts,
                      const std::vector<Point2>& onto, const TtcpConfig& cfg, std::vector<Point2>& out) {
  for (std::size_t i = 0; i < from_pts.size(); ++i) {
    const Nearest n = nearest_on(onto, from_pts[i]);
    if (n.dist > cfg.merge_threshold) continue;
    const double h = motion_heading(from_pts, i, from[i].heading);
    if (std::abs(angle_diff(h, n.heading)) > cfg.merge_heading) continue;
    out.push_back({(from_pts[i].x + n.point.x) * 0.5, (from_pts[i].y + n.point.y) * 0.5});
  }
}

}  // namespace

double gaussian_nll(const GaussianStep& g, double x, double y) {
  const double zx = (x - g.mean_x) / g.sigma_x;
  const double zy = (y - g.mean_y) / g.sigma_y;
  const double one_m_r2 = 1.0 - g.rho * g.rho;
  return std::log(2.0 * kPi * g.sigma_x * g.sigma_y * std::sqrt(one_m_r2)) +
         0.5 * (zx * zx - 2.0 * g.rho * zx * zy + zy * zy) / one_m_r2;
}

double min_ade(const PredictionSet& prediction, const TrajectorySample& gt, std::size_t k) {
  check_alignment(prediction, gt, k);
  return min_over_top_k(prediction, k, [&](const PredictionMode& m) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m.steps.size(); ++i) {
      sum += std::hypot(m.steps[i].mean_x - gt[i].x, m.steps[i].mean_y - gt[i].y);
    }
    return sum / static_cast<double>(m.steps.size());
  });
}

double min_fde(const PredictionSet& prediction, const TrajectorySample& gt, std::size_t k) {
  check_alignment(prediction, gt, k);
  return min_over_top_k(prediction, k, [&](const PredictionMode& m) {
    return std::hypot(m.steps.back().mean_x - gt.back().x, m.steps.back().mean_y - gt.back().y);
  });
}

double min_nll(const PredictionSet& prediction, const TrajectorySample& gt, std::size_t k) {
  check_alignment(prediction, gt, k);
  return min_over_top_k(prediction, k, [&](const PredictionMode& m) {
    double sum = 0.0;
    for (std::size_t i = 0; i < m.steps.size(); ++i) sum += gaussian_nll(m.steps[i], gt[i].x, gt[i].y);
    return sum / static_cast<double>(m.steps.size());
  });
}

double temporal_consistency(const PredictionSet& pred_t, const PredictionSet& pred_t1, double v, double v_floor,
                            TcMode mode) {
  if (pred_t.agent_id() != pred_t1.agent_id()) throw AlignmentError("temporal consistency across different agents");
  if (std::abs(pred_t.dt() - pred_t1.dt()) > 1e-9) throw AlignmentError("temporal consistency across different dt");
  if (std::abs(pred_t1.t0() - pred_t.t0() - pred_t.dt()) > 1e-6) {
    throw AlignmentError("predictions are not one step apart");
  }
  if (pred_t1.horizon() < 1 || pred_t.horizon() < 2 || pred_t1.horizon() + 1 < pred_t.horizon()) {
    throw AlignmentError("prediction horizons do not overlap");
  }
  const GaussianStep& a = pred_t.mode(pred_t.most_probable()).steps[pred_t.horizon() - 1];
  const auto gap = [&](std::size_t m) {
    const GaussianStep& b = pred_t1.mode(m).steps[pred_t.horizon() - 2];
    return std::hypot(a.mean_x - b.mean_x, a.mean_y - b.mean_y);
  };
  double d = gap(pred_t1.most_probable());
  if (mode == TcMode::kBestMatching) {
    for (std::size_t m = 0; m < pred_t1.mode_count(); ++m) d = std::min(d, gap(m));
  }
  return d / std::max(v, v_floor);
}

std::vector<Point2> conflict_points(const TrajectorySample& a, const TrajectorySample& b, const TtcpConfig& cfg) {
  const auto pa = positions(a);
  const auto pb = positions(b);
  std::vector<Point2> out;
  for (std::size_t i = 0; i + 1 < pa.size(); ++i) {
    const double ax0 = std::min(pa[i].x, pa[i + 1].x);
    const double ax1 = std::max(pa[i].x, pa[i + 1].x);
    const double ay0 = std::min(pa[i].y, pa[i + 1].y);
    const double ay1 = std::max(pa[i].y, pa[i + 1].y);
    for (std::size_t j = 0; j + 1 < pb.size(); ++j) {
      if (std::max(pb[j].x, pb[j + 1].x) < ax0 || std::min(pb[j].x, pb[j + 1].x) > ax1 ||
          std::max(pb[j].y, pb[j + 1].y) < ay0 || std::min(pb[j].y, pb[j + 1].y) > ay1) {
        continue;
      }
      if (auto p = segment_intersection(pa[i], pa[i + 1], pb[j], pb[j + 1])) out.push_back(*p);
    }
  }
  add_merge_points(a, pa, pb, cfg, out);
  add_merge_points(b, pb, pa, cfg, out);
  std::sort(out.begin(), out.end(), [](const Point2& p, const Point2& q) { return p.x < q.x || (p.x == q.x && p.y < q.y); });
  out.erase(std::unique(out.begin(), out.end(), [](const Point2& p, const Point2& q) { return p.x == q.x && p.y == q.y; }),
            out.end());
  return out;
}

std::optional<double> delta_ttcp_min(const TrajectorySample& a, const TrajectorySample& b, const TtcpConfig& cfg) {
  if (std::abs(a.dt() - b.dt()) > 1e-9) throw AlignmentError("delta_ttcp_min requires equal sampling steps");
  const auto candidates = conflict_points(a, b, cfg);
  if (candidates.empty()) return std::nullopt;
  std::optional<double> best;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t k = 0; k < n; ++k) {
    const AgentState& sa = a[k];
    const AgentState& sb = b[k];
    if (!(sa.speed > cfg.v_floor && sb.speed > cfg.v_floor)) continue;
    const double ca = std::cos(sa.heading);
    const double sna = std::sin(sa.heading);
    const double cb = std::cos(sb.heading);
    const double snb = std::sin(sb.heading);
    for (const Point2& c : candidates) {
      if ((c.x - sa.x) * ca + (c.y - sa.y) * sna <= 0.0) continue;
      if ((c.x - sb.x) * cb + (c.y - sb.y) * snb <= 0.0) continue;
      const double ta = std::hypot(c.x - sa.x, c.y - sa.y) / sa.speed;
      const double tb = std::hypot(c.x - sb.x, c.y - sb.y) / sb.speed;
      const double diff = std::abs(ta - tb);
      if (!best || diff < *best) best = diff;
    }
  }
  return best;
}

TrajectorySample ego_reference_log(const Scenario& scenario) {
  if (scenario.ego.log) return *scenario.ego.log;
  const AgentState& s0 = scenario.ego.init;
  std::vector<AgentState> states;
  const int n = scenario.step_count();
  for (int k = 0; k <= n; ++k) {
    const double t = k * scenario.sim_dt;
    states.push_back({t, s0.x + s0.speed * std::cos(s0.heading) * t, s0.y + s0.speed * std::sin(s0.heading) * t,
                      s0.heading, s0.speed, 0.0});
  }
  return TrajectorySample(scenario.sim_dt, std::move(states));
}

std::optional<double> scenario_delta_ttcp(const Scenario& scenario, const TtcpConfig& cfg) {
  const TrajectorySample ego = ego_reference_log(scenario);
  std::optional<double> best;
  for (const auto& a : scenario.agents) {
    const auto v = delta_ttcp_min(ego, a.log, cfg);
    if (v && (!best || *v < *best)) best = v;
  }
  return best;
}

bool is_interactive(const Scenario& scenario, double threshold, const TtcpConfig& cfg) {
  const auto v = scenario_delta_ttcp(scenario, cfg);
  return v.has_value() && *v <= threshold;
}

OpenLoopMetrics open_loop_metrics(const SimTrace& trace, const Scenario& scenario, TcMode tc_mode) {
  OpenLoopMetrics out;
  std::map<std::string, std::pair<const PredictionSet*, double>> previous;  // agent -> (prediction, speed at issue)
  double ade1 = 0.0, ade6 = 0.0, fde1 = 0.0, fde6 = 0.0, nll1 = 0.0, nll6 = 0.0, tc = 0.0;
  for (const StepRecord& rec : trace.steps) {
    for (const PredictionSet& p : rec.predictions) {
      const AgentTrack& track = scenario.agent(p.agent_id());
      std::size_t agent_index = 0;
      while (scenario.agents[agent_index].info.id != p.agent_id()) ++agent_index;
      const double speed = rec.agents[agent_index].speed;

      auto prev = previous.find(p.agent_id());
      if (prev != previous.end() && std::abs(p.t0() - prev->second.first->t0() - p.dt()) < 1e-6) {
        tc += temporal_consistency(*prev->second.first, p, prev->second.second, kVelocityFloor, tc_mode);
        ++out.tc_samples;
      }
      previous[p.agent_id()] = {&p, speed};

      const long long base = std::llround(p.t0() / p.dt());
      const double end = static_cast<double>(base + static_cast<long long>(p.horizon())) * p.dt();
      if (end > track.log.end_time() + 1e-9) continue;
      std::vector<AgentState> gt;
      gt.reserve(p.horizon());
      for (std::size_t i = 1; i <= p.horizon(); ++i) {
        gt.push_back(interpolate_state(track.log, static_cast<double>(base + static_cast<long long>(i)) * p.dt()));
      }
      const TrajectorySample g(p.dt(), std::move(gt));
      const std::size_t k6 = std::min<std::size_t>(6, p.mode_count());
      ade1 += min_ade(p, g, 1);
      ade6 += min_ade(p, g, k6);
      fde1 += min_fde(p, g, 1);
      fde6 += min_fde(p, g, k6);
      nll1 += min_nll(p, g, 1);
      nll6 += min_nll(p, g, k6);
      ++out.samples;
    }
  }
  if (out.samples > 0) {
    const double n = static_cast<double>(out.samples);
    out.min_ade_1 = ade1 / n;
    out.min_ade_6 = ade6 / n;
    out.min_fde_1 = fde1 / n;
    out.min_fde_6 = fde6 / n;
    out.min_nll_1 = nll1 / n;
    out.min_nll_6 = nll6 / n;
  }
  if (out.tc_samples > 0) out.tc = tc / static_cast<double>(out.tc_samples);
  return out;
}

Comfort comfort_from_states(const std::vector<EgoState>& states, double dt) {
  Comfort c;
  const std::size_t n = states.size();
  if (n < 2) return c;
  std::vector<double> accel(n - 1);
  std::vector<double> yaw_rate(n - 1);
  for (std::size_t k = 0; k + 1 < n; ++k) {
    accel[k] = (states[k + 1].v - states[k].v) / dt;
    yaw_rate[k] = angle_diff(states[k + 1].heading, states[k].heading) / dt;
    c.max_abs_accel = std::max(c.max_abs_accel, std::abs(accel[k]));
    c.max_abs_yaw_rate = std::max(c.max_abs_yaw_rate, std::abs(yaw_rate[k]));
  }
  double jerk_sum = 0.0;
  for (std::size_t k = 0; k + 1 < accel.size(); ++k) {
    const double j = (accel[k + 1] - accel[k]) / dt;
    const double ya = (yaw_rate[k + 1] - yaw_rate[k]) / dt;
    c.max_abs_jerk = std::max(c.max_abs_jerk, std::abs(j));
    c.max_abs_yaw_accel = std::max(c.max_abs_yaw_accel, std::abs(ya));
    jerk_sum += std::abs(j);
  }
  if (accel.size() > 1) c.mean_abs_jerk = jerk_sum / static_cast<double>(accel.size() - 1);
  return c;
}

double comfort_score(const Comfort& c, const ComfortBounds& b) {
  int ok = 0;
  ok += c.max_abs_jerk <= b.jerk ? 1 : 0;
  ok += c.max_abs_accel <= b.accel ? 1 : 0;
  ok += c.max_abs_yaw_rate <= b.yaw_rate ? 1 : 0;
  ok += c.max_abs_yaw_accel <= b.yaw_accel ? 1 : 0;
  return ok / 4.0;
}

double composite_score(bool at_fault, bool offroad, double ttc_min, double progress_ratio, double comfort,
                       const ScoreConfig& cfg) {
  if (at_fault || offroad) return 0.0;
  const double ttc_score = ttc_min >= cfg.ttc_threshold ? 1.0 : 0.0;
  const double p = std::clamp(progress_ratio, 0.0, 1.0);
  return (cfg.w_ttc * ttc_score + cfg.w_progress * p + cfg.w_comfort * comfort) /
         (cfg.w_ttc + cfg.w_progress + cfg.w_comfort);
}

double time_to_collision(const Box& ego, double ego_speed, const Box& agent, double agent_speed,
                         const ScoreConfig& cfg) {
  const double reach = std::hypot(0.5 * ego.length, 0.5 * ego.width) + std::hypot(0.5 * agent.length, 0.5 * agent.width);
  if (std::hypot(ego.x - agent.x, ego.y - agent.y) > reach + (ego_speed + agent_speed) * cfg.ttc_cap) {
    return cfg.ttc_cap;
  }
  const double ec = std::cos(ego.heading);
  const double es = std::sin(ego.heading);
  const double ac = std::cos(agent.heading);
  const double as = std::sin(agent.heading);
  const int steps = static_cast<int>(std::llround(cfg.ttc_cap / cfg.ttc_step));
  for (int i = 0; i <= steps; ++i) {
    const double tau = i * cfg.ttc_step;
    Box e = ego;
    Box a = agent;
    e.x += ego_speed * ec * tau;
    e.y += ego_speed * es * tau;
    a.x += agent_speed * ac * tau;
    a.y += agent_speed * as * tau;
    const auto contact = contact_point(e, a);
    if (!contact) continue;
    if (i == 0) return 0.0;
    // Projected contacts the ego could not be blamed for are ignored.
    const EgoState ez{e.x, e.y, e.heading, ego_speed, 0.0, 0.0};
    const AgentState as_state{0.0, a.x, a.y, a.heading, agent_speed, 0.0};
    if (classify_at_fault(ez, as_state, *contact)) return tau;
    return cfg.ttc_cap;
  }
  return cfg.ttc_cap;
}

ClosedLoopMetrics closed_loop_metrics(const SimTrace& trace, const Scenario& scenario, const ScoreConfig& cfg) {
  if (trace.steps.empty()) throw ConfigError("closed-loop metrics need a non-empty trace");
  ClosedLoopMetrics m;
  EgoModelParams geom;
  geom.length = scenario.ego.length;
  geom.width = scenario.ego.width;

  std::vector<EgoState> states;
  states.reserve(trace.steps.size());
  double speed_sum = 0.0;
  m.ttc_min = cfg.ttc_cap;
  for (const StepRecord& rec : trace.steps) {
    states.push_back(rec.ego);
    speed_sum += rec.ego.v;
    for (const auto& c : rec.collisions) {
      ++m.collision_count;
      m.at_fault_collision = m.at_fault_collision || c.at_fault;
    }
    m.offroad = m.offroad || rec.offroad;
    const Box eb = ego_box(rec.ego, geom);
    for (std::size_t i = 0; i < rec.agents.size() && i < scenario.agents.size(); ++i) {
      const Box ab = agent_box(rec.agents[i], scenario.agents[i].info);
      m.ttc_min = std::min(m.ttc_min, time_to_collision(eb, rec.ego.v, ab, rec.agents[i].speed, cfg));
    }
  }
  m.mean_speed = speed_sum / static_cast<double>(trace.steps.size());
  m.comfort = comfort_from_states(states, trace.dt);
  m.comfort_score = comfort_score(m.comfort, cfg.comfort);

  const auto s_of = [&](double x, double y) { return scenario.map.project(x, y).s; };
  const double gained = s_of(states.back().x, states.back().y) - s_of(states.front().x, states.front().y);
  const TrajectorySample expert = ego_reference_log(scenario);
  const double expert_gain = s_of(expert.back().x, expert.back().y) - s_of(expert.front().x, expert.front().y);
  m.progress_ratio = expert_gain <= 1e-9 ? 1.0 : std::clamp(gained / expert_gain, 0.0, 1.0);
  m.score = composite_score(m.at_fault_collision, m.offroad, m.ttc_min, m.progress_ratio, m.comfort_score, cfg);
  return m;
}

}  // namespace loopbench

#include "loopbench/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "loopbench/errors.hpp"

namespace loopbench {

namespace {

constexpr double kTimeTol = 1e-9;

bool finite(double v) { return std::isfinite(v); }

double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const double len2 = dx * dx + dy * dy;
  double u = 0.0;
  if (len2 > 0.0) u = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (a.x + u * dx), p.y - (a.y + u * dy));
}

double cross(double ax, double ay, double bx, double by) { return ax * by - ay * bx; }

bool segments_intersect(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const double d1 = cross(d.x - c.x, d.y - c.y, a.x - c.x, a.y - c.y);
  const double d2 = cross(d.x - c.x, d.y - c.y, b.x - c.x, b.y - c.y);
  const double d3 = cross(b.x - a.x, b.y - a.y, c.x - a.x, c.y - a.y);
  const double d4 = cross(b.x - a.x, b.y - a.y, d.x - a.x, d.y - a.y);
  return ((d1 > 0) != (d2 > 0)) && ((d3 > 0) != (d4 > 0)) && d1 != 0 && d2 != 0 && d3 != 0 &&
         d4 != 0;
}

void check_simple_polyline(const std::vector<Point2>& line, const char* name) {
  if (line.size() < 2) throw InvariantError(std::string(name) + ": needs at least 2 points");
  for (const auto& p : line) {
    if (!finite(p.x) || !finite(p.y)) throw InvariantError(std::string(name) + ": non-finite point");
  }
  const std::size_t n = line.size() - 1;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (segments_intersect(line[i], line[i + 1], line[j], line[j + 1])) {
        throw InvariantError(std::string(name) + ": self-intersection between segments " +
                             std::to_string(i) + " and " + std::to_string(j));
      }
    }
  }
}

double polyline_distance(const Point2& p, const std::vector<Point2>& line) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    best = std::min(best, point_segment_distance(p, line[i], line[i + 1]));
  }
  return best;
}

// Signed lateral offset of the closest point of `line` relative to path vertex `pp`.
double closest_side(const PathPoint& pp, const std::vector<Point2>& line) {
  double best = std::numeric_limits<double>::infinity();
  double side = 0.0;
  const Point2 p{pp.x, pp.y};
  for (std::size_t i = 0; i + 1 < line.size(); ++i) {
    const auto& a = line[i];
    const auto& b = line[i + 1];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    double u = 0.0;
    if (len2 > 0.0) u = std::clamp(((p.x - a.x) * dx + (p.y - a.y) * dy) / len2, 0.0, 1.0);
    const double qx = a.x + u * dx;
    const double qy = a.y + u * dy;
    const double dist = std::hypot(qx - p.x, qy - p.y);
    if (dist < best) {
      best = dist;
      side = -std::sin(pp.heading) * (qx - p.x) + std::cos(pp.heading) * (qy - p.y);
    }
  }
  return side;
}

}  // namespace

double wrap_angle(double angle) {
  double a = std::remainder(angle, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double angle_diff(double to, double from) { return wrap_angle(to - from); }

std::string_view to_string(AgentKind kind) {
  switch (kind) {
    case AgentKind::kVehicle:
      return "vehicle";
    case AgentKind::kPedestrian:
      return "pedestrian";
    case AgentKind::kBicycle:
      return "bicycle";
  }
  return "vehicle";
}

AgentKind agent_kind_from_string(std::string_view name) {
  if (name == "vehicle") return AgentKind::kVehicle;
  if (name == "pedestrian") return AgentKind::kPedestrian;
  if (name == "bicycle") return AgentKind::kBicycle;
  throw ParseError("unknown agent kind '" + std::string(name) + "'");
}

TrajectorySample::TrajectorySample(double dt, std::vector<AgentState> states)
    : dt_(dt), states_(std::move(states)) {
  if (!(dt_ > 0.0) || !finite(dt_)) throw InvariantError("trajectory dt must be positive");
  if (states_.empty()) throw InvariantError("trajectory must be non-empty");
  for (std::size_t i = 0; i < states_.size(); ++i) {
    auto& s = states_[i];
    if (!finite(s.t) || !finite(s.x) || !finite(s.y) || !finite(s.heading) || !finite(s.speed) ||
        !finite(s.yaw_rate)) {
      throw InvariantError("trajectory state " + std::to_string(i) + " is not finite");
    }
    if (s.speed < 0.0) throw InvariantError("trajectory state " + std::to_string(i) + " has negative speed");
    s.heading = wrap_angle(s.heading);
    if (i > 0 && std::abs(s.t - states_[i - 1].t - dt_) > kTimeTol) {
      throw InvariantError("trajectory state " + std::to_string(i) + " breaks uniform spacing");
    }
  }
}

AgentState interpolate_state(const TrajectorySample& traj, double t) {
  const double t0 = traj.start_time();
  const double t1 = traj.end_time();
  if (t < t0 - kTimeTol || t > t1 + kTimeTol) {
    throw RangeError("time " + std::to_string(t) + " outside trajectory span [" +
                     std::to_string(t0) + ", " + std::to_string(t1) + "]");
  }
  const std::size_t n = traj.size();
  if (n == 1) return traj[0];
  auto i = static_cast<std::size_t>(std::clamp(std::floor((t - t0) / traj.dt()), 0.0,
                                               static_cast<double>(n - 2)));
  const AgentState& a = traj[i];
  const AgentState& b = traj[i + 1];
  if (t == a.t) return a;
  if (t == b.t) return b;
  const double f = std::clamp((t - a.t) / (b.t - a.t), 0.0, 1.0);
  if (f == 0.0) return a;
  if (f == 1.0) return b;
  AgentState out;
  out.t = t;
  out.x = a.x + f * (b.x - a.x);
  out.y = a.y + f * (b.y - a.y);
  out.speed = a.speed + f * (b.speed - a.speed);
  out.heading = wrap_angle(a.heading + f * angle_diff(b.heading, a.heading));
  out.yaw_rate = a.yaw_rate + f * (b.yaw_rate - a.yaw_rate);
  return out;
}

AgentState sample_clamped(const TrajectorySample& traj, double t) {
  if (t <= traj.start_time()) {
    AgentState s = traj.front();
    s.t = t;
    return s;
  }
  if (t >= traj.end_time()) {
    AgentState s = traj.back();
    s.t = t;
    return s;
  }
  return interpolate_state(traj, t);
}

void validate_gaussian(const GaussianStep& step) {
  if (!finite(step.mean_x) || !finite(step.mean_y)) throw InvariantError("gaussian mean is not finite");
  if (!(step.sigma_x > 0.0) || !(step.sigma_y > 0.0) || !finite(step.sigma_x) || !finite(step.sigma_y)) {
    throw InvariantError("gaussian sigma must be positive");
  }
  if (!(std::abs(step.rho) < 1.0)) throw InvariantError("gaussian correlation must satisfy |rho| < 1");
}

PredictionSet::PredictionSet(std::string agent_id, double t0, double dt, std::vector<PredictionMode> modes)
    : agent_id_(std::move(agent_id)), t0_(t0), dt_(dt), modes_(std::move(modes)) {
  if (modes_.empty()) throw InvariantError("prediction needs at least one mode");
  if (!(dt_ > 0.0)) throw InvariantError("prediction dt must be positive");
  const std::size_t n = modes_.front().steps.size();
  if (n == 0) throw InvariantError("prediction modes must be non-empty");
  double total = 0.0;
  for (const auto& m : modes_) {
    if (m.steps.size() != n) throw InvariantError("prediction modes differ in length");
    if (!(m.prob >= 0.0 && m.prob <= 1.0)) throw InvariantError("mode probability outside [0, 1]");
    for (const auto& s : m.steps) validate_gaussian(s);
    total += m.prob;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvariantError("mode probabilities do not sum to 1");
}

std::size_t PredictionSet::most_probable() const {
  std::size_t best = 0;
  for (std::size_t i = 1; i < modes_.size(); ++i) {
    if (modes_[i].prob > modes_[best].prob) best = i;
  }
  return best;
}

std::vector<std::size_t> PredictionSet::top_k(std::size_t k) const {
  std::vector<std::size_t> idx(modes_.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return modes_[a].prob > modes_[b].prob; });
  idx.resize(std::min(k, idx.size()));
  return idx;
}

double PathProjection::distance() const { return std::hypot(d, lag); }

MapModel::MapModel(const std::vector<ReferencePoint>& reference, std::vector<Point2> left_boundary,
                   std::vector<Point2> right_boundary)
    : left_(std::move(left_boundary)), right_(std::move(right_boundary)) {
  if (reference.size() < 2) throw InvariantError("map.reference_path: needs at least 2 points");
  path_.reserve(reference.size());
  double s = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const auto& r = reference[i];
    if (!finite(r.x) || !finite(r.y) || !finite(r.speed_limit)) {
      throw InvariantError("map.reference_path[" + std::to_string(i) + "]: non-finite value");
    }
    if (r.speed_limit <= 0.0) {
      throw InvariantError("map.reference_path[" + std::to_string(i) + "]: speed limit must be positive");
    }
    if (i > 0) {
      const double ds = std::hypot(r.x - reference[i - 1].x, r.y - reference[i - 1].y);
      if (!(ds > 0.0)) {
        throw InvariantError("map.reference_path[" + std::to_string(i) + "]: arclength not strictly increasing");
      }
      s += ds;
    }
    path_.push_back({r.x, r.y, 0.0, s, r.speed_limit});
  }
  for (std::size_t i = 0; i + 1 < path_.size(); ++i) {
    path_[i].heading = std::atan2(path_[i + 1].y - path_[i].y, path_[i + 1].x - path_[i].x);
  }
  path_.back().heading = path_[path_.size() - 2].heading;

  check_simple_polyline(left_, "map.left_boundary");
  check_simple_polyline(right_, "map.right_boundary");

  std::vector<double> left_w(path_.size());
  std::vector<double> right_w(path_.size());
  for (std::size_t i = 0; i < path_.size(); ++i) {
    const Point2 p{path_[i].x, path_[i].y};
    left_w[i] = polyline_distance(p, left_);
    right_w[i] = polyline_distance(p, right_);
    if (!(closest_side(path_[i], left_) > 0.0) || !(closest_side(path_[i], right_) < 0.0)) {
      throw InvariantError("map: reference path vertex " + std::to_string(i) +
                           " is not strictly between the boundaries");
    }
  }
  seg_left_width_.resize(path_.size() - 1);
  seg_right_width_.resize(path_.size() - 1);
  for (std::size_t i = 0; i + 1 < path_.size(); ++i) {
    seg_left_width_[i] = std::min(left_w[i], left_w[i + 1]);
    seg_right_width_[i] = std::min(right_w[i], right_w[i + 1]);
  }
}

PathProjection MapModel::project_onto(std::size_t segment, double x, double y) const {
  const PathPoint& a = path_[segment];
  const PathPoint& b = path_[segment + 1];
  const double len = b.s - a.s;
  const double tx = (b.x - a.x) / len;
  const double ty = (b.y - a.y) / len;
  const double along = (x - a.x) * tx + (y - a.y) * ty;
  PathProjection p;
  p.segment = segment;
  p.tx = tx;
  p.ty = ty;
  double u = along;
  if (u <= 0.0) {
    u = 0.0;
    p.clamped = along < 0.0;
  } else if (u >= len) {
    u = len;
    p.clamped = along > len;
  }
  const double rx = x - (a.x + u * tx);
  const double ry = y - (a.y + u * ty);
  p.s = a.s + u;
  p.d = tx * ry - ty * rx;
  p.lag = p.clamped ? tx * rx + ty * ry : 0.0;
  return p;
}

PathProjection MapModel::project(double x, double y) const {
  if (path_.size() < 2) throw ConfigError("map has an empty reference path");
  PathProjection best = project_onto(0, x, y);
  double best_d = best.distance();
  for (std::size_t i = 1; i + 1 < path_.size(); ++i) {
    PathProjection p = project_onto(i, x, y);
    const double dist = p.distance();
    if (dist < best_d) {
      best = p;
      best_d = dist;
    }
  }
  return best;
}

PathProjection MapModel::project(double x, double y, std::size_t hint) const {
  if (path_.size() < 2) throw ConfigError("map has an empty reference path");
  std::size_t i = std::min(hint, path_.size() - 2);
  PathProjection best = project_onto(i, x, y);
  double best_d = best.distance();
  // Walk forward while the distance does not grow, then backward if nothing improved.
  bool moved = false;
  for (std::size_t j = i; j + 2 < path_.size(); ++j) {
    PathProjection p = project_onto(j + 1, x, y);
    const double dist = p.distance();
    if (dist > best_d) break;
    if (dist < best_d) {
      best = p;
      best_d = dist;
      moved = true;
    }
  }
  if (!moved) {
    for (std::size_t j = i; j > 0; --j) {
      PathProjection p = project_onto(j - 1, x, y);
      const double dist = p.distance();
      if (dist > best_d) break;
      if (dist <= best_d) {
        best = p;
        best_d = dist;
      }
    }
  }
  return best;
}

std::size_t MapModel::segment_at(double s) const {
  if (path_.size() < 2) throw ConfigError("map has an empty reference path");
  auto it = std::upper_bound(path_.begin(), path_.end(), s,
                             [](double v, const PathPoint& p) { return v < p.s; });
  std::size_t idx = it == path_.begin() ? 0 : static_cast<std::size_t>(it - path_.begin()) - 1;
  return std::min(idx, path_.size() - 2);
}

Point2 MapModel::position_at(double s) const {
  const std::size_t i = segment_at(s);
  const PathPoint& a = path_[i];
  const PathPoint& b = path_[i + 1];
  const double f = (s - a.s) / (b.s - a.s);
  return {a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)};
}

double MapModel::heading_at(double s) const { return path_[segment_at(s)].heading; }

std::pair<double, double> frenet_project(const MapModel& map, double x, double y) {
  if (map.empty()) throw ConfigError("map has an empty reference path");
  const PathProjection p = map.project(x, y);
  if (p.distance() > kMaxProjectionDistance) {
    throw ProjectionError("point (" + std::to_string(x) + ", " + std::to_string(y) +
                          ") is farther than 50 m from the reference path");
  }
  return {p.s, p.d};
}

MapModel make_corridor(const std::vector<ReferencePoint>& reference, double left, double right) {
  if (reference.size() < 2) throw InvariantError("map.reference_path: needs at least 2 points");
  if (!(left > 0.0) || !(right > 0.0)) throw InvariantError("map: boundary offsets must be positive");
  const std::size_t n = reference.size();
  std::vector<Point2> lb(n);
  std::vector<Point2> rb(n);
  const auto seg_heading = [&](std::size_t i) {
    return std::atan2(reference[i + 1].y - reference[i].y, reference[i + 1].x - reference[i].x);
  };
  for (std::size_t i = 0; i < n; ++i) {
    double h = 0.0;
    double scale = 1.0;
    if (i == 0) {
      h = seg_heading(0);
    } else if (i + 1 == n) {
      h = seg_heading(n - 2);
    } else {
      const double a = seg_heading(i - 1);
      const double half = 0.5 * angle_diff(seg_heading(i), a);
      h = a + half;
      scale = 1.0 / std::cos(half);  // miter keeps the offset constant on both segments
    }
    const double nx = -std::sin(h) * scale;
    const double ny = std::cos(h) * scale;
    lb[i] = {reference[i].x + left * nx, reference[i].y + left * ny};
    rb[i] = {reference[i].x - right * nx, reference[i].y - right * ny};
  }
  return MapModel(reference, std::move(lb), std::move(rb));
}

int Scenario::step_count() const { return static_cast<int>(std::llround(duration / sim_dt)); }

const AgentTrack& Scenario::agent(std::string_view id) const {
  for (const auto& a : agents) {
    if (a.info.id == id) return a;
  }
  throw LookupError("unknown agent id '" + std::string(id) + "'");
}

void Scenario::validate() const {
  if (!(sim_dt > 0.0) || !finite(sim_dt)) throw InvariantError("meta.sim_dt must be positive");
  if (!(duration > 0.0) || !finite(duration)) throw InvariantError("meta.duration must be positive");
  const double steps = duration / sim_dt;
  if (std::abs(steps - std::round(steps)) > 1e-9 * std::max(1.0, steps)) {
    throw InvariantError("meta.duration is not an integer multiple of meta.sim_dt");
  }
  if (map.empty()) throw InvariantError("map.reference_path is empty");
  const auto& e = ego.init;
  if (!finite(e.x) || !finite(e.y) || !finite(e.heading) || !finite(e.speed) || e.speed < 0.0) {
    throw InvariantError("ego.init has invalid values");
  }
  if (!(ego.length > 0.0) || !(ego.width > 0.0) || !(ego.wheelbase > 0.0)) {
    throw InvariantError("ego geometry must be positive");
  }
  std::vector<std::string_view> ids;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    const auto& a = agents[i];
    const std::string where = "agents[" + std::to_string(i) + "]";
    if (a.info.id.empty()) throw InvariantError(where + ".id is empty");
    if (std::find(ids.begin(), ids.end(), a.info.id) != ids.end()) {
      throw InvariantError(where + ".id '" + a.info.id + "' is duplicated");
    }
    ids.push_back(a.info.id);
    if (!(a.info.length > 0.0) || !(a.info.width > 0.0)) throw InvariantError(where + " geometry must be positive");
    if (std::abs(a.log.dt() - sim_dt) > 1e-12) throw InvariantError(where + ".states spacing differs from sim_dt");
    if (a.log.start_time() > kTimeTol || a.log.end_time() < duration - kTimeTol) {
      throw InvariantError(where + ".states do not span the scenario duration");
    }
  }
  if (ego.log) {
    if (std::abs(ego.log->dt() - sim_dt) > 1e-12) throw InvariantError("ego.states spacing differs from sim_dt");
    if (ego.log->start_time() > kTimeTol || ego.log->end_time() < duration - kTimeTol) {
      throw InvariantError("ego.states do not span the scenario duration");
    }
  }
}

bool extend_to_duration(AgentTrack& track, double duration) {
  if (track.log.end_time() >= duration - kTimeTol) return false;
  std::vector<AgentState> states(track.log.states().begin(), track.log.states().end());
  const double dt = track.log.dt();
  const AgentState last = states.back();
  const double t0 = track.log.start_time();
  std::size_t i = states.size();
  while (states.back().t < duration - kTimeTol) {
    AgentState s = last;
    s.t = t0 + static_cast<double>(i) * dt;
    s.speed = 0.0;
    s.yaw_rate = 0.0;
    states.push_back(s);
    ++i;
  }
  track.log = TrajectorySample(dt, std::move(states));
  track.extrapolated = true;
  return true;
}

void fill_yaw_rates(std::vector<AgentState>& states, double dt) {
  if (states.empty()) return;
  for (std::size_t i = 0; i + 1 < states.size(); ++i) {
    states[i].yaw_rate = angle_diff(states[i + 1].heading, states[i].heading) / dt;
  }
  states.back().yaw_rate = states.size() > 1 ? states[states.size() - 2].yaw_rate : 0.0;
}

}  // namespace loopbench

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace loopbench {

inline constexpr double kPi = 3.14159265358979323846;

/// Wraps an angle into (-pi, pi].
double wrap_angle(double angle);

/// Shortest signed arc from `from` to `to`, in (-pi, pi].
double angle_diff(double to, double from);

struct Point2 {
  double x{0.0};
  double y{0.0};
};

struct AgentState {
  double t{0.0};
  double x{0.0};
  double y{0.0};
  double heading{0.0};  // wrapped to (-pi, pi]
  double speed{0.0};    // >= 0
  double yaw_rate{0.0};
};

enum class AgentKind { kVehicle, kPedestrian, kBicycle };

std::string_view to_string(AgentKind kind);
AgentKind agent_kind_from_string(std::string_view name);

struct AgentInfo {
  std::string id;
  AgentKind kind{AgentKind::kVehicle};
  double length{4.5};
  double width{1.8};
};

/// Uniformly sampled state sequence. Headings are wrapped on construction.
class TrajectorySample {
 public:
  TrajectorySample(double dt, std::vector<AgentState> states);

  double dt() const { return dt_; }
  std::span<const AgentState> states() const { return states_; }
  std::size_t size() const { return states_.size(); }
  const AgentState& operator[](std::size_t i) const { return states_[i]; }
  const AgentState& front() const { return states_.front(); }
  const AgentState& back() const { return states_.back(); }
  double start_time() const { return states_.front().t; }
  double end_time() const { return states_.back().t; }

 private:
  double dt_;
  std::vector<AgentState> states_;
};

/// Linear interpolation of position and speed, shortest-arc interpolation of
/// heading. Throws RangeError outside [start_time, end_time].
AgentState interpolate_state(const TrajectorySample& traj, double t);

/// Like interpolate_state, but holds the first/last sample outside the span.
AgentState sample_clamped(const TrajectorySample& traj, double t);

struct GaussianStep {
  double mean_x{0.0};
  double mean_y{0.0};
  double sigma_x{1.0};
  double sigma_y{1.0};
  double rho{0.0};
};

/// Throws InvariantError unless sigmas are positive and |rho| < 1.
void validate_gaussian(const GaussianStep& step);

struct PredictionMode {
  double prob{1.0};
  std::vector<GaussianStep> steps;
};

/// K-mode Gaussian mixture over future positions of one agent. Step k of
/// every mode (0-based) refers to time t0 + (k + 1) * dt.
class PredictionSet {
 public:
  PredictionSet(std::string agent_id, double t0, double dt, std::vector<PredictionMode> modes);

  const std::string& agent_id() const { return agent_id_; }
  double t0() const { return t0_; }
  double dt() const { return dt_; }
  std::size_t horizon() const { return modes_.front().steps.size(); }
  std::size_t mode_count() const { return modes_.size(); }
  std::span<const PredictionMode> modes() const { return modes_; }
  const PredictionMode& mode(std::size_t i) const { return modes_[i]; }

  /// Argmax probability; ties go to the lowest index.
  std::size_t most_probable() const;
  /// Indices of the k most probable modes, ordered by probability then index.
  std::vector<std::size_t> top_k(std::size_t k) const;

 private:
  std::string agent_id_;
  double t0_;
  double dt_;
  std::vector<PredictionMode> modes_;
};

struct PathPoint {
  double x{0.0};
  double y{0.0};
  double heading{0.0};
  double s{0.0};
  double speed_limit{0.0};
};

struct PathProjection {
  double s{0.0};
  double d{0.0};    // signed lateral offset, positive left of the path direction
  double lag{0.0};  // tangential residual; zero unless clamped to a vertex
  std::size_t segment{0};
  double tx{1.0};   // unit tangent of `segment`
  double ty{0.0};
  bool clamped{false};
  double distance() const;
};

struct ReferencePoint {
  double x{0.0};
  double y{0.0};
  double speed_limit{0.0};
};

/// Single drivable corridor around a reference polyline.
class MapModel {
 public:
  MapModel() = default;
  MapModel(const std::vector<ReferencePoint>& reference, std::vector<Point2> left_boundary,
           std::vector<Point2> right_boundary);

  bool empty() const { return path_.empty(); }
  std::span<const PathPoint> reference_path() const { return path_; }
  std::span<const Point2> left_boundary() const { return left_; }
  std::span<const Point2> right_boundary() const { return right_; }
  double length() const { return path_.empty() ? 0.0 : path_.back().s; }
  std::size_t segment_count() const { return path_.size() < 2 ? 0 : path_.size() - 1; }

  /// Exhaustive closest-segment projection.
  PathProjection project(double x, double y) const;
  /// Local descent from `hint`; exact on paths whose curvature radius exceeds
  /// the query's lateral distance.
  PathProjection project(double x, double y, std::size_t hint) const;

  Point2 position_at(double s) const;
  double heading_at(double s) const;

  double segment_speed_limit(std::size_t segment) const { return path_[segment].speed_limit; }
  /// Distance from the path to the left/right boundary, constant per segment.
  double segment_left_width(std::size_t segment) const { return seg_left_width_[segment]; }
  double segment_right_width(std::size_t segment) const { return seg_right_width_[segment]; }
  std::size_t segment_at(double s) const;

 private:
  PathProjection project_onto(std::size_t segment, double x, double y) const;

  std::vector<PathPoint> path_;
  std::vector<Point2> left_;
  std::vector<Point2> right_;
  std::vector<double> seg_left_width_;
  std::vector<double> seg_right_width_;
};

/// Corridor whose boundaries are the reference offset by `left` and `right`
/// metres along the vertex normals (bisector of the adjacent segments).
MapModel make_corridor(const std::vector<ReferencePoint>& reference, double left, double right);

inline constexpr double kMaxProjectionDistance = 50.0;

/// Arclength and signed lateral offset of (x, y). Throws ProjectionError beyond
/// 50 m and ConfigError on an empty map.
std::pair<double, double> frenet_project(const MapModel& map, double x, double y);

struct EgoSpec {
  AgentState init;
  double length{4.5};
  double width{1.8};
  double wheelbase{2.7};
  std::optional<TrajectorySample> log;  // expert drive, used for progress and filtering
};

struct AgentTrack {
  AgentInfo info;
  TrajectorySample log;
  bool extrapolated{false};
};

struct Scenario {
  std::string name;
  double sim_dt{0.1};
  double duration{15.0};
  MapModel map;
  EgoSpec ego;
  std::vector<AgentTrack> agents;

  int step_count() const;
  const AgentTrack& agent(std::string_view id) const;
  /// Throws InvariantError naming the offending field.
  void validate() const;
};

/// Appends constant-state samples until the log covers [0, duration].
/// Returns true if anything was appended.
bool extend_to_duration(AgentTrack& track, double duration);

/// Fills yaw_rate from forward heading differences (last sample repeats).
void fill_yaw_rates(std::vector<AgentState>& states, double dt);

}  // namespace loopbench

#pragma once

#include <array>
#include <optional>
#include <vector>

#include "loopbench/scene.hpp"

namespace loopbench {

/// Oriented rectangle: center, heading and full length/width.
struct Box {
  double x{0.0};
  double y{0.0};
  double heading{0.0};
  double length{1.0};
  double width{1.0};

  std::array<Point2, 4> corners() const;
};

/// Separating-axis overlap test; touching boxes count as overlapping.
bool check_collision(const Box& a, const Box& b);

/// Intersection polygon of two boxes (empty when disjoint).
std::vector<Point2> intersection_polygon(const Box& a, const Box& b);

/// Area centroid of the intersection, or nullopt when the boxes are disjoint.
std::optional<Point2> contact_point(const Box& a, const Box& b);

}  // namespace loopbench

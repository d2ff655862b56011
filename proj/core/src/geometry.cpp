#include "loopbench/geometry.hpp"

#include <cmath>

namespace loopbench {

namespace {

double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

// Sutherland-Hodgman against one counter-clockwise edge.
std::vector<Point2> clip(const std::vector<Point2>& poly, const Point2& e0, const Point2& e1) {
  std::vector<Point2> out;
  if (poly.empty()) return out;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& cur = poly[i];
    const Point2& prev = poly[(i + poly.size() - 1) % poly.size()];
    const double dc = cross(e0, e1, cur);
    const double dp = cross(e0, e1, prev);
    if (dc >= 0.0) {
      if (dp < 0.0) {
        const double t = dp / (dp - dc);
        out.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
      }
      out.push_back(cur);
    } else if (dp >= 0.0) {
      const double t = dp / (dp - dc);
      out.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
    }
  }
  return out;
}

}  // namespace

std::array<Point2, 4> Box::corners() const {
  const double c = std::cos(heading);
  const double s = std::sin(heading);
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  // Counter-clockwise starting at front-right.
  return {Point2{x + c * hl + s * hw, y + s * hl - c * hw}, Point2{x + c * hl - s * hw, y + s * hl + c * hw},
          Point2{x - c * hl - s * hw, y - s * hl + c * hw}, Point2{x - c * hl + s * hw, y - s * hl - c * hw}};
}

bool check_collision(const Box& a, const Box& b) {
  const double dx = b.x - a.x;
  const double dy = b.y - a.y;
  const std::array<double, 2> ha{a.heading, b.heading};
  for (double h : ha) {
    for (int k = 0; k < 2; ++k) {
      const double ax = k == 0 ? std::cos(h) : -std::sin(h);
      const double ay = k == 0 ? std::sin(h) : std::cos(h);
      const auto radius = [&](const Box& bx) {
        const double c = std::cos(bx.heading);
        const double s = std::sin(bx.heading);
        return 0.5 * bx.length * std::abs(c * ax + s * ay) + 0.5 * bx.width * std::abs(-s * ax + c * ay);
      };
      if (std::abs(dx * ax + dy * ay) > radius(a) + radius(b)) return false;
    }
  }
  return true;
}

std::vector<Point2> intersection_polygon(const Box& a, const Box& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  std::vector<Point2> poly(cb.begin(), cb.end());
  for (std::size_t i = 0; i < 4 && !poly.empty(); ++i) poly = clip(poly, ca[i], ca[(i + 1) % 4]);
  return poly;
}

std::optional<Point2> contact_point(const Box& a, const Box& b) {
  if (!check_collision(a, b)) return std::nullopt;
  const auto poly = intersection_polygon(a, b);
  if (poly.empty()) return Point2{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)};
  double area = 0.0;
  double cx = 0.0;
  double cy = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2& p = poly[i];
    const Point2& q = poly[(i + 1) % poly.size()];
    const double w = p.x * q.y - q.x * p.y;
    area += w;
    cx += (p.x + q.x) * w;
    cy += (p.y + q.y) * w;
  }
  if (std::abs(area) < 1e-12) {
    // Degenerate (touching) contact: average of the clipped vertices.
    Point2 m;
    for (const auto& p : poly) {
      m.x += p.x / static_cast<double>(poly.size());
      m.y += p.y / static_cast<double>(poly.size());
    }
    return m;
  }
  return Point2{cx / (3.0 * area), cy / (3.0 * area)};
}

}  // namespace loopbench

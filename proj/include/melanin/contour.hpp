#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "melanin/error.hpp"

namespace melanin {

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// Shoelace area; positive for anticlockwise order in
/// a y-up frame.
inline double signed_area(const std::vector<Point2>& pts) {
  if (pts.size() < 3) return 0.0;
  const Point2 o = pts.front();
  double a = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Point2& p = pts[i];
    const Point2& q = pts[(i + 1) % pts.size()];
    a += (p.x - o.x) * (q.y - o.y) - (q.x - o.x) * (p.y - o.y);
  }
  return 0.5 * a;
}

/// Closed polygonal boundary, anticlockwise in a y-up frame (positive
/// signed area). The last point connects back to the first.
///
/// Geometry is evaluated relative to the bounding-box corner, so integer
/// translations of integer-coordinate contours reproduce every derived
/// quantity bit for bit.
class Contour {
 public:
  static constexpr std::size_t kMinPoints = 8;

  Contour() = default;

  explicit Contour(std::vector<Point2> pts) : points_(std::move(pts)) {
    if (points_.size() < kMinPoints) {
      throw InvalidArgument("Contour: need at least 8 points, got " +
                            std::to_string(points_.size()));
    }
    anchor_ = points_.front();
    for (const Point2& p : points_) {
      if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw InvalidArgument("Contour: non-finite point");
      anchor_.x = std::min(anchor_.x, p.x);
      anchor_.y = std::min(anchor_.y, p.y);
    }
    double a = 0.0, cx = 0.0, cy = 0.0;
    perimeter_ = 0.0;
    const std::size_t n = points_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 p = rel(points_[i]);
      const Point2 q = rel(points_[(i + 1) % n]);
      const double cross = p.x * q.y - q.x * p.y;
      a += cross;
      cx += (p.x + q.x) * cross;
      cy += (p.y + q.y) * cross;
      perimeter_ += std::hypot(q.x - p.x, q.y - p.y);
    }
    area_ = 0.5 * a;
    if (!(area_ > 0.0)) {
      throw InvalidArgument("Contour: points must run anticlockwise around a positive area");
    }
    centroid_rel_ = {cx / (3.0 * a), cy / (3.0 * a)};
  }

  /// Builds a contour from either orientation.
  static Contour oriented(std::vector<Point2> pts) {
    if (signed_area(pts) < 0.0) std::reverse(pts.begin(), pts.end());
    return Contour(std::move(pts));
  }

  const std::vector<Point2>& points() const noexcept { return points_; }
  std::size_t size() const noexcept { return points_.size(); }
  double perimeter() const noexcept { return perimeter_; }
  double area() const noexcept { return area_; }
  Point2 centroid() const noexcept {
    return {anchor_.x + centroid_rel_.x, anchor_.y + centroid_rel_.y};
  }

  /// Points expressed relative to the centroid.
  std::vector<Point2> centered() const {
    std::vector<Point2> out(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) {
      const Point2 p = rel(points_[i]);
      out[i] = {p.x - centroid_rel_.x, p.y - centroid_rel_.y};
    }
    return out;
  }

 private:
  Point2 rel(const Point2& p) const { return {p.x - anchor_.x, p.y - anchor_.y}; }

  std::vector<Point2> points_;
  Point2 anchor_{};
  Point2 centroid_rel_{};
  double perimeter_ = 0.0;
  double area_ = 0.0;
};

}  // namespace melanin

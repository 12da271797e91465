#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "melanin/contour.hpp"
#include "melanin/error.hpp"

namespace melanin {

enum class FeatureKind { RVF, SF, TAF };

inline const char* to_string(FeatureKind k) {
  switch (k) {
    case FeatureKind::RVF: return "RVF";
    case FeatureKind::SF: return "SF";
    case FeatureKind::TAF: return "TAF";
  }
  return "?";
}

/// N samples of one contour descriptor, mapped into [0,1].
struct FeatureCurve {
  FeatureKind kind = FeatureKind::RVF;
  std::vector<double> samples;
  double scale = 1.0;  // RVF/SF: divisor applied (curve max); TAF: 2*pi
  double total_turning = 0.0;  // TAF only: unwrapped angle gained over one loop
  bool warning = false;

  /// Samples before normalisation (RVF, SF).
  std::vector<double> raw() const {
    std::vector<double> out(samples);
    for (double& v : out) v *= scale;
    return out;
  }
};

namespace detail {

inline double cross(const Point2& a, const Point2& b) { return a.x * b.y - a.y * b.x; }

inline void check_samples(int n) {
  if (n < 1) throw InvalidArgument("descriptor sample count must be positive");
}

inline bool inside(const std::vector<Point2>& poly, Point2 o) {
  int winding = 0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a{poly[i].x - o.x, poly[i].y - o.y};
    const Point2 b{poly[(i + 1) % n].x - o.x, poly[(i + 1) % n].y - o.y};
    if (a.y <= 0.0) {
      if (b.y > 0.0 && cross(a, b) > 0.0) ++winding;
    } else if (b.y <= 0.0 && cross(a, b) < 0.0) {
      --winding;
    }
  }
  return winding != 0;
}

inline double segment_distance(Point2 p, Point2 a, Point2 b) {
  const double ex = b.x - a.x, ey = b.y - a.y;
  const double len2 = ex * ex + ey * ey;
  double t = len2 > 0.0 ? ((p.x - a.x) * ex + (p.y - a.y) * ey) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * ex), p.y - (a.y + t * ey));
}

// Interior point farthest from the boundary, searched on a 64x64 grid.
inline Point2 deepest_point(const std::vector<Point2>& poly) {
  double x0 = poly[0].x, x1 = x0, y0 = poly[0].y, y1 = y0;
  for (const Point2& p : poly) {
    x0 = std::min(x0, p.x);
    x1 = std::max(x1, p.x);
    y0 = std::min(y0, p.y);
    y1 = std::max(y1, p.y);
  }
  constexpr int kGrid = 64;
  Point2 best = poly[0];
  double best_d = -1.0;
  for (int j = 0; j <= kGrid; ++j) {
    for (int i = 0; i <= kGrid; ++i) {
      const Point2 q{x0 + (x1 - x0) * i / kGrid, y0 + (y1 - y0) * j / kGrid};
      if (!inside(poly, q)) continue;
      double d = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < poly.size(); ++k) {
        d = std::min(d, segment_distance(q, poly[k], poly[(k + 1) % poly.size()]));
      }
      if (d > best_d) {
        best_d = d;
        best = q;
      }
    }
  }
  return best;
}

inline void normalize_by_max(FeatureCurve& c) {
  const double m = *std::max_element(c.samples.begin(), c.samples.end());
  if (!(m > 0.0)) {
    c.scale = 1.0;
    c.warning = true;
    std::fill(c.samples.begin(), c.samples.end(), 0.0);
    return;
  }
  c.scale = m;
  for (double& v : c.samples) v = std::clamp(v / m, 0.0, 1.0);
}

}  // namespace detail

/// Distance from the centroid to the contour along n directions
/// phi_k = 2*pi*k/n measured anticlockwise from +x. Where a ray leaves and
/// re-enters the figure the farthest crossing counts. Normalised by the
/// curve maximum.
inline FeatureCurve radius_vector(const Contour& c, int n = 100) {
  detail::check_samples(n);
  FeatureCurve out{FeatureKind::RVF, std::vector<double>(static_cast<std::size_t>(n), 0.0)};
  auto pts = c.centered();
  if (!detail::inside(pts, {0.0, 0.0})) {
    // Centroid outside the figure: use the deepest interior point instead.
    const Point2 o = detail::deepest_point(pts);
    for (Point2& p : pts) p = {p.x - o.x, p.y - o.y};
    out.warning = true;
  }
  const std::size_t m = pts.size();
  for (int k = 0; k < n; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / n;
    const Point2 d{std::cos(phi), std::sin(phi)};
    double far = -1.0;
    for (std::size_t i = 0; i < m; ++i) {
      const Point2& p = pts[i];
      const Point2& q = pts[(i + 1) % m];
      const Point2 e{q.x - p.x, q.y - p.y};
      const double denom = detail::cross(d, e);
      if (std::abs(denom) < 1e-12) continue;
      const double t = detail::cross(p, e) / denom;
      const double s = detail::cross(p, d) / denom;
      if (t >= 0.0 && s >= -1e-12 && s <= 1.0 + 1e-12) far = std::max(far, t);
    }
    if (far < 0.0) {
      far = 0.0;
      out.warning = true;
    }
    out.samples[static_cast<std::size_t>(k)] = far;
  }
  detail::normalize_by_max(out);
  return out;
}

/// S(phi) = max over contour points of x cos(phi) + y sin(phi), with the
/// centroid as origin. Normalised by the curve maximum.
inline FeatureCurve support_function(const Contour& c, int n = 100) {
  detail::check_samples(n);
  FeatureCurve out{FeatureKind::SF, std::vector<double>(static_cast<std::size_t>(n), 0.0)};
  const auto pts = c.centered();
  for (int k = 0; k < n; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / n;
    const double cs = std::cos(phi), sn = std::sin(phi);
    double best = -std::numeric_limits<double>::infinity();
    for (const Point2& p : pts) best = std::max(best, p.x * cs + p.y * sn);
    out.samples[static_cast<std::size_t>(k)] = best;
  }
  detail::normalize_by_max(out);
  return out;
}

/// Points spaced evenly by arclength around the contour, starting at its
/// first point, in centroid-relative coordinates.
inline std::vector<Point2> resample_arclength(const Contour& c, int n) {
  const auto pts = c.centered();
  const std::size_t m = pts.size();
  std::vector<double> cum(m + 1, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    const Point2& p = pts[i];
    const Point2& q = pts[(i + 1) % m];
    cum[i + 1] = cum[i] + std::hypot(q.x - p.x, q.y - p.y);
  }
  const double total = cum[m];
  std::vector<Point2> out(static_cast<std::size_t>(n));
  std::size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    const double s = total * k / n;
    while (seg + 1 < m && cum[seg + 1] <= s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0.0 ? (s - cum[seg]) / len : 0.0;
    const Point2& p = pts[seg];
    const Point2& q = pts[(seg + 1) % m];
    out[static_cast<std::size_t>(k)] = {p.x + f * (q.x - p.x), p.y + f * (q.y - p.y)};
  }
  return out;
}

/// Tangent direction along the contour, sampled at n arclength-uniform
/// points from the start point. Tangents use the 5-point central difference
/// stencil; the angle is unwrapped and mapped from [phi0, phi0 + 2*pi] to
/// [0,1].
inline FeatureCurve tangent_angle(const Contour& c, int n = 100) {
  detail::check_samples(n);
  if (n < 5) throw InvalidArgument("tangent_angle: need at least 5 samples");
  const auto q = resample_arclength(c, n);
  auto at = [&](int k) { return q[static_cast<std::size_t>(((k % n) + n) % n)]; };
  std::vector<double> angle(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const Point2 a = at(k - 2), b = at(k - 1), d = at(k + 1), e = at(k + 2);
    const double tx = (-e.x + 8.0 * d.x - 8.0 * b.x + a.x) / 12.0;
    const double ty = (-e.y + 8.0 * d.y - 8.0 * b.y + a.y) / 12.0;
    angle[static_cast<std::size_t>(k)] = std::atan2(ty, tx);
  }
  auto wrap = [](double d) {
    while (d > std::numbers::pi) d -= 2.0 * std::numbers::pi;
    while (d <= -std::numbers::pi) d += 2.0 * std::numbers::pi;
    return d;
  };
  FeatureCurve out{FeatureKind::TAF, std::vector<double>(static_cast<std::size_t>(n), 0.0)};
  out.scale = 2.0 * std::numbers::pi;
  double unwrapped = 0.0;  // relative to phi0
  for (int k = 1; k < n; ++k) {
    unwrapped += wrap(angle[static_cast<std::size_t>(k)] - angle[static_cast<std::size_t>(k - 1)]);
    // Concave stretches can dip below phi0 or overshoot phi0 + 2*pi.
    out.samples[static_cast<std::size_t>(k)] = std::clamp(unwrapped / out.scale, 0.0, 1.0);
  }
  unwrapped += wrap(angle[0] - angle[static_cast<std::size_t>(n - 1)]);
  out.total_turning = unwrapped;
  if (std::abs(out.total_turning - 2.0 * std::numbers::pi) > 0.05) out.warning = true;
  return out;
}

/// Rotates the point list so it starts at the point farthest from the
/// centroid; among near-ties the smallest polar angle in [0, 2*pi) wins.
inline Contour start_point_canonicalize(const Contour& c) {
  const auto pts = c.centered();
  double max_d = 0.0;
  for (const Point2& p : pts) max_d = std::max(max_d, std::hypot(p.x, p.y));
  const double tol = 1e-9 * std::max(1.0, max_d);
  std::size_t best = 0;
  double best_angle = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (std::hypot(pts[i].x, pts[i].y) < max_d - tol) continue;
    double a = std::atan2(pts[i].y, pts[i].x);
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    if (a < best_angle) {
      best_angle = a;
      best = i;
    }
  }
  if (best == 0) return c;
  std::vector<Point2> rotated(c.points());
  std::rotate(rotated.begin(), rotated.begin() + static_cast<std::ptrdiff_t>(best), rotated.end());
  return Contour(std::move(rotated));
}

}  // namespace melanin

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "melanin/components.hpp"
#include "melanin/error.hpp"
#include "melanin/image.hpp"

namespace melanin {

/// Concentric pupil/iris circles plus the angular span to unwrap.
///
/// Angles are in degrees, measured anticlockwise as seen on screen from the
/// +x axis; the default 180..360 span is the lower half of the ring.
struct IrisGeometry {
  double center_x = 0.0;
  double center_y = 0.0;
  double pupil_radius = 0.0;
  double iris_radius = 0.0;
  double span_start = 180.0;
  double span_end = 360.0;
  bool estimated = false;  // produced by detect_circles rather than supplied
  bool clipped = false;    // detection saw the pupil touching the image border

  double span() const noexcept { return span_end - span_start; }

  void validate() const {
    if (!std::isfinite(center_x) || !std::isfinite(center_y)) {
      throw InvalidArgument("IrisGeometry: non-finite center");
    }
    if (!(pupil_radius > 0.0 && pupil_radius < iris_radius) || !std::isfinite(iris_radius)) {
      throw InvalidArgument("IrisGeometry: need 0 < pupil_radius < iris_radius (got " +
                            std::to_string(pupil_radius) + ", " + std::to_string(iris_radius) +
                            ")");
    }
    if (!(span_start < span_end) || span() > 360.0) {
      throw InvalidArgument("IrisGeometry: angular span must satisfy start < end, width <= 360");
    }
  }
};

struct IrisStrip {
  GrayImage pixels;
  bool clipped = false;  // some samples fell outside the source image

  int rows() const noexcept { return pixels.height(); }
  int cols() const noexcept { return pixels.width(); }
};

struct StripSize {
  int rows = 150;
  int cols = 300;
};

enum class UnwrapPreset { Standard, Large, OneDegreeArc };

/// 150x300 is the default; 256x512 and the 1-degree half-ring (150x180)
/// are the alternative sizes reported for the method.
inline StripSize preset_size(UnwrapPreset p) {
  switch (p) {
    case UnwrapPreset::Large: return {256, 512};
    case UnwrapPreset::OneDegreeArc: return {150, 180};
    case UnwrapPreset::Standard: break;
  }
  return {150, 300};
}

/// Maps the iris ring to a rows x cols rectangle. Row r samples radius
/// pupil + r/(rows-1) * (iris - pupil); column c samples angle
/// span_start + c * span / cols, so columns advance anticlockwise and a
/// rotation of the eye becomes a column shift.
inline IrisStrip unwrap_iris(const GrayImage& img, const IrisGeometry& geom, int rows = 150,
                             int cols = 300) {
  geom.validate();
  if (rows < 8 || cols < 8) throw InvalidArgument("unwrap_iris: strip must be at least 8x8");
  if (img.empty()) throw InvalidArgument("unwrap_iris: empty image");
  std::vector<double> out(static_cast<std::size_t>(rows) * cols);
  bool clipped = false;
  const double dr = (geom.iris_radius - geom.pupil_radius) / (rows - 1);
  const double step = geom.span() / cols * std::numbers::pi / 180.0;
  const double start = geom.span_start * std::numbers::pi / 180.0;
  for (int c = 0; c < cols; ++c) {
    const double theta = start + c * step;
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    for (int r = 0; r < rows; ++r) {
      const double radius = geom.pupil_radius + r * dr;
      const double x = geom.center_x + radius * ct;
      const double y = geom.center_y - radius * st;
      out[static_cast<std::size_t>(r) * cols + c] = img.sample_bilinear(x, y, clipped);
    }
  }
  return {GrayImage::clamped(cols, rows, std::move(out)), clipped};
}

namespace detail {

// Algebraic (Kasa) circle fit; returns false when the system is singular.
inline bool fit_circle(const std::vector<Pixel>& pts, double& cx, double& cy, double& r) {
  // Normal equations for x^2 + y^2 + D x + E y + F = 0.
  std::array<std::array<double, 4>, 3> m{};
  for (const Pixel& p : pts) {
    const double x = p.x, y = p.y, z = -(x * x + y * y);
    const std::array<double, 3> row{x, y, 1.0};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i][j] += row[i] * row[j];
      m[i][3] += row[i] * z;
    }
  }
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int i = col + 1; i < 3; ++i) {
      if (std::abs(m[i][col]) > std::abs(m[piv][col])) piv = i;
    }
    if (std::abs(m[piv][col]) < 1e-9) return false;
    std::swap(m[col], m[piv]);
    for (int i = 0; i < 3; ++i) {
      if (i == col) continue;
      const double f = m[i][col] / m[col][col];
      for (int j = col; j < 4; ++j) m[i][j] -= f * m[col][j];
    }
  }
  const double d = m[0][3] / m[0][0];
  const double e = m[1][3] / m[1][1];
  const double f = m[2][3] / m[2][2];
  cx = -d / 2.0;
  cy = -e / 2.0;
  const double rr = cx * cx + cy * cy - f;
  if (!(rr > 0.0)) return false;
  r = std::sqrt(rr);
  return true;
}

inline double ring_mean(const GrayImage& img, double cx, double cy, double radius) {
  constexpr int kAngles = 360;
  double sum = 0.0;
  int n = 0;
  for (int a = 0; a < kAngles; ++a) {
    const double t = 2.0 * std::numbers::pi * a / kAngles;
    const double x = cx + radius * std::cos(t);
    const double y = cy - radius * std::sin(t);
    if (x < 0.0 || y < 0.0 || x > img.width() - 1 || y > img.height() - 1) continue;
    bool unused = false;
    sum += img.sample_bilinear(x, y, unused);
    ++n;
  }
  return n >= kAngles / 4 ? sum / n : std::nan("");
}

}  // namespace detail

/// Best-effort circle estimate for images that arrive without geometry:
/// the pupil is the largest dark blob (circle-fitted on its interior
/// boundary), the iris edge is the radius of steepest outward brightening.
/// The result is always marked `estimated`.
inline IrisGeometry detect_circles(const GrayImage& img) {
  if (img.empty()) throw InvalidArgument("detect_circles: empty image");
  const auto [lo_it, hi_it] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  const double lo = *lo_it, hi = *hi_it;
  constexpr const char* kAdvice = "; supply the iris geometry manually";
  if (hi - lo < 0.05) throw DataError(std::string("detect_circles: no dark region found") + kAdvice);

  const double threshold = lo + 0.25 * (hi - lo);
  BinaryMask dark(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) dark.bits[i] = img.pixels()[i] <= threshold;
  const Labeling lab = label_components(dark);
  const Component* pupil = nullptr;
  for (const Component& c : lab.components) {
    if (!pupil || c.area > pupil->area) pupil = &c;
  }
  if (!pupil || pupil->area < 20) {
    throw DataError(std::string("detect_circles: no dark region found") + kAdvice);
  }

  IrisGeometry g;
  g.estimated = true;
  g.clipped = pupil->touches_border;

  // Edge pixels of the blob that are not image-border pixels.
  std::vector<Pixel> edge;
  for (std::size_t idx : pupil->pixels) {
    const int x = static_cast<int>(idx % img.width());
    const int y = static_cast<int>(idx / img.width());
    if (x == 0 || y == 0 || x == img.width() - 1 || y == img.height() - 1) continue;
    if (!lab.is(x - 1, y, pupil->label) || !lab.is(x + 1, y, pupil->label) ||
        !lab.is(x, y - 1, pupil->label) || !lab.is(x, y + 1, pupil->label)) {
      edge.push_back({x, y});
    }
  }
  double cx = 0, cy = 0, r = 0;
  if (edge.size() >= 10 && detail::fit_circle(edge, cx, cy, r)) {
    r += 0.5;  // edge pixel centres sit half a pixel inside the boundary
  } else {
    for (std::size_t idx : pupil->pixels) {
      cx += static_cast<double>(idx % img.width());
      cy += static_cast<double>(idx / img.width());
    }
    cx /= static_cast<double>(pupil->area);
    cy /= static_cast<double>(pupil->area);
    r = std::sqrt(static_cast<double>(pupil->area) / std::numbers::pi);
  }
  g.center_x = cx;
  g.center_y = cy;
  g.pupil_radius = r;

  const int r_min = static_cast<int>(std::ceil(1.3 * r + 3.0));
  const int r_max = static_cast<int>(std::max(img.width(), img.height()));
  std::vector<double> profile(static_cast<std::size_t>(r_max) + 2, std::nan(""));
  for (int k = std::max(1, r_min - 1); k <= r_max + 1 && k < static_cast<int>(profile.size()); ++k) {
    profile[k] = detail::ring_mean(img, cx, cy, k);
  }
  double best = -1.0;
  int best_r = -1;
  for (int k = r_min; k + 1 < static_cast<int>(profile.size()); ++k) {
    if (std::isnan(profile[k - 1]) || std::isnan(profile[k + 1])) continue;
    const double grad = profile[k + 1] - profile[k - 1];
    if (grad > best) {
      best = grad;
      best_r = k;
    }
  }
  g.iris_radius = best_r > 0 ? best_r : 2.5 * r;
  if (g.iris_radius <= g.pupil_radius) g.iris_radius = g.pupil_radius * 2.0;
  return g;
}

}  // namespace melanin

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <vector>

#include "melanin/components.hpp"
#include "melanin/contour.hpp"
#include "melanin/error.hpp"
#include "melanin/image.hpp"

namespace melanin {

// ---------------------------------------------------------------------------
// Histogram model
// ---------------------------------------------------------------------------

struct HistogramModel {
  static constexpr int kBins = 256;
  static constexpr double kSigmaFloor = 1.0 / kBins;

  std::vector<std::size_t> bins = std::vector<std::size_t>(kBins, 0);  // raw counts
  double amp = 0.0;    // fitted peak height, in (smoothed) counts
  double mean = 0.0;   // fitted centre in [0,1]
  double sigma = 0.0;  // fitted spread, > 0
  bool converged = false;
  bool warning = false;  // moment fallback was used
  int iterations = 0;

  static double bin_center(int k) { return (k + 0.5) / kBins; }
  static int bin_of(double v) {
    return std::clamp(static_cast<int>(std::floor(v * kBins)), 0, kBins - 1);
  }

  double evaluate(double x) const {
    const double z = (x - mean) / sigma;
    return amp * std::exp(-0.5 * z * z);
  }
};

/// 5-bin moving average; the window is truncated at the ends.
inline std::vector<double> smooth_histogram(const std::vector<std::size_t>& bins) {
  const int n = static_cast<int>(bins.size());
  std::vector<double> out(bins.size());
  for (int k = 0; k < n; ++k) {
    double s = 0.0;
    int m = 0;
    for (int j = std::max(0, k - 2); j <= std::min(n - 1, k + 2); ++j) {
      s += static_cast<double>(bins[j]);
      ++m;
    }
    out[k] = s / m;
  }
  return out;
}

namespace detail {

struct GaussFit {
  double amp, mean, sigma, cost;
  bool converged;
  int iterations;
};

inline double gauss_cost(const std::vector<double>& y, double a, double mu, double s) {
  double c = 0.0;
  for (int k = 0; k < static_cast<int>(y.size()); ++k) {
    const double z = (HistogramModel::bin_center(k) - mu) / s;
    const double r = y[k] - a * std::exp(-0.5 * z * z);
    c += r * r;
  }
  return c;
}

inline bool solve3(std::array<std::array<double, 4>, 3> m, std::array<double, 3>& x) {
  for (int col = 0; col < 3; ++col) {
    int piv = col;
    for (int i = col + 1; i < 3; ++i) {
      if (std::abs(m[i][col]) > std::abs(m[piv][col])) piv = i;
    }
    if (!(std::abs(m[piv][col]) > 0.0)) return false;
    std::swap(m[col], m[piv]);
    for (int i = col + 1; i < 3; ++i) {
      const double f = m[i][col] / m[col][col];
      for (int j = col; j < 4; ++j) m[i][j] -= f * m[col][j];
    }
  }
  for (int i = 2; i >= 0; --i) {
    double s = m[i][3];
    for (int j = i + 1; j < 3; ++j) s -= m[i][j] * x[j];
    x[i] = s / m[i][i];
  }
  return std::isfinite(x[0]) && std::isfinite(x[1]) && std::isfinite(x[2]);
}

// Levenberg-Marquardt on A*exp(-(x-mu)^2 / (2 s^2)) against y at bin centres.
inline GaussFit levenberg_marquardt(const std::vector<double>& y, double a, double mu, double s,
                                    int max_iter) {
  double cost = gauss_cost(y, a, mu, s);
  double damping = 1e-3;
  for (int it = 1; it <= max_iter; ++it) {
    std::array<std::array<double, 4>, 3> m{};
    for (int k = 0; k < static_cast<int>(y.size()); ++k) {
      const double x = HistogramModel::bin_center(k);
      const double d = x - mu;
      const double e = std::exp(-0.5 * d * d / (s * s));
      const double r = y[k] - a * e;
      const std::array<double, 3> j{e, a * e * d / (s * s), a * e * d * d / (s * s * s)};
      for (int p = 0; p < 3; ++p) {
        for (int q = 0; q < 3; ++q) m[p][q] += j[p] * j[q];
        m[p][3] += j[p] * r;
      }
    }
    for (int p = 0; p < 3; ++p) m[p][p] += damping * std::max(m[p][p], 1e-30);
    std::array<double, 3> step{};
    if (!solve3(m, step)) return {a, mu, s, cost, false, it};
    const double na = a + step[0], nmu = mu + step[1], ns = std::abs(s + step[2]);
    const double ncost = ns > 0.0 ? gauss_cost(y, na, nmu, ns) : cost + 1.0;
    const bool small = std::abs(step[0]) <= 1e-10 * (1.0 + std::abs(a)) &&
                       std::abs(step[1]) <= 1e-10 * (1.0 + std::abs(mu)) &&
                       std::abs(step[2]) <= 1e-10 * (1.0 + std::abs(s));
    if (ncost <= cost) {
      const bool flat = cost - ncost <= 1e-15 * std::max(cost, 1e-300);
      a = na;
      mu = nmu;
      s = ns;
      cost = ncost;
      damping = std::max(damping / 10.0, 1e-12);
      if (small || flat) return {a, mu, s, cost, true, it};
    } else {
      damping *= 10.0;
      if (small || damping > 1e16) return {a, mu, s, cost, true, it};
    }
  }
  return {a, mu, s, cost, false, max_iter};
}

}  // namespace detail

/// Fits a single bell to the smoothed 256-bin intensity histogram. Two LM
/// runs start at the histogram mode, one with the sample deviation and one
/// with the half-maximum width of the mode as the initial spread; the lower
/// residual wins, which locks onto the dominant peak of a multi-modal
/// histogram. Degenerate or non-converging fits fall back to the sample
/// moments with `warning` set.
inline HistogramModel fit_gaussian(const GrayImage& img) {
  if (img.empty()) throw InvalidArgument("fit_gaussian: empty image");
  if (img.size() < static_cast<std::size_t>(HistogramModel::kBins)) {
    throw InvalidArgument("fit_gaussian: need at least 256 pixels");
  }
  constexpr int kMaxIter = 200;
  HistogramModel model;
  double sum = 0.0;
  for (double v : img.pixels()) {
    ++model.bins[HistogramModel::bin_of(v)];
    sum += v;
  }
  const double n = static_cast<double>(img.size());
  const double sample_mean = sum / n;
  double var = 0.0;
  for (double v : img.pixels()) var += (v - sample_mean) * (v - sample_mean);
  const double sample_sd = std::sqrt(var / n);

  const auto y = smooth_histogram(model.bins);
  const int mode = static_cast<int>(std::max_element(y.begin(), y.end()) - y.begin());
  const double peak = y[mode];

  auto fallback = [&]() {
    model.mean = std::clamp(sample_mean, 0.0, 1.0);
    model.sigma = std::max(sample_sd, HistogramModel::kSigmaFloor);
    model.amp = std::max(peak, 1.0);
    model.converged = false;
    model.warning = true;
    return model;
  };
  if (sample_sd < HistogramModel::kSigmaFloor) return fallback();

  // Half-maximum width around the mode.
  int left = mode, right = mode;
  while (left > 0 && y[left] > 0.5 * peak) --left;
  while (right < HistogramModel::kBins - 1 && y[right] > 0.5 * peak) ++right;
  const double hwhm = 0.5 * (right - left) / HistogramModel::kBins;
  const double sd_hwhm = std::max(hwhm / std::sqrt(2.0 * std::log(2.0)), HistogramModel::kSigmaFloor);

  std::optional<detail::GaussFit> best;
  for (double s0 : {sample_sd, sd_hwhm}) {
    const auto fit = detail::levenberg_marquardt(y, peak, HistogramModel::bin_center(mode), s0, kMaxIter);
    const bool valid = fit.converged && std::isfinite(fit.cost) && fit.amp > 0.0 &&
                       fit.sigma > 0.0 && fit.mean >= 0.0 && fit.mean <= 1.0;
    if (valid && (!best || fit.cost < best->cost)) best = fit;
  }
  if (!best) return fallback();
  model.amp = best->amp;
  model.mean = best->mean;
  model.sigma = best->sigma;
  model.iterations = best->iterations;
  model.converged = true;
  if (model.sigma < HistogramModel::kSigmaFloor) {
    model.sigma = HistogramModel::kSigmaFloor;
    model.warning = true;
  }
  return model;
}

// ---------------------------------------------------------------------------
// Thresholds
// ---------------------------------------------------------------------------

/// Five increasing cut points t1..t5 with implicit t0 = 0 and t6 = 1.
struct ThresholdSet {
  std::array<double, 5> t{};
  double mean_used = 0.0;
  double sigma_used = 0.0;
  bool warning = false;  // placement spread or centre had to be adjusted

  /// t^i for i in 0..6.
  double operator[](int i) const {
    if (i <= 0) return 0.0;
    if (i >= 6) return 1.0;
    return t[static_cast<std::size_t>(i - 1)];
  }
};

inline const double kOuterOffset = std::sqrt(2.0 * std::log(3.0));  // bell at A/3
inline const double kInnerOffset = std::sqrt(2.0 * std::log(1.5));  // bell at 2A/3

/// The bell peak gives t3; the levels A/3 and 2A/3 cut the bell at
/// mean -/+ sigma*sqrt(2 ln 3) and mean -/+ sigma*sqrt(2 ln 1.5).
/// Thresholds are kept strictly inside (0.005, 0.995) by shrinking the
/// spread used for placement.
inline ThresholdSet compute_thresholds(const HistogramModel& model) {
  if (!std::isfinite(model.mean) || !std::isfinite(model.sigma) || !(model.sigma > 0.0)) {
    throw InvalidArgument("compute_thresholds: invalid histogram model");
  }
  constexpr double kLo = 0.005, kHi = 0.995, kSigmaMin = 1e-4;
  ThresholdSet ts;
  double mu = model.mean;
  const double mu_lo = kLo + kSigmaMin * kOuterOffset * 1.001;
  const double mu_hi = kHi - kSigmaMin * kOuterOffset * 1.001;
  if (mu < mu_lo || mu > mu_hi) {
    mu = std::clamp(mu, mu_lo, mu_hi);
    ts.warning = true;
  }
  double sigma = model.sigma;
  const double sigma_max = std::min(mu - kLo, kHi - mu) / kOuterOffset * (1.0 - 1e-9);
  if (sigma > sigma_max) {
    sigma = sigma_max;
    ts.warning = true;
  }
  if (sigma < kSigmaMin) {
    sigma = kSigmaMin;
    ts.warning = true;
  }
  ts.mean_used = mu;
  ts.sigma_used = sigma;
  ts.t = {mu - sigma * kOuterOffset, mu - sigma * kInnerOffset, mu, mu + sigma * kInnerOffset,
          mu + sigma * kOuterOffset};
  return ts;
}

// ---------------------------------------------------------------------------
// Slicing
// ---------------------------------------------------------------------------

/// Six band masks. Band i (1..5) holds t^{i-1} <= v < t^i; band 6 holds
/// t^5 <= v <= 1. Every pixel lands in exactly one band.
struct SlicedTemplate {
  std::array<BinaryMask, 6> masks;

  const BinaryMask& band(int i) const { return masks.at(static_cast<std::size_t>(i - 1)); }
  int width() const { return masks[0].width; }
  int height() const { return masks[0].height; }
};

inline int band_of(double v, const ThresholdSet& t) {
  for (int i = 1; i <= 5; ++i) {
    if (v < t[i]) return i;
  }
  return 6;
}

inline SlicedTemplate slice_image(const GrayImage& img, const ThresholdSet& t) {
  SlicedTemplate s;
  for (auto& m : s.masks) m = BinaryMask(img.width(), img.height());
  for (std::size_t i = 0; i < img.size(); ++i) {
    s.masks[static_cast<std::size_t>(band_of(img.pixels()[i], t) - 1)].bits[i] = 1;
  }
  return s;
}

// ---------------------------------------------------------------------------
// Object selection
// ---------------------------------------------------------------------------

struct SelectedObject {
  int template_index = 0;  // source band, 2..5
  int rank = 0;            // 1 = largest qualifying component
  std::vector<Pixel> pixels;
  Contour contour;
  std::size_t area = 0;
  bool placeholder = false;
};

struct ObjectSelection {
  std::vector<SelectedObject> objects;  // template-major, rank-minor
  bool degraded = false;
};

namespace detail {

// Pixel (x, y) in image rows maps to (x, height-1-y) so that anticlockwise
// on screen is positive signed area.
inline std::vector<Point2> to_frame(const std::vector<Pixel>& px, int height) {
  std::vector<Point2> out(px.size());
  for (std::size_t i = 0; i < px.size(); ++i) {
    out[i] = {static_cast<double>(px[i].x), static_cast<double>(height - 1 - px[i].y)};
  }
  return out;
}

inline Contour rectangle_contour(int x0, int y0, int x1, int y1, int height) {
  std::vector<Pixel> ring;
  for (int x = x0; x <= x1; ++x) ring.push_back({x, y0});
  for (int y = y0 + 1; y <= y1; ++y) ring.push_back({x1, y});
  for (int x = x1 - 1; x >= x0; --x) ring.push_back({x, y1});
  for (int y = y1 - 1; y > y0; --y) ring.push_back({x0, y});
  return Contour::oriented(to_frame(ring, height));
}

inline SelectedObject placeholder_object(const BinaryMask& mask, int band, int rank) {
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y) {
    for (int x = 0; x < mask.width; ++x) {
      if (!mask(x, y)) continue;
      x0 = std::min(x0, x);
      y0 = std::min(y0, y);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  }
  if (x1 - x0 < 2 || y1 - y0 < 2) {
    x0 = 0;
    y0 = 0;
    x1 = mask.width - 1;
    y1 = mask.height - 1;
  }
  SelectedObject o;
  o.template_index = band;
  o.rank = rank;
  o.contour = rectangle_contour(x0, y0, x1, y1, mask.height);
  o.area = static_cast<std::size_t>(x1 - x0 + 1) * static_cast<std::size_t>(y1 - y0 + 1);
  o.placeholder = true;
  return o;
}

}  // namespace detail

/// Outer contour of one labelled component, reduced to its largest simple
/// loop and oriented anticlockwise. Empty when the component is too thin to
/// enclose an area.
inline std::optional<Contour> component_contour(const Labeling& lab, int label) {
  const auto trace = trace_boundary(lab, label);
  const int h = lab.height;
  auto loop = largest_simple_loop(trace, [h](const std::vector<Pixel>& l) {
    return signed_area(detail::to_frame(l, h));
  });
  auto pts = detail::to_frame(loop, h);
  if (pts.size() < Contour::kMinPoints || signed_area(pts) == 0.0) return std::nullopt;
  return Contour::oriented(std::move(pts));
}

/// Drops the darkest and brightest bands and keeps the two largest
/// 8-connected components (area >= min_area) of each remaining band. A band
/// short of components contributes a bounding-box placeholder and marks the
/// selection degraded, so exactly eight objects always come back.
inline ObjectSelection select_objects(const SlicedTemplate& sliced, std::size_t min_area = 30) {
  ObjectSelection sel;
  for (int band = 2; band <= 5; ++band) {
    const BinaryMask& mask = sliced.band(band);
    const Labeling lab = label_components(mask);
    std::vector<const Component*> order;
    for (const Component& c : lab.components) {
      if (c.area >= min_area) order.push_back(&c);
    }
    std::sort(order.begin(), order.end(), [](const Component* a, const Component* b) {
      return a->area != b->area ? a->area > b->area : a->first < b->first;
    });
    int taken = 0;
    for (const Component* c : order) {
      if (taken == 2) break;
      auto contour = component_contour(lab, c->label);
      if (!contour) continue;
      SelectedObject o;
      o.template_index = band;
      o.rank = ++taken;
      o.area = c->area;
      o.contour = std::move(*contour);
      o.pixels.reserve(c->pixels.size());
      for (std::size_t idx : c->pixels) {
        o.pixels.push_back({static_cast<int>(idx % mask.width), static_cast<int>(idx / mask.width)});
      }
      sel.objects.push_back(std::move(o));
    }
    while (taken < 2) {
      sel.objects.push_back(detail::placeholder_object(mask, band, ++taken));
      sel.degraded = true;
    }
  }
  return sel;
}

}  // namespace melanin

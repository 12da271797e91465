#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "melanin/error.hpp"
#include "melanin/fft.hpp"
#include "melanin/image.hpp"

namespace melanin {

namespace detail {

// Affine map of v onto [0,1]; a flat field maps to 0.5.
inline void rescale_unit(std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = *lo, b = *hi;
  if (!(b > a)) {
    std::fill(v.begin(), v.end(), 0.5);
    return;
  }
  for (double& x : v) x = std::clamp((x - a) / (b - a), 0.0, 1.0);
}

}  // namespace detail

/// Illumination/reflectance separation in the log domain: the log image is
/// stretched to [0,1], exponentiated, and stretched to [0,1] again. The map
/// is strictly increasing in the input intensity.
inline GrayImage homomorphic_enhance(const GrayImage& img) {
  if (img.empty()) throw InvalidArgument("homomorphic_enhance: empty image");
  constexpr double kEps = 1e-6;
  std::vector<double> g(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), g.begin(),
                 [](double v) { return std::log(v + kEps); });
  detail::rescale_unit(g);
  for (double& x : g) x = std::exp(x);
  detail::rescale_unit(g);
  return GrayImage(img.width(), img.height(), std::move(g));
}

struct TikhonovParams {
  double lambda = 0.8;
  double psf_variance = 25.0;  // pixels^2
  int psf_size = 0;            // odd kernel side; 0 derives 6*sigma+1

  int kernel_size() const {
    if (psf_size > 0) return psf_size;
    int s = static_cast<int>(std::lround(6.0 * std::sqrt(psf_variance) + 1.0));
    if (s % 2 == 0) ++s;
    return std::max(3, s);
  }

  void validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
      throw InvalidArgument("TikhonovParams: lambda must be >= 0");
    }
    if (!(psf_variance > 0.0) || !std::isfinite(psf_variance)) {
      throw InvalidArgument("TikhonovParams: psf_variance must be > 0");
    }
    const int s = kernel_size();
    if (s < 3 || s % 2 == 0) throw InvalidArgument("TikhonovParams: psf_size must be odd and >= 3");
  }

  /// A PSF narrow enough that its 3x3 kernel is numerically a unit impulse.
  static TikhonovParams impulse(double lambda) { return {lambda, 1e-6, 3}; }
};

/// Isotropic Gaussian kernel (row-major, side kernel_size()), unit sum.
inline std::vector<double> psf_kernel(const TikhonovParams& p) {
  p.validate();
  const int s = p.kernel_size();
  const int h = s / 2;
  std::vector<double> k(static_cast<std::size_t>(s) * s);
  double sum = 0.0;
  for (int y = -h; y <= h; ++y) {
    for (int x = -h; x <= h; ++x) {
      const double v = std::exp(-(x * x + y * y) / (2.0 * p.psf_variance));
      k[static_cast<std::size_t>(y + h) * s + (x + h)] = v;
      sum += v;
    }
  }
  for (double& v : k) v /= sum;
  return k;
}

/// Spectrum of the PSF zero-padded to rows x cols with its centre moved to
/// the origin, so a symmetric kernel has a real spectrum.
inline Spectrum psf_spectrum(const TikhonovParams& p, int rows, int cols) {
  const int s = p.kernel_size();
  if (rows < s || cols < s) {
    throw InvalidArgument("tikhonov: image " + std::to_string(cols) + "x" + std::to_string(rows) +
                          " smaller than PSF size " + std::to_string(s));
  }
  const auto k = psf_kernel(p);
  const int h = s / 2;
  Spectrum padded(static_cast<std::size_t>(rows) * cols);
  for (int y = -h; y <= h; ++y) {
    for (int x = -h; x <= h; ++x) {
      const int r = (y + rows) % rows;
      const int c = (x + cols) % cols;
      padded[static_cast<std::size_t>(r) * cols + c] = k[static_cast<std::size_t>(y + h) * s + (x + h)];
    }
  }
  dft2d(padded, rows, cols);
  return padded;
}

/// Per-frequency Tikhonov filter factors |P|^2 / (|P|^2 + lambda^2), laid
/// out like the 2D spectrum.
struct FilterResponse {
  int rows = 0;
  int cols = 0;
  std::vector<double> gains;

  double at(int r, int c) const { return gains[static_cast<std::size_t>(r) * cols + c]; }
};

inline FilterResponse tikhonov_response(const TikhonovParams& p, int rows, int cols) {
  p.validate();
  const Spectrum psf = psf_spectrum(p, rows, cols);
  FilterResponse out{rows, cols, std::vector<double>(psf.size())};
  const double l2 = p.lambda * p.lambda;
  for (std::size_t i = 0; i < psf.size(); ++i) {
    const double m2 = std::norm(psf[i]);
    out.gains[i] = (m2 + l2) > 0.0 ? m2 / (m2 + l2) : 0.0;
  }
  return out;
}

/// Regularised deconvolution conj(P) B / (|P|^2 + lambda^2) evaluated in the
/// Fourier domain. Returns the real part without clamping.
inline std::vector<double> tikhonov_filter_raw(const std::vector<double>& field, int rows, int cols,
                                               const TikhonovParams& p) {
  p.validate();
  if (field.size() != static_cast<std::size_t>(rows) * cols) {
    throw InvalidArgument("tikhonov: field does not match dimensions");
  }
  const Spectrum psf = psf_spectrum(p, rows, cols);
  Spectrum b = dft2d_real(field, rows, cols);
  const double l2 = p.lambda * p.lambda;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const double denom = std::norm(psf[i]) + l2;
    b[i] = denom > 0.0 ? std::conj(psf[i]) * b[i] / denom : std::complex<double>{};
  }
  dft2d(b, rows, cols, /*inverse=*/true);
  std::vector<double> out(b.size());
  std::transform(b.begin(), b.end(), out.begin(), [](const auto& z) { return z.real(); });
  return out;
}

inline GrayImage tikhonov_filter(const GrayImage& img, const TikhonovParams& p) {
  if (img.empty()) throw InvalidArgument("tikhonov_filter: empty image");
  auto out = tikhonov_filter_raw(img.values(), img.height(), img.width(), p);
  return GrayImage::clamped(img.width(), img.height(), std::move(out));
}

}  // namespace melanin

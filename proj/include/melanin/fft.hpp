#pragma once

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

#include "melanin/error.hpp"

namespace melanin {

using Spectrum = std::vector<std::complex<double>>;

namespace detail {

// FFTW's planner is not re-entrant; plan execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

/// In-place 2D DFT of a row-major rows x cols array. The inverse transform
/// is normalised by 1/(rows*cols) so forward followed by inverse is the
/// identity.
inline void dft2d(Spectrum& data, int rows, int cols, bool inverse = false) {
  if (data.size() != static_cast<std::size_t>(rows) * cols || rows <= 0 || cols <= 0) {
    throw InvalidArgument("dft2d: buffer does not match dimensions");
  }
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan = fftw_plan_dft_2d(rows, cols, buf, buf, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                            FFTW_ESTIMATE);
  }
  if (!plan) throw Error("dft2d: FFTW could not create a plan");
  fftw_execute(plan);
  {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  if (inverse) {
    const double scale = 1.0 / (static_cast<double>(rows) * cols);
    for (auto& v : data) v *= scale;
  }
}

inline Spectrum dft2d_real(const std::vector<double>& field, int rows, int cols) {
  Spectrum s(field.begin(), field.end());
  dft2d(s, rows, cols);
  return s;
}

}  // namespace melanin

#pragma once

#include <cmath>
#include <complex>
#include <filesystem>
#include <numbers>
#include <random>
#include <unistd.h>
#include <string>
#include <vector>

#include "melanin.hpp"

namespace testing_support {

namespace fs = std::filesystem;

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("melanin_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& s) const { return path_ / s; }

 private:
  fs::path path_;
};

inline melanin::GrayImage random_image(std::mt19937_64& rng, int w, int h) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  for (double& x : v) x = u(rng);
  return melanin::GrayImage(w, h, std::move(v));
}

/// Direct O(N^2) 2D DFT, e^{-2 pi i (ur/R + vc/C)}.
inline std::vector<std::complex<double>> naive_dft2(const std::vector<std::complex<double>>& in, int rows,
                                                    int cols) {
  std::vector<std::complex<double>> out(in.size());
  for (int u = 0; u < rows; ++u) {
    for (int v = 0; v < cols; ++v) {
      std::complex<double> acc{};
      for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
          const double ang = -2.0 * std::numbers::pi *
                             (static_cast<double>(u * r % rows) / rows + static_cast<double>(v * c % cols) / cols);
          acc += in[static_cast<std::size_t>(r) * cols + c] * std::complex<double>(std::cos(ang), std::sin(ang));
        }
      }
      out[static_cast<std::size_t>(u) * cols + v] = acc;
    }
  }
  return out;
}

inline std::vector<std::complex<double>> to_complex(const std::vector<double>& v) {
  return {v.begin(), v.end()};
}

/// Filled disc of radius r centred at (cx, cy) on a w x h mask.
inline melanin::BinaryMask disc_mask(int w, int h, double cx, double cy, double r) {
  melanin::BinaryMask m(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (std::hypot(x - cx, y - cy) <= r) m.set(x, y);
    }
  }
  return m;
}

/// Polygon approximating a circle, anticlockwise.
inline std::vector<melanin::Point2> circle_points(double cx, double cy, double r, int n, double phase = 0.0) {
  std::vector<melanin::Point2> pts;
  for (int i = 0; i < n; ++i) {
    const double a = phase + 2.0 * std::numbers::pi * i / n;
    pts.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
  }
  return pts;
}

inline melanin::ShapeCode random_code(std::mt19937_64& rng, int m, int n, int b) {
  melanin::ShapeCode c;
  c.m = m;
  c.n = n;
  c.b = b;
  c.values.resize(static_cast<std::size_t>(m) * n);
  std::uniform_int_distribution<unsigned> u(0, (1u << b) - 1u);
  for (auto& v : c.values) v = static_cast<std::uint16_t>(u(rng));
  c.degraded = (rng() & 1u) != 0;
  return c;
}

}  // namespace testing_support

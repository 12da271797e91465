#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "melanin/error.hpp"

namespace melanin {

/// Row-major scalar intensity field with every value in [0,1].
///
/// Values are fixed at construction. Pipeline stages that produce
/// intermediate real-valued fields build a std::vector<double> and wrap it
/// here once it is known to be in range (or use clamped()).
class GrayImage {
 public:
  GrayImage() = default;

  GrayImage(int width, int height, double fill = 0.0)
      : GrayImage(width, height, std::vector<double>(checked_area(width, height), fill)) {}

  GrayImage(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (data_.size() != checked_area(width, height)) {
      throw InvalidArgument("GrayImage: data length " + std::to_string(data_.size()) +
                            " does not match " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
    for (double v : data_) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw InvalidArgument("GrayImage: intensity " + std::to_string(v) + " outside [0,1]");
      }
    }
  }

  static GrayImage clamped(int width, int height, std::vector<double> data) {
    for (double& v : data) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    return GrayImage(width, height, std::move(data));
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double operator()(int x, int y) const { return data_[index(x, y)]; }
  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(x);
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::span<const double> pixels() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  /// Bilinear sample at (x, y) in pixel-center coordinates. Coordinates
  /// outside the image are clamped to the nearest in-bounds position and
  /// `clipped` is raised.
  double sample_bilinear(double x, double y, bool& clipped) const {
    const double max_x = width_ - 1;
    const double max_y = height_ - 1;
    if (x < 0.0 || y < 0.0 || x > max_x || y > max_y) {
      clipped = true;
      x = std::clamp(x, 0.0, max_x);
      y = std::clamp(y, 0.0, max_y);
    }
    const int x0 = std::min(static_cast<int>(std::floor(x)), width_ - 1);
    const int y0 = std::min(static_cast<int>(std::floor(y)), height_ - 1);
    const int x1 = std::min(x0 + 1, width_ - 1);
    const int y1 = std::min(y0 + 1, height_ - 1);
    const double fx = x - x0;
    const double fy = y - y0;
    const double top = (*this)(x0, y0) * (1.0 - fx) + (*this)(x1, y0) * fx;
    const double bottom = (*this)(x0, y1) * (1.0 - fx) + (*this)(x1, y1) * fx;
    return top * (1.0 - fy) + bottom * fy;
  }

  friend bool operator==(const GrayImage&, const GrayImage&) = default;

 private:
  static std::size_t checked_area(int width, int height) {
    if (width <= 0 || height <= 0) {
      throw InvalidArgument("GrayImage: zero-sized image " + std::to_string(width) + "x" +
                            std::to_string(height));
    }
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

/// Row-major 0/1 mask sharing the GrayImage pixel grid.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> bits;

  BinaryMask() = default;
  BinaryMask(int w, int h) : width(w), height(h), bits(static_cast<std::size_t>(w) * h, 0) {}

  bool operator()(int x, int y) const {
    return bits[static_cast<std::size_t>(y) * width + x] != 0;
  }
  void set(int x, int y, bool v = true) {
    bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0;
  }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1));
  }

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

inline GrayImage mask_to_image(const BinaryMask& m) {
  std::vector<double> v(m.bits.size());
  std::transform(m.bits.begin(), m.bits.end(), v.begin(),
                 [](unsigned char b) { return b ? 1.0 : 0.0; });
  return GrayImage(m.width, m.height, std::move(v));
}

}  // namespace melanin

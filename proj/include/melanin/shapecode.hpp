#pragma once

#include <zlib.h>

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "melanin/binarize.hpp"
#include "melanin/error.hpp"
#include "melanin/image_io.hpp"
#include "melanin/shapedesc.hpp"

namespace melanin {

inline constexpr int kTemplates = 4;         // bands 2..5
inline constexpr int kObjectsPerTemplate = 2;
inline constexpr int kObjects = kTemplates * kObjectsPerTemplate;
inline constexpr int kStripsPerCapture = 3 * kObjects;  // 24

/// M x N matrix of B-bit gray values. Rows are laid out RVF, SF, TAF; inside
/// each descriptor block rows are template-major, object-minor. A fused code
/// repeats that 24-row block once per session.
struct ShapeCode {
  int m = kStripsPerCapture;
  int n = 100;
  int b = 8;
  std::vector<std::uint16_t> values;  // row-major m x n
  bool degraded = false;

  std::size_t bit_size() const noexcept {
    return static_cast<std::size_t>(m) * static_cast<std::size_t>(n) * static_cast<std::size_t>(b);
  }
  std::uint16_t at(int row, int col) const {
    return values[static_cast<std::size_t>(row) * n + col];
  }
  std::span<const std::uint16_t> strip(int row) const {
    return std::span(values).subspan(static_cast<std::size_t>(row) * n, static_cast<std::size_t>(n));
  }

  void validate() const {
    if (m < 1 || m > 65535 || n < 1 || n > 65535 || b < 1 || b > 16) {
      throw InvalidArgument("ShapeCode: dimensions out of range");
    }
    if (values.size() != static_cast<std::size_t>(m) * n) {
      throw InvalidArgument("ShapeCode: value count does not match m x n");
    }
    const unsigned limit = (1u << b) - 1u;
    for (auto v : values) {
      if (v > limit) throw InvalidArgument("ShapeCode: value exceeds bit depth");
    }
  }

  friend bool operator==(const ShapeCode&, const ShapeCode&) = default;
};

/// Row of the strip holding descriptor `kind` for object `object` (1..2)
/// of template `slot` (1..4, i.e. bands 2..5).
constexpr int strip_index(FeatureKind kind, int slot, int object) {
  return static_cast<int>(kind) * kObjects + (slot - 1) * kObjectsPerTemplate + (object - 1);
}

/// "RVF^i_j"-style label: object i of template j. Fused codes get a session
/// prefix per 24-row block.
inline std::string strip_label(int row, int m) {
  const int block = row / kStripsPerCapture;
  const int r = row % kStripsPerCapture;
  const auto kind = static_cast<FeatureKind>(r / kObjects);
  const int slot = (r % kObjects) / kObjectsPerTemplate + 1;
  const int object = r % kObjectsPerTemplate + 1;
  std::string label = std::string(to_string(kind)) + "^" + std::to_string(object) + "_" +
                      std::to_string(slot);
  if (m == 2 * kStripsPerCapture) return (block == 0 ? "VL:" : "NIR:") + label;
  if (m > kStripsPerCapture) return "S" + std::to_string(block + 1) + ":" + label;
  return label;
}

/// floor(v * (2^b - 1) + 0.5).
inline std::uint16_t quantize(double v, int b) {
  if (b < 1 || b > 16) throw InvalidArgument("quantize: bits must be in 1..16");
  if (!(v >= 0.0 && v <= 1.0)) {
    throw InvalidArgument("quantize: sample " + std::to_string(v) + " outside [0,1]");
  }
  const double levels = static_cast<double>((1u << b) - 1u);
  return static_cast<std::uint16_t>(std::floor(v * levels + 0.5));
}

inline double dequantize(std::uint16_t q, int b) {
  return static_cast<double>(q) / static_cast<double>((1u << b) - 1u);
}

inline std::vector<std::uint16_t> quantize(const FeatureCurve& curve, int b) {
  std::vector<std::uint16_t> out(curve.samples.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = quantize(curve.samples[i], b);
  return out;
}

/// The 24 descriptor curves of eight selected objects in code-row order.
/// Contours are re-started at their canonical point first.
inline std::vector<FeatureCurve> compute_features(const std::vector<SelectedObject>& objects, int n) {
  if (objects.size() != static_cast<std::size_t>(kObjects)) {
    throw InvalidArgument("assemble: expected 8 objects, got " + std::to_string(objects.size()));
  }
  std::vector<FeatureCurve> curves(kStripsPerCapture);
  for (std::size_t i = 0; i < objects.size(); ++i) {
    const SelectedObject& o = objects[i];
    const int slot = o.template_index - 1;
    if (slot < 1 || slot > kTemplates || o.rank < 1 || o.rank > kObjectsPerTemplate ||
        static_cast<std::size_t>((slot - 1) * kObjectsPerTemplate + o.rank - 1) != i) {
      throw InvalidArgument("assemble: objects must be ordered by template (2..5) then rank");
    }
    const Contour c = start_point_canonicalize(o.contour);
    curves[strip_index(FeatureKind::RVF, slot, o.rank)] = radius_vector(c, n);
    curves[strip_index(FeatureKind::SF, slot, o.rank)] = support_function(c, n);
    curves[strip_index(FeatureKind::TAF, slot, o.rank)] = tangent_angle(c, n);
  }
  return curves;
}

/// Quantises curves (already in code-row order) into a code.
inline ShapeCode code_from_curves(const std::vector<FeatureCurve>& curves, int b, bool degraded) {
  if (b < 1 || b > 16) throw InvalidArgument("assemble: bits must be in 1..16");
  if (curves.empty()) throw InvalidArgument("assemble: no curves");
  ShapeCode code;
  code.m = static_cast<int>(curves.size());
  code.n = static_cast<int>(curves.front().samples.size());
  code.b = b;
  code.values.reserve(static_cast<std::size_t>(code.m) * code.n);
  for (const FeatureCurve& c : curves) {
    if (c.samples.size() != static_cast<std::size_t>(code.n)) {
      throw InvalidArgument("assemble: curves differ in length");
    }
    const auto q = quantize(c, b);
    code.values.insert(code.values.end(), q.begin(), q.end());
  }
  code.degraded = degraded;
  return code;
}

inline ShapeCode assemble(const std::vector<SelectedObject>& objects, int n = 100, int b = 8) {
  bool degraded = false;
  for (const SelectedObject& o : objects) degraded = degraded || o.placeholder;
  return code_from_curves(compute_features(objects, n), b, degraded);
}

// ---------------------------------------------------------------------------
// File format: 16-byte header, payload, CRC-32 (little-endian throughout).
//   "SHPC" | version u8 | flags u8 | m u16 | n u16 | b u8 | 5 reserved zero bytes
// Each sample takes ceil(b/8) bytes. The CRC covers header and payload.
// ---------------------------------------------------------------------------

inline constexpr std::uint8_t kShapeCodeVersion = 1;
inline constexpr std::size_t kHeaderSize = 16;
inline constexpr std::size_t kChecksumSize = 4;

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

inline std::size_t serialized_size(int m, int n, int b) {
  return kHeaderSize + static_cast<std::size_t>(m) * n * ((b + 7) / 8) + kChecksumSize;
}

inline std::vector<std::uint8_t> serialize(const ShapeCode& code) {
  code.validate();
  std::vector<std::uint8_t> out;
  out.reserve(serialized_size(code.m, code.n, code.b));
  auto put16 = [&](unsigned v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xFF));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
  };
  for (char c : {'S', 'H', 'P', 'C'}) out.push_back(static_cast<std::uint8_t>(c));
  out.push_back(kShapeCodeVersion);
  out.push_back(code.degraded ? 1 : 0);
  put16(static_cast<unsigned>(code.m));
  put16(static_cast<unsigned>(code.n));
  out.push_back(static_cast<std::uint8_t>(code.b));
  for (int i = 0; i < 5; ++i) out.push_back(0);
  const bool wide = code.b > 8;
  for (auto v : code.values) {
    if (wide) {
      put16(v);
    } else {
      out.push_back(static_cast<std::uint8_t>(v));
    }
  }
  const std::uint32_t crc = crc32_of(out);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(crc >> (8 * i)));
  return out;
}

inline ShapeCode deserialize(std::span<const std::uint8_t> bytes) {
  using K = FormatError::Kind;
  if (bytes.size() < kHeaderSize) throw FormatError(K::Truncated, "shape code: truncated header");
  if (bytes[0] != 'S' || bytes[1] != 'H' || bytes[2] != 'P' || bytes[3] != 'C') {
    throw FormatError(K::BadMagic, "shape code: bad magic");
  }
  if (bytes[4] != kShapeCodeVersion) {
    throw FormatError(K::VersionMismatch,
                      "shape code: unsupported version " + std::to_string(bytes[4]));
  }
  auto get16 = [&](std::size_t at) { return unsigned(bytes[at]) | (unsigned(bytes[at + 1]) << 8); };
  const std::uint8_t flags = bytes[5];
  ShapeCode code;
  code.m = static_cast<int>(get16(6));
  code.n = static_cast<int>(get16(8));
  code.b = bytes[10];
  if ((flags & ~1u) != 0) throw FormatError(K::InvalidHeader, "shape code: unknown flag bits");
  for (std::size_t i = 11; i < kHeaderSize; ++i) {
    if (bytes[i] != 0) throw FormatError(K::InvalidHeader, "shape code: reserved bytes not zero");
  }
  if (code.m == 0 || code.n == 0 || code.b < 1 || code.b > 16) {
    throw FormatError(K::InvalidHeader, "shape code: invalid dimensions");
  }
  const std::size_t expected = serialized_size(code.m, code.n, code.b);
  if (bytes.size() < expected) throw FormatError(K::Truncated, "shape code: truncated payload");
  if (bytes.size() > expected) throw FormatError(K::InvalidHeader, "shape code: trailing bytes");
  const std::size_t body = expected - kChecksumSize;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= std::uint32_t(bytes[body + i]) << (8 * i);
  if (crc32_of(bytes.first(body)) != stored) {
    throw FormatError(K::ChecksumMismatch, "shape code: checksum mismatch");
  }
  code.degraded = (flags & 1u) != 0;
  const std::size_t count = static_cast<std::size_t>(code.m) * code.n;
  code.values.resize(count);
  const bool wide = code.b > 8;
  const unsigned limit = (1u << code.b) - 1u;
  for (std::size_t i = 0; i < count; ++i) {
    const unsigned v = wide ? get16(kHeaderSize + 2 * i) : bytes[kHeaderSize + i];
    if (v > limit) throw FormatError(K::InvalidHeader, "shape code: sample exceeds bit depth");
    code.values[i] = static_cast<std::uint16_t>(v);
  }
  return code;
}

inline void save_code(const ShapeCode& code, const std::filesystem::path& path) {
  write_file_atomic(path, serialize(code));
}

inline ShapeCode load_code(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return deserialize(bytes);
}

}  // namespace melanin

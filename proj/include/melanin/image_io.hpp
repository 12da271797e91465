#pragma once

#include <png.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <system_error>
#include <vector>

#include "melanin/error.hpp"
#include "melanin/image.hpp"

namespace melanin {

namespace fs = std::filesystem;

inline std::vector<std::uint8_t> read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Writes through a sibling temp file and renames it into place, so a
/// concurrent reader sees either the old file or the complete new one.
inline void write_file_atomic(const fs::path& path, std::span<const std::uint8_t> bytes) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + tmp.string());
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + ": " + ec.message());
}

inline void write_text_atomic(const fs::path& path, const std::string& text) {
  write_file_atomic(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

namespace detail {

inline std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

inline double luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  const double y = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
  return std::clamp(y, 0.0, 1.0);
}

// Binary PGM (P5), maxval up to 65535.
inline GrayImage decode_pgm(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  std::size_t pos = 2;
  auto next_token = [&]() -> long {
    for (;;) {
      while (pos < bytes.size() && std::isspace(bytes[pos])) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) {
      throw ImageError(name + ": malformed PGM header");
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1'000'000) throw ImageError(name + ": PGM header value too large");
    }
    return v;
  };
  const long w = next_token();
  const long h = next_token();
  const long maxval = next_token();
  if (w <= 0 || h <= 0) throw ImageError(name + ": zero-sized image");
  if (maxval <= 0 || maxval > 65535) throw ImageError(name + ": bad PGM maxval");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) {
    throw ImageError(name + ": malformed PGM header");
  }
  ++pos;
  const std::size_t bpp = maxval < 256 ? 1 : 2;
  const std::size_t n = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() - pos < n * bpp) throw ImageError(name + ": truncated PGM data");
  std::vector<double> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned v = bpp == 1 ? bytes[pos + i]
                          : (unsigned(bytes[pos + 2 * i]) << 8) | bytes[pos + 2 * i + 1];
    data[i] = std::min(1.0, static_cast<double>(v) / static_cast<double>(maxval));
  }
  return GrayImage(static_cast<int>(w), static_cast<int>(h), std::move(data));
}

inline GrayImage decode_png(const std::vector<std::uint8_t>& bytes, const std::string& name) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
    throw ImageError(name + ": " + image.message);
  }
  if (image.width == 0 || image.height == 0) {
    png_image_free(&image);
    throw ImageError(name + ": zero-sized image");
  }
  const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
  image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
  const png_color black{0, 0, 0};
  if (!png_image_finish_read(&image, &black, buf.data(), 0, nullptr)) {
    throw ImageError(name + ": " + image.message);
  }
  const auto w = static_cast<int>(image.width);
  const auto h = static_cast<int>(image.height);
  std::vector<double> data(static_cast<std::size_t>(w) * h);
  for (std::size_t i = 0; i < data.size(); ++i) {
    data[i] = color ? luma(buf[3 * i], buf[3 * i + 1], buf[3 * i + 2]) : buf[i] / 255.0;
  }
  return GrayImage(w, h, std::move(data));
}

}  // namespace detail

/// Loads a PNG (8-bit gray or RGB) or binary PGM file as intensities in
/// [0,1]. The format is detected from the file signature. Colour pixels are
/// reduced with luma weights 0.299/0.587/0.114.
inline GrayImage load_gray(const fs::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = read_file(path);
  } catch (const Error& e) {
    throw ImageError(e.what());
  }
  const std::string name = path.string();
  if (bytes.size() >= 8 && png_sig_cmp(bytes.data(), 0, 8) == 0) {
    return detail::decode_png(bytes, name);
  }
  if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '5') {
    return detail::decode_pgm(bytes, name);
  }
  if (bytes.empty()) throw ImageError(name + ": empty file");
  throw ImageError(name + ": unsupported image format (expected PNG or binary PGM)");
}

inline std::vector<std::uint8_t> encode_pgm(const GrayImage& img) {
  const std::string header =
      "P5\n" + std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(header.size() + img.size());
  for (double v : img.pixels()) out.push_back(detail::to_byte(v));
  return out;
}

inline std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  std::vector<std::uint8_t> pixels(img.size());
  std::transform(img.pixels().begin(), img.pixels().end(), pixels.begin(), detail::to_byte);
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_GRAY;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, pixels.data(), 0, nullptr)) {
    throw ImageError(std::string("png encode: ") + image.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, pixels.data(), 0, nullptr)) {
    throw ImageError(std::string("png encode: ") + image.message);
  }
  out.resize(size);
  return out;
}

inline void save_pgm(const GrayImage& img, const fs::path& path) {
  write_file_atomic(path, encode_pgm(img));
}

inline void save_png(const GrayImage& img, const fs::path& path) {
  write_file_atomic(path, encode_png(img));
}

}  // namespace melanin

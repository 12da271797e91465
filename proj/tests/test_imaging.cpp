#include <gtest/gtest.h>
#include <png.h>

#include <fstream>

#include "test_support.hpp"

using namespace melanin;
using testing_support::TempDir;

namespace {

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(p, std::ios::binary);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

std::vector<std::uint8_t> pgm_bytes(const std::string& header, std::vector<std::uint8_t> body) {
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

// Writes an 8-bit RGB PNG through libpng directly, independent of the code under test.
void write_rgb_png(const std::filesystem::path& p, int w, int h, const std::vector<std::uint8_t>& rgb) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_RGB;
  ASSERT_TRUE(png_image_write_to_file(&image, p.c_str(), 0, rgb.data(), 0, nullptr));
}

void write_gray_png(const std::filesystem::path& p, int w, int h, const std::vector<std::uint8_t>& g) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(w);
  image.height = static_cast<png_uint_32>(h);
  image.format = PNG_FORMAT_GRAY;
  ASSERT_TRUE(png_image_write_to_file(&image, p.c_str(), 0, g.data(), 0, nullptr));
}

// Field whose value depends on polar position about (cx, cy): smooth in both.
GrayImage polar_field(int size, double cx, double cy, double rotate_deg) {
  std::vector<double> v(static_cast<std::size_t>(size) * size);
  const double rot = rotate_deg * std::numbers::pi / 180.0;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double r = std::hypot(x - cx, y - cy);
      const double th = std::atan2(-(y - cy), x - cx) - rot;
      v[static_cast<std::size_t>(y) * size + x] =
          0.5 + 0.25 * std::sin(3.0 * th) * std::cos(r / 15.0) + 0.1 * std::cos(th);
    }
  }
  return GrayImage(size, size, std::move(v));
}

}  // namespace

TEST(GrayImage, RejectsOutOfRangeAndEmpty) {
  EXPECT_THROW(GrayImage(2, 1, std::vector<double>{0.0, 1.5}), InvalidArgument);
  EXPECT_THROW(GrayImage(2, 1, std::vector<double>{0.0}), InvalidArgument);
  EXPECT_THROW(GrayImage(0, 3), InvalidArgument);
  const auto c = GrayImage::clamped(3, 1, {-0.5, 0.5, 2.0});
  EXPECT_EQ(c.values(), (std::vector<double>{0.0, 0.5, 1.0}));
}

TEST(LoadGray, PgmEndpointsScale) {
  TempDir dir("io");
  write_bytes(dir / "a.pgm", pgm_bytes("P5\n2 1\n255\n", {0, 255}));
  const GrayImage img = load_gray(dir / "a.pgm");
  ASSERT_EQ(img.width(), 2);
  ASSERT_EQ(img.height(), 1);
  EXPECT_EQ(img(0, 0), 0.0);
  EXPECT_EQ(img(1, 0), 1.0);
}

TEST(LoadGray, PgmWithCommentsAndSixteenBit) {
  TempDir dir("io");
  write_bytes(dir / "b.pgm", pgm_bytes("P5\n# a comment\n1 1\n65535\n", {0x80, 0x00}));
  EXPECT_NEAR(load_gray(dir / "b.pgm")(0, 0), 32768.0 / 65535.0, 1e-12);
}

TEST(LoadGray, PureRedUsesLumaWeights) {
  TempDir dir("io");
  write_rgb_png(dir / "red.png", 1, 1, {255, 0, 0});
  EXPECT_NEAR(load_gray(dir / "red.png")(0, 0), 0.299, 1e-9);
}

TEST(LoadGray, ConstantGrayPng) {
  TempDir dir("io");
  write_gray_png(dir / "c.png", 3, 3, std::vector<std::uint8_t>(9, 128));
  const GrayImage img = load_gray(dir / "c.png");
  for (double v : img.pixels()) EXPECT_NEAR(v, 128.0 / 255.0, 1e-12);
}

TEST(LoadGray, Errors) {
  TempDir dir("io");
  EXPECT_THROW(load_gray(dir / "missing.png"), ImageError);
  write_bytes(dir / "x.bmp", {'B', 'M', 0, 0, 0, 0});
  EXPECT_THROW(load_gray(dir / "x.bmp"), ImageError);
  write_bytes(dir / "z.pgm", pgm_bytes("P5\n0 0\n255\n", {}));
  EXPECT_THROW(load_gray(dir / "z.pgm"), ImageError);
  write_bytes(dir / "t.pgm", pgm_bytes("P5\n4 4\n255\n", {1, 2, 3}));
  EXPECT_THROW(load_gray(dir / "t.pgm"), ImageError);
}

TEST(LoadGray, SaveLoadIdempotentAtEightBits) {
  TempDir dir("io");
  std::mt19937_64 rng(5);
  const GrayImage img = testing_support::random_image(rng, 17, 9);
  for (const char* name : {"r.png", "r.pgm"}) {
    const auto p = dir / name;
    if (std::string(name).ends_with("png")) save_png(img, p); else save_pgm(img, p);
    const GrayImage once = load_gray(p);
    for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(once.pixels()[i], img.pixels()[i], 0.5 / 255 + 1e-12);
    if (std::string(name).ends_with("png")) save_png(once, p); else save_pgm(once, p);
    EXPECT_EQ(load_gray(p), once) << name;
  }
}

TEST(Unwrap, ConstantFieldAndDefaultSize) {
  const GrayImage img(200, 200, 0.7);
  IrisGeometry g;
  g.center_x = g.center_y = 100;
  g.pupil_radius = 20;
  g.iris_radius = 80;
  const IrisStrip s = unwrap_iris(img, g);
  EXPECT_EQ(s.rows(), 150);
  EXPECT_EQ(s.cols(), 300);
  EXPECT_EQ(s.pixels.size(), 45000u);
  EXPECT_FALSE(s.clipped);
  for (double v : s.pixels.pixels()) EXPECT_NEAR(v, 0.7, 1e-12);
}

TEST(Unwrap, RadialGradientColumnsNondecreasing) {
  const int n = 240;
  const double cx = 117.3, cy = 121.8, ri = 100;
  std::vector<double> v(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) v[static_cast<std::size_t>(y) * n + x] = std::min(1.0, std::hypot(x - cx, y - cy) / ri);
  IrisGeometry g;
  g.center_x = cx;
  g.center_y = cy;
  g.pupil_radius = 25;
  g.iris_radius = ri;
  for (auto [start, end] : {std::pair{180.0, 360.0}, std::pair{0.0, 360.0}, std::pair{10.0, 70.0}}) {
    g.span_start = start;
    g.span_end = end;
    const IrisStrip s = unwrap_iris(GrayImage(n, n, v), g, 40, 64);
    for (int c = 0; c < s.cols(); ++c)
      for (int r = 1; r < s.rows(); ++r) EXPECT_GE(s.pixels(c, r), s.pixels(c, r - 1) - 1e-12);
    // Row 0 lies on the pupil circle, the last row on the iris circle.
    EXPECT_NEAR(s.pixels(0, 0), 25.0 / ri, 0.01);
    EXPECT_NEAR(s.pixels(0, s.rows() - 1), 1.0, 0.01);
  }
}

TEST(Unwrap, ColumnsRunAnticlockwiseFromSpanStart) {
  // Mark a bright dot straight below the centre: angle 270 degrees, the middle of the lower half.
  GrayImage img(101, 101, 0.0);
  std::vector<double> v(img.values());
  for (int y = 75; y <= 85; ++y) v[static_cast<std::size_t>(y) * 101 + 50] = 1.0;
  IrisGeometry g;
  g.center_x = g.center_y = 50;
  g.pupil_radius = 10;
  g.iris_radius = 45;
  const IrisStrip s = unwrap_iris(GrayImage(101, 101, v), g, 36, 180);
  // theta = 180 + c deg; 270 deg is column 90.
  EXPECT_GT(s.pixels(90, 25), 0.9);
  EXPECT_LT(s.pixels(45, 25), 0.1);
}

TEST(Unwrap, RotationBecomesColumnShift) {
  const int size = 260;
  const double c = 129.5;
  IrisGeometry g;
  g.center_x = g.center_y = c;
  g.pupil_radius = 30;
  g.iris_radius = 110;
  // span 180 over 300 columns: 0.6 degrees per column, so 6 degrees = 10 columns.
  const IrisStrip a = unwrap_iris(polar_field(size, c, c, 0.0), g);
  const IrisStrip b = unwrap_iris(polar_field(size, c, c, 6.0), g);
  double diff = 0.0;
  int count = 0;
  for (int r = 0; r < a.rows(); ++r)
    for (int col = 10; col < a.cols(); ++col) {
      diff += std::abs(b.pixels(col, r) - a.pixels(col - 10, r));
      ++count;
    }
  EXPECT_LE(diff / count, 0.02);
}

TEST(Unwrap, ClipsOutsideImageAndRejectsDegenerateGeometry) {
  const GrayImage img(50, 50, 0.3);
  IrisGeometry g;
  g.center_x = g.center_y = 25;
  g.pupil_radius = 10;
  g.iris_radius = 60;
  const IrisStrip s = unwrap_iris(img, g, 16, 32);
  EXPECT_TRUE(s.clipped);
  for (double v : s.pixels.pixels()) EXPECT_NEAR(v, 0.3, 1e-12);
  g.pupil_radius = 70;
  EXPECT_THROW(unwrap_iris(img, g), InvalidArgument);
  g.pupil_radius = 10;
  g.span_end = g.span_start;
  EXPECT_THROW(unwrap_iris(img, g), InvalidArgument);
  g.span_end = g.span_start + 400;
  EXPECT_THROW(unwrap_iris(img, g), InvalidArgument);
  g.span_end = 360;
  EXPECT_THROW(unwrap_iris(img, g, 4, 32), InvalidArgument);
}

TEST(Unwrap, Presets) {
  EXPECT_EQ(preset_size(UnwrapPreset::Standard).rows, 150);
  EXPECT_EQ(preset_size(UnwrapPreset::Standard).cols, 300);
  EXPECT_EQ(preset_size(UnwrapPreset::Large).rows, 256);
  EXPECT_EQ(preset_size(UnwrapPreset::Large).cols, 512);
  EXPECT_EQ(preset_size(UnwrapPreset::OneDegreeArc).cols, 180);
}

namespace {

GrayImage eye_image(int w, int h, double cx, double cy, double rp, double ri) {
  std::vector<double> v(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double d = std::hypot(x - cx, y - cy);
      v[static_cast<std::size_t>(y) * w + x] = d <= rp ? 0.0 : d <= ri ? 0.5 : 1.0;
    }
  return GrayImage(w, h, std::move(v));
}

}  // namespace

TEST(DetectCircles, RecoversConstructionCircles) {
  for (auto [cx, cy] : {std::pair{150.0, 140.0}, std::pair{131.4, 162.7}}) {
    const IrisGeometry g = detect_circles(eye_image(300, 300, cx, cy, 30, 90));
    EXPECT_TRUE(g.estimated);
    EXPECT_FALSE(g.clipped);
    EXPECT_NEAR(g.center_x, cx, 2.0);
    EXPECT_NEAR(g.center_y, cy, 2.0);
    EXPECT_NEAR(g.pupil_radius, 30.0, 3.0);
    EXPECT_NEAR(g.iris_radius, 90.0, 3.0);
  }
}

TEST(DetectCircles, ConstantImageHasNoDarkRegion) {
  try {
    detect_circles(GrayImage(64, 64, 0.4));
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("manually"), std::string::npos);
  }
}

TEST(DetectCircles, BorderTouchingPupilIsFlagged) {
  const IrisGeometry g = detect_circles(eye_image(200, 200, 20, 100, 30, 90));
  EXPECT_TRUE(g.estimated);
  EXPECT_TRUE(g.clipped);
  EXPECT_GT(g.pupil_radius, 0.0);
  EXPECT_GT(g.iris_radius, g.pupil_radius);
}

TEST(Manifest, ParsesAndRoundTrips) {
  const std::string text = R"([
    {"subject_id": "007", "eye": "L", "session": "VL", "path": "a.png",
     "geometry": {"cx": 10, "cy": 11, "r_pupil": 3, "r_iris": 9, "span_deg": [180, 360]}},
    {"subject_id": "008", "eye": "R", "session": "NIR", "path": "/abs/b.pgm"}
  ])";
  const DatasetManifest m = parse_manifest(text, "/data");
  ASSERT_EQ(m.entries.size(), 2u);
  EXPECT_EQ(m.entries[0].class_key(), "007_L");
  ASSERT_TRUE(m.entries[0].geometry.has_value());
  EXPECT_EQ(m.entries[0].geometry->iris_radius, 9.0);
  EXPECT_FALSE(m.entries[1].geometry.has_value());
  EXPECT_EQ(m.entries[1].session, Session::NIR);
  EXPECT_EQ(m.resolve(m.entries[0]), std::filesystem::path("/data/a.png"));
  EXPECT_EQ(m.resolve(m.entries[1]), std::filesystem::path("/abs/b.pgm"));

  TempDir dir("manifest");
  save_manifest(m, dir / "m.json");
  const DatasetManifest back = load_manifest(dir / "m.json");
  ASSERT_EQ(back.entries.size(), 2u);
  EXPECT_EQ(back.entries[0].geometry->center_y, 11.0);
  EXPECT_EQ(back.entries[1].path, "/abs/b.pgm");
}

TEST(Manifest, RejectsMalformedEntries) {
  EXPECT_THROW(parse_manifest("{}"), DataError);
  EXPECT_THROW(parse_manifest("not json"), DataError);
  EXPECT_THROW(parse_manifest(R"([{"eye":"L","session":"VL","path":"a"}])"), DataError);
  EXPECT_THROW(parse_manifest(R"([{"subject_id":"1","eye":"X","session":"VL","path":"a"}])"), DataError);
  EXPECT_THROW(parse_manifest(R"([{"subject_id":"1","eye":"L","session":"FUSED","path":"a"}])"), DataError);
  EXPECT_THROW(parse_manifest(
                   R"([{"subject_id":"1","eye":"L","session":"VL","path":"a","geometry":{"cx":1,"cy":1,"r_pupil":5,"r_iris":4}}])"),
               DataError);
  EXPECT_TRUE(parse_manifest("[]").entries.empty());
}

TEST(Components, EightConnectivityAndRasterLabels) {
  BinaryMask m(6, 4);
  m.set(0, 0);
  m.set(1, 1);  // diagonal neighbour of (0,0)
  m.set(4, 0);
  m.set(5, 0);
  m.set(3, 3);
  const Labeling lab = label_components(m);
  ASSERT_EQ(lab.components.size(), 3u);
  EXPECT_EQ(lab.components[0].area, 2u);
  EXPECT_TRUE(lab.is(1, 1, 1));
  EXPECT_EQ(lab.components[1].area, 2u);
  EXPECT_TRUE(lab.is(5, 0, 2));
  EXPECT_EQ(lab.components[2].area, 1u);
  EXPECT_TRUE(lab.components[2].touches_border);
}

TEST(Components, TraceOfRectangleVisitsItsBorder) {
  BinaryMask m(10, 8);
  for (int y = 2; y <= 5; ++y)
    for (int x = 3; x <= 7; ++x) m.set(x, y);
  const Labeling lab = label_components(m);
  const auto trace = trace_boundary(lab, 1);
  // 5x4 block: 2*(5+4)-4 border pixels, each visited once.
  EXPECT_EQ(trace.size(), 14u);
  for (const Pixel& p : trace) {
    EXPECT_TRUE(p.x == 3 || p.x == 7 || p.y == 2 || p.y == 5);
  }
}

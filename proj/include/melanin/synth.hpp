#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include "melanin/error.hpp"
#include "melanin/image.hpp"
#include "melanin/image_io.hpp"
#include "melanin/manifest.hpp"
#include "melanin/rng.hpp"

namespace melanin {

/// One pigment spot: an oriented elliptical Gaussian placed in polar
/// coordinates around the eye centre.
struct PigmentBlob {
  double radius;    // distance from centre, pixels
  double angle;     // degrees, anticlockwise on screen
  double sigma_u;   // along the radial direction
  double sigma_v;   // across it
  double tilt;      // extra orientation, radians
  double amplitude; // intensity added at the blob centre
};

/// The identity of one synthetic eye in one session.
struct EyePattern {
  double pupil_radius = 40.0;
  double iris_radius = 120.0;
  double iris_base = 0.45;
  double radial_gradient = 0.05;  // brightening from pupil to limbus
  std::vector<PigmentBlob> blobs;
};

/// Per-capture variation.
struct CaptureJitter {
  double rotation_deg = 0.0;
  double illumination = 0.0;
  double noise_sigma = 0.0;
  std::uint64_t noise_seed = 0;
};

inline EyePattern make_pattern(std::uint64_t seed, int cls, Session session) {
  Rng rng(Rng::derive(seed, {0x5041545445524eull, static_cast<std::uint64_t>(cls),
                             static_cast<std::uint64_t>(session)}));
  EyePattern p;
  const bool nir = session == Session::NIR;
  p.pupil_radius = rng.uniform(36.0, 44.0);
  p.iris_radius = rng.uniform(112.0, 124.0);
  p.iris_base = nir ? rng.uniform(0.45, 0.60) : rng.uniform(0.35, 0.55);
  p.radial_gradient = rng.uniform(0.0, 0.08);
  const int count = 10 + static_cast<int>(rng.below(8));
  for (int i = 0; i < count; ++i) {
    PigmentBlob b;
    b.radius = rng.uniform(p.pupil_radius + 12.0, p.iris_radius - 12.0);
    b.angle = rng.uniform(185.0, 355.0);
    b.sigma_u = rng.uniform(4.0, 11.0);
    b.sigma_v = rng.uniform(4.0, 16.0);
    b.tilt = rng.uniform(0.0, std::numbers::pi);
    const double mag = nir ? rng.uniform(0.10, 0.22) : rng.uniform(0.12, 0.30);
    b.amplitude = rng.uniform() < 0.7 ? -mag : mag;
    p.blobs.push_back(b);
  }
  return p;
}

inline CaptureJitter make_jitter(std::uint64_t seed, int cls, Session session, int index,
                                 double noise_sigma) {
  Rng rng(Rng::derive(seed, {0x4a4954544552ull, static_cast<std::uint64_t>(cls),
                             static_cast<std::uint64_t>(session), static_cast<std::uint64_t>(index)}));
  CaptureJitter j;
  j.rotation_deg = rng.uniform(-3.0, 3.0);
  j.illumination = rng.uniform(-0.05, 0.05);
  j.noise_sigma = noise_sigma;
  j.noise_seed = rng.next();
  return j;
}

/// Renders a size x size eye centred in the frame: dark pupil, textured
/// iris ring, bright sclera.
inline GrayImage render_eye(const EyePattern& p, const CaptureJitter& j, int size = 320) {
  const double c = (size - 1) / 2.0;
  const double rot = j.rotation_deg * std::numbers::pi / 180.0;
  struct Placed {
    double x, y, cu, su, inv_u, inv_v, amp;
  };
  std::vector<Placed> placed;
  for (const PigmentBlob& b : p.blobs) {
    const double a = b.angle * std::numbers::pi / 180.0 + rot;
    const double orient = a + b.tilt;
    placed.push_back({c + b.radius * std::cos(a), c - b.radius * std::sin(a), std::cos(orient),
                      std::sin(orient), 1.0 / (2 * b.sigma_u * b.sigma_u),
                      1.0 / (2 * b.sigma_v * b.sigma_v), b.amplitude});
  }
  Rng noise(j.noise_seed);
  std::vector<double> px(static_cast<std::size_t>(size) * size);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const double dx = x - c, dy = y - c;
      const double d = std::hypot(dx, dy);
      double v;
      if (d < p.pupil_radius) {
        v = 0.06;
      } else if (d > p.iris_radius) {
        v = 0.85;
      } else {
        v = p.iris_base + p.radial_gradient * (d - p.pupil_radius) / (p.iris_radius - p.pupil_radius);
        for (const Placed& b : placed) {
          const double ex = x - b.x, ey = -(y - b.y);
          const double u = ex * b.cu + ey * b.su;
          const double w = -ex * b.su + ey * b.cu;
          const double q = u * u * b.inv_u + w * w * b.inv_v;
          if (q < 30.0) v += b.amp * std::exp(-q);
        }
      }
      v += j.illumination;
      if (j.noise_sigma > 0.0) v += j.noise_sigma * noise.normal();
      px[static_cast<std::size_t>(y) * size + x] = v;
    }
  }
  return GrayImage::clamped(size, size, std::move(px));
}

/// Geometry written to the manifest: the construction circles inset by
/// 1.5 px, as a segmenter hugging the iris ring would report them.
inline IrisGeometry synthetic_geometry(const EyePattern& p, int size = 320) {
  IrisGeometry g;
  g.center_x = g.center_y = (size - 1) / 2.0;
  g.pupil_radius = p.pupil_radius + 1.5;
  g.iris_radius = p.iris_radius - 1.5;
  return g;
}

struct SynthParams {
  int classes = 10;
  int images_per_class = 5;
  double noise_sigma = 0.01;
  std::uint64_t seed = 1;
  std::vector<Session> sessions{Session::VL};
  int image_size = 320;
};

inline std::string synth_subject(int cls) {
  std::string s = std::to_string(cls + 1);
  return "S" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

/// Writes images_per_class PNG captures per class and session into out_dir
/// together with manifest.json, and returns the manifest.
inline DatasetManifest synth_dataset(const SynthParams& params, const std::filesystem::path& out_dir) {
  if (params.classes < 2) throw InvalidArgument("synth_dataset: need at least 2 classes");
  if (params.images_per_class < 1) throw InvalidArgument("synth_dataset: need at least 1 image per class");
  if (!(params.noise_sigma >= 0.0)) throw InvalidArgument("synth_dataset: noise must be >= 0");
  std::filesystem::create_directories(out_dir);
  DatasetManifest m;
  m.base_dir = out_dir;
  for (int cls = 0; cls < params.classes; ++cls) {
    for (Session session : params.sessions) {
      const EyePattern pattern = make_pattern(params.seed, cls, session);
      for (int i = 0; i < params.images_per_class; ++i) {
        const auto jitter = make_jitter(params.seed, cls, session, i, params.noise_sigma);
        const GrayImage img = render_eye(pattern, jitter, params.image_size);
        ManifestEntry e;
        e.subject_id = synth_subject(cls);
        e.eye = Eye::Left;
        e.session = session;
        e.path = e.subject_id + "_L_" + to_string(session) + "_" + std::to_string(i) + ".png";
        e.geometry = synthetic_geometry(pattern, params.image_size);
        save_png(img, out_dir / e.path);
        m.entries.push_back(std::move(e));
      }
    }
  }
  save_manifest(m, out_dir / "manifest.json");
  return m;
}

}  // namespace melanin

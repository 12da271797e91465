#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "melanin/binarize.hpp"
#include "melanin/enhance.hpp"
#include "melanin/image_io.hpp"
#include "melanin/iris.hpp"
#include "melanin/manifest.hpp"
#include "melanin/matching.hpp"
#include "melanin/parallel.hpp"
#include "melanin/shapecode.hpp"
#include "melanin/shapedesc.hpp"

namespace melanin {

/// Every tunable of the enrol/match pipeline. Defaults reproduce the
/// published method: lambda 0.8, PSF variance 25, N = 100, B = 8, and a
/// 150 x 300 strip.
struct PipelineConfig {
  int unwrap_rows = 150;
  int unwrap_cols = 300;
  double lambda = 0.8;
  double psf_variance = 25.0;
  int n_samples = 100;
  int bits = 8;
  std::size_t min_area = 30;
  Align align = Align::Off;
  bool epsilon_floor = true;
  bool exclude_degraded = false;
  std::uint64_t seed = 0;

  TikhonovParams tikhonov() const { return {lambda, psf_variance, 0}; }
  MatchOptions match_options() const { return {align, epsilon_floor, 10}; }

  void validate() const {
    if (unwrap_rows < 8 || unwrap_cols < 8) throw InvalidArgument("config: strip must be >= 8x8");
    tikhonov().validate();
    if (unwrap_rows < tikhonov().kernel_size() || unwrap_cols < tikhonov().kernel_size()) {
      throw InvalidArgument("config: strip smaller than the PSF kernel");
    }
    if (n_samples < 5 || n_samples > 65535) throw InvalidArgument("config: n_samples out of range");
    if (bits < 1 || bits > 16) throw InvalidArgument("config: bits must be in 1..16");
    if (min_area < 1) throw InvalidArgument("config: min_area must be >= 1");
  }

  nlohmann::json to_json() const {
    return {{"unwrap_rows", unwrap_rows},
            {"unwrap_cols", unwrap_cols},
            {"lambda", lambda},
            {"psf_variance", psf_variance},
            {"n_samples", n_samples},
            {"bits", bits},
            {"min_area", min_area},
            {"align", align == Align::Off ? "off" : "shift"},
            {"epsilon_floor", epsilon_floor},
            {"exclude_degraded", exclude_degraded},
            {"seed", seed}};
  }

  /// Overlays the keys present in `j` onto `base`. Unknown keys are errors.
  static PipelineConfig from_json(const nlohmann::json& j, PipelineConfig base) {
    if (!j.is_object()) throw DataError("config must be a JSON object");
    try {
      for (const auto& [key, value] : j.items()) {
        if (key == "unwrap_rows") base.unwrap_rows = value.get<int>();
        else if (key == "unwrap_cols") base.unwrap_cols = value.get<int>();
        else if (key == "lambda") base.lambda = value.get<double>();
        else if (key == "psf_variance") base.psf_variance = value.get<double>();
        else if (key == "n_samples") base.n_samples = value.get<int>();
        else if (key == "bits") base.bits = value.get<int>();
        else if (key == "min_area") base.min_area = value.get<std::size_t>();
        else if (key == "align") base.align = parse_align(value.get<std::string>());
        else if (key == "epsilon_floor") base.epsilon_floor = value.get<bool>();
        else if (key == "exclude_degraded") base.exclude_degraded = value.get<bool>();
        else if (key == "seed") base.seed = value.get<std::uint64_t>();
        else throw DataError("config: unknown key \"" + key + "\"");
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("config: ") + e.what());
    }
    base.validate();
    return base;
  }

  static PipelineConfig from_json(const nlohmann::json& j) { return from_json(j, PipelineConfig{}); }

  static Align parse_align(const std::string& s) {
    if (s == "off") return Align::Off;
    if (s == "shift" || s == "shift-search") return Align::ShiftSearch;
    throw DataError("align must be \"off\" or \"shift\", got \"" + s + "\"");
  }
};

/// All intermediate products of one enrolment, kept for inspection.
struct PipelineStages {
  IrisGeometry geometry;
  IrisStrip strip;
  GrayImage enhanced;
  GrayImage filtered;
  HistogramModel histogram;
  ThresholdSet thresholds;
  SlicedTemplate sliced;
  ObjectSelection selection;
  std::vector<FeatureCurve> curves;
  ShapeCode code;

  std::vector<std::string> warnings() const {
    std::vector<std::string> w;
    if (geometry.estimated) w.emplace_back("geometry estimated by detect_circles");
    if (geometry.clipped) w.emplace_back("pupil touches the image border");
    if (strip.clipped) w.emplace_back("unwrap sampled outside the image");
    if (histogram.warning) w.emplace_back("histogram fit fell back to moments");
    if (thresholds.warning) w.emplace_back("threshold spread adjusted to stay inside (0,1)");
    if (selection.degraded) w.emplace_back("placeholder object used (degraded code)");
    for (std::size_t i = 0; i < curves.size(); ++i) {
      if (curves[i].warning) {
        w.emplace_back("descriptor warning on strip " + strip_label(static_cast<int>(i), code.m));
      }
    }
    return w;
  }
};

inline PipelineStages run_pipeline(const GrayImage& img, const IrisGeometry& geometry,
                                   const PipelineConfig& cfg) {
  cfg.validate();
  PipelineStages s;
  s.geometry = geometry;
  s.strip = unwrap_iris(img, geometry, cfg.unwrap_rows, cfg.unwrap_cols);
  s.enhanced = homomorphic_enhance(s.strip.pixels);
  s.filtered = tikhonov_filter(s.enhanced, cfg.tikhonov());
  s.histogram = fit_gaussian(s.filtered);
  s.thresholds = compute_thresholds(s.histogram);
  s.sliced = slice_image(s.filtered, s.thresholds);
  s.selection = select_objects(s.sliced, cfg.min_area);
  s.curves = compute_features(s.selection.objects, cfg.n_samples);
  s.code = code_from_curves(s.curves, cfg.bits, s.selection.degraded);
  return s;
}

/// Image plus optional geometry to shape code; missing geometry is estimated.
inline PipelineStages encode_image(const GrayImage& img, const std::optional<IrisGeometry>& geometry,
                                   const PipelineConfig& cfg) {
  return run_pipeline(img, geometry ? *geometry : detect_circles(img), cfg);
}

/// Outcome of encoding one manifest entry.
struct EncodedEntry {
  std::size_t index = 0;  // position in the manifest
  bool ok = false;
  ShapeCode code;
  std::vector<std::string> warnings;
  std::string error;
};

/// Encodes every entry, one slot per entry. Image and data errors are
/// recorded in the slot rather than thrown.
inline std::vector<EncodedEntry> encode_entries(const DatasetManifest& manifest,
                                                const PipelineConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  std::vector<EncodedEntry> out(manifest.entries.size());
  parallel_for(out.size(), threads, [&](std::size_t i) {
    EncodedEntry& e = out[i];
    e.index = i;
    try {
      const ManifestEntry& entry = manifest.entries[i];
      const PipelineStages s = encode_image(load_gray(manifest.resolve(entry)), entry.geometry, cfg);
      e.code = s.code;
      e.warnings = s.warnings();
      e.ok = true;
    } catch (const Error& err) {
      e.error = err.what();
    }
  });
  return out;
}

}  // namespace melanin

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "melanin/error.hpp"
#include "melanin/eval.hpp"
#include "melanin/image_io.hpp"
#include "melanin/iris.hpp"
#include "melanin/manifest.hpp"
#include "melanin/matching.hpp"
#include "melanin/pipeline.hpp"
#include "melanin/shapecode.hpp"
#include "melanin/synth.hpp"

namespace melanin::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kPartial = 3 };

/// Thrown for bad flag values discovered after parsing.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Flag values that may override the config file. Unset flags leave the
/// file (or the built-in default) in force.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<double> psf_variance;
  std::optional<int> n_samples;
  std::optional<int> bits;
  std::optional<std::size_t> min_area;
  std::optional<int> unwrap_rows;
  std::optional<int> unwrap_cols;
  std::optional<std::string> unwrap_preset;
  std::optional<std::string> align;
  bool no_epsilon_floor = false;
  bool exclude_degraded = false;
};

struct GlobalOptions {
  std::string config_path;
  unsigned threads = 0;
  std::string out_dir = ".";
  Overrides ov;
};

inline UnwrapPreset parse_preset(const std::string& s) {
  if (s == "standard") return UnwrapPreset::Standard;
  if (s == "large") return UnwrapPreset::Large;
  if (s == "one-degree") return UnwrapPreset::OneDegreeArc;
  throw UsageError("--unwrap-preset must be standard, large or one-degree");
}

/// Built-in defaults, then the config file, then flags.
inline PipelineConfig build_config(const GlobalOptions& g) {
  PipelineConfig cfg;
  if (!g.config_path.empty()) {
    const auto bytes = read_file(g.config_path);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::exception& e) {
      throw DataError("config " + g.config_path + " is not valid JSON: " + e.what());
    }
    cfg = PipelineConfig::from_json(j, cfg);
  }
  const Overrides& o = g.ov;
  if (o.unwrap_preset) {
    const StripSize s = preset_size(parse_preset(*o.unwrap_preset));
    cfg.unwrap_rows = s.rows;
    cfg.unwrap_cols = s.cols;
  }
  if (o.seed) cfg.seed = *o.seed;
  if (o.lambda) cfg.lambda = *o.lambda;
  if (o.psf_variance) cfg.psf_variance = *o.psf_variance;
  if (o.n_samples) cfg.n_samples = *o.n_samples;
  if (o.bits) cfg.bits = *o.bits;
  if (o.min_area) cfg.min_area = *o.min_area;
  if (o.unwrap_rows) cfg.unwrap_rows = *o.unwrap_rows;
  if (o.unwrap_cols) cfg.unwrap_cols = *o.unwrap_cols;
  if (o.no_epsilon_floor) cfg.epsilon_floor = false;
  if (o.exclude_degraded) cfg.exclude_degraded = true;
  try {
    if (o.align) cfg.align = PipelineConfig::parse_align(*o.align);
    cfg.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// enroll
// ---------------------------------------------------------------------------

/// Output names {subject}_{eye}_{session}_{index}.shpc, the index counting
/// captures of the same subject, eye and session in manifest order.
inline std::vector<std::string> enrollment_names(const DatasetManifest& m) {
  std::map<std::string, int> seen;
  std::vector<std::string> names;
  for (const ManifestEntry& e : m.entries) {
    const std::string stem = e.subject_id + "_" + to_string(e.eye) + "_" + to_string(e.session);
    names.push_back(stem + "_" + std::to_string(seen[stem]++) + ".shpc");
  }
  return names;
}

inline int cmd_enroll(const std::string& manifest_path, const GlobalOptions& g, std::ostream& out,
                      std::ostream& err) {
  const PipelineConfig cfg = build_config(g);
  const DatasetManifest m = load_manifest(manifest_path);
  if (m.entries.empty()) throw DataError("manifest " + manifest_path + " has no entries");
  const fs::path dir = g.out_dir;
  fs::create_directories(dir);
  const auto names = enrollment_names(m);
  const auto encoded = encode_entries(m, cfg, resolve_threads(g.threads));
  nlohmann::json log;
  log["seed"] = cfg.seed;
  log["config"] = cfg.to_json();
  log["manifest"] = manifest_path;
  auto& entries = log["entries"] = nlohmann::json::array();
  std::size_t failed = 0;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const EncodedEntry& e = encoded[i];
    nlohmann::json rec{{"image", m.entries[i].path}, {"ok", e.ok}};
    if (e.ok) {
      save_code(e.code, dir / names[i]);
      rec["code"] = names[i];
      rec["degraded"] = e.code.degraded;
      rec["warnings"] = e.warnings;
    } else {
      ++failed;
      rec["error"] = e.error;
      err << "skipped " << m.entries[i].path << ": " << e.error << "\n";
    }
    entries.push_back(std::move(rec));
  }
  log["enrolled"] = encoded.size() - failed;
  log["failed"] = failed;
  write_text_atomic(dir / "enrollment_log.json", log.dump(2) + "\n");
  out << "enrolled " << encoded.size() - failed << " of " << encoded.size() << " images into "
      << dir.string() << " (seed " << cfg.seed << ")\n";
  return failed * 10 > encoded.size() ? kPartial : kOk;
}

// ---------------------------------------------------------------------------
// match
// ---------------------------------------------------------------------------

/// Class label of a gallery file: "{subject}_{eye}" when the name follows
/// the enrollment pattern, otherwise the file stem.
inline std::string gallery_label(const fs::path& file) {
  const std::string stem = file.stem().string();
  std::vector<std::size_t> cuts;
  for (std::size_t i = stem.size(); i-- > 0;) {
    if (stem[i] == '_') cuts.push_back(i);
    if (cuts.size() == 3) break;
  }
  if (cuts.size() < 3) return stem;
  const std::string eye = stem.substr(cuts[2] + 1, cuts[1] - cuts[2] - 1);
  if (eye != "L" && eye != "R") return stem;
  return stem.substr(0, cuts[1]);
}

inline int cmd_match(const std::string& probe_path, const std::string& gallery_dir, int top,
                     const GlobalOptions& g, std::ostream& out) {
  const PipelineConfig cfg = build_config(g);
  const ShapeCode probe = load_code(probe_path);
  if (!fs::is_directory(gallery_dir)) throw DataError("gallery " + gallery_dir + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& de : fs::directory_iterator(gallery_dir)) {
    if (de.is_regular_file() && de.path().extension() == ".shpc") files.push_back(de.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("gallery " + gallery_dir + " has no .shpc files");
  std::vector<GalleryEntry> gallery;
  for (const fs::path& f : files) {
    ShapeCode c;
    try {
      c = load_code(f);
    } catch (const Error& e) {
      throw DataError(f.string() + ": " + e.what());
    }
    if (c.m != probe.m || c.n != probe.n || c.b != probe.b) {
      throw DataError("dimension mismatch: " + f.string() + " is " + std::to_string(c.m) + "x" +
                      std::to_string(c.n) + "x" + std::to_string(c.b) + ", probe is " +
                      std::to_string(probe.m) + "x" + std::to_string(probe.n) + "x" +
                      std::to_string(probe.b));
    }
    gallery.push_back({gallery_label(f), Eye::Left, Session::VL, std::move(c)});
  }
  const auto ranked = classify_nn(probe, gallery, cfg.match_options(), resolve_threads(g.threads));
  out << "# seed=" << cfg.seed << " align=" << (cfg.align == Align::Off ? "off" : "shift") << "\n";
  out << "rank\tsubject\thd\tshift\n";
  const std::size_t rows = top > 0 ? std::min<std::size_t>(static_cast<std::size_t>(top), ranked.size())
                                   : ranked.size();
  for (std::size_t i = 0; i < rows; ++i) {
    char hd[32];
    std::snprintf(hd, sizeof hd, "%.6f", ranked[i].score.hd);
    out << i + 1 << "\t" << ranked[i].subject_id << "\t" << hd << "\t" << ranked[i].score.shift_used
        << "\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOptions {
  std::string manifest;
  std::string session = "VL";
  int k_train = 4;
  int n_per_class = 0;  // 0: smallest class size in the session
  int reps = 20;
  bool all_scenarios = false;
};

inline int smallest_class(const std::vector<LabeledCode>& codes) {
  std::map<std::string, int> count;
  for (const auto& c : codes) ++count[c.class_key];
  int n = 0;
  for (const auto& [k, v] : count) n = n == 0 ? v : std::min(n, v);
  return n;
}

inline int cmd_evaluate(const EvaluateOptions& eo, const GlobalOptions& g, std::ostream& out,
                        std::ostream& err) {
  const PipelineConfig cfg = build_config(g);
  if (eo.reps < 1) throw UsageError("--reps must be >= 1");
  const DatasetManifest m = load_manifest(eo.manifest);
  if (m.entries.empty()) throw DataError("manifest " + eo.manifest + " has no entries");
  std::vector<Session> sessions;
  if (eo.all_scenarios) {
    sessions = {Session::VL, Session::NIR, Session::Fused};
  } else {
    try {
      sessions = {parse_session(eo.session)};
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
  }
  const unsigned threads = resolve_threads(g.threads);
  const auto encoded = encode_entries(m, cfg, threads);
  std::size_t failed = 0;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    if (!encoded[i].ok) {
      ++failed;
      err << "skipped " << m.entries[i].path << ": " << encoded[i].error << "\n";
    }
  }
  const fs::path dir = g.out_dir;
  std::string table = "session,k_train,n_per_class,rank1,rank1_std,rank2,decidability\n";
  for (Session s : sessions) {
    std::vector<std::string> skipped;
    const auto codes = collect_codes(m, encoded, s, cfg.exclude_degraded, &skipped);
    const int n = eo.n_per_class > 0 ? eo.n_per_class : smallest_class(codes);
    std::vector<int> ks;
    if (eo.all_scenarios) {
      for (int k = 1; k < n; ++k) ks.push_back(k);
    } else {
      ks.push_back(eo.k_train);
    }
    for (int k : ks) {
      Scenario sc{k, n, eo.reps, cfg.seed};
      try {
        sc.validate();
      } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
      }
      EvalReport r = run_scenario(codes, sc, cfg.match_options(), threads, to_string(s));
      r.skipped = skipped;
      write_report(r, cfg.to_json(), dir);
      const double d = hd_distributions(r).d_prime;
      const double r2 = r.rank_accuracy.size() > 1 ? r.rank_accuracy[1].accuracy : 1.0;
      table += to_string(s) + "," + std::to_string(k) + "," + std::to_string(n) + "," +
               detail::fmt(r.rank1()) + "," + detail::fmt(r.rank_accuracy.front().std) + "," +
               detail::fmt(r2) + "," + detail::fmt(d) + "\n";
      out << to_string(s) << " k=" << k << " n=" << n << ": rank-1 " << detail::fmt(r.rank1())
          << " +/- " << detail::fmt(r.rank_accuracy.front().std) << ", d' " << detail::fmt(d)
          << " (seed " << cfg.seed << ")\n";
    }
  }
  if (eo.all_scenarios) {
    write_text_atomic(dir / "comparison_table.csv", table);
    out << table;
  }
  return failed * 10 > encoded.size() ? kPartial : kOk;
}

// ---------------------------------------------------------------------------
// inspect
// ---------------------------------------------------------------------------

struct InspectOptions {
  std::string image;
  std::optional<double> cx, cy, r_pupil, r_iris;
  double span_deg = 180.0;
};

/// Filtered strip dimmed, with the selected contours drawn in white.
inline GrayImage contour_overlay(const PipelineStages& s) {
  const GrayImage& base = s.filtered;
  std::vector<double> px(base.values().begin(), base.values().end());
  for (double& v : px) v *= 0.6;
  const int w = base.width(), h = base.height();
  for (const SelectedObject& o : s.selection.objects) {
    for (const Point2& p : o.contour.points()) {
      const int x = static_cast<int>(std::lround(p.x));
      const int y = h - 1 - static_cast<int>(std::lround(p.y));
      if (x >= 0 && x < w && y >= 0 && y < h) px[static_cast<std::size_t>(y) * w + x] = 1.0;
    }
  }
  return GrayImage(w, h, std::move(px));
}

inline std::string features_csv(const PipelineStages& s) {
  std::ostringstream os;
  os << "strip";
  const int n = s.code.n;
  for (int j = 0; j < n; ++j) os << ",s" << j;
  os << "\n";
  for (std::size_t row = 0; row < s.curves.size(); ++row) {
    os << strip_label(static_cast<int>(row), s.code.m);
    for (double v : s.curves[row].samples) os << "," << detail::fmt(v);
    os << "\n";
  }
  return os.str();
}

inline std::string histogram_csv(const HistogramModel& h) {
  std::string out = "bin,center,count,model\n";
  for (int k = 0; k < HistogramModel::kBins; ++k) {
    const double c = HistogramModel::bin_center(k);
    out += std::to_string(k) + "," + detail::fmt(c) + "," + std::to_string(h.bins[static_cast<std::size_t>(k)]) +
           "," + detail::fmt(h.evaluate(c)) + "\n";
  }
  return out;
}

inline int cmd_inspect(const InspectOptions& io, const GlobalOptions& g, std::ostream& out) {
  const PipelineConfig cfg = build_config(g);
  const int given = io.cx.has_value() + io.cy.has_value() + io.r_pupil.has_value() + io.r_iris.has_value();
  if (given != 0 && given != 4) throw UsageError("--cx, --cy, --r-pupil and --r-iris go together");
  std::optional<IrisGeometry> geom;
  if (given == 4) {
    IrisGeometry gm;
    gm.center_x = *io.cx;
    gm.center_y = *io.cy;
    gm.pupil_radius = *io.r_pupil;
    gm.iris_radius = *io.r_iris;
    gm.span_end = gm.span_start + io.span_deg;
    try {
      gm.validate();
    } catch (const InvalidArgument& e) {
      throw UsageError(e.what());
    }
    geom = gm;
  }
  const GrayImage img = load_gray(io.image);
  const PipelineStages s = encode_image(img, geom, cfg);
  const fs::path dir = g.out_dir;
  fs::create_directories(dir);
  save_pgm(s.strip.pixels, dir / "strip.pgm");
  save_pgm(s.enhanced, dir / "enhanced.pgm");
  save_pgm(s.filtered, dir / "filtered.pgm");
  for (int b = 0; b < 6; ++b) {
    save_pgm(mask_to_image(s.sliced.masks[static_cast<std::size_t>(b)]),
             dir / ("band_" + std::to_string(b + 1) + ".pgm"));
  }
  save_pgm(contour_overlay(s), dir / "contours.pgm");
  write_text_atomic(dir / "features.csv", features_csv(s));
  write_text_atomic(dir / "histogram.csv", histogram_csv(s.histogram));
  save_code(s.code, dir / "code.shpc");
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["config"] = cfg.to_json();
  j["image"] = io.image;
  j["geometry"] = {{"cx", s.geometry.center_x},         {"cy", s.geometry.center_y},
                   {"r_pupil", s.geometry.pupil_radius}, {"r_iris", s.geometry.iris_radius},
                   {"span_deg", s.geometry.span()},      {"estimated", s.geometry.estimated}};
  j["histogram"] = {{"amp", s.histogram.amp},           {"mean", s.histogram.mean},
                    {"sigma", s.histogram.sigma},       {"converged", s.histogram.converged},
                    {"iterations", s.histogram.iterations}};
  j["thresholds"] = s.thresholds.t;
  auto& objs = j["objects"] = nlohmann::json::array();
  for (const SelectedObject& o : s.selection.objects) {
    objs.push_back({{"band", o.template_index}, {"rank", o.rank}, {"area", o.area},
                    {"placeholder", o.placeholder}});
  }
  j["degraded"] = s.code.degraded;
  j["warnings"] = s.warnings();
  write_text_atomic(dir / "inspect.json", j.dump(2) + "\n");
  out << "wrote stage dumps to " << dir.string() << " (seed " << cfg.seed << ")\n";
  for (const auto& w : s.warnings()) out << "warning: " << w << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

inline int cmd_synth(SynthParams p, const std::string& sessions, const GlobalOptions& g,
                     std::ostream& out) {
  const PipelineConfig cfg = build_config(g);
  p.seed = cfg.seed;
  p.sessions.clear();
  std::stringstream ss(sessions);
  for (std::string tok; std::getline(ss, tok, ',');) {
    Session s;
    try {
      s = parse_session(tok);
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
    if (s == Session::Fused) throw UsageError("--sessions takes VL and/or NIR");
    p.sessions.push_back(s);
  }
  if (p.sessions.empty()) throw UsageError("--sessions is empty");
  if (p.classes < 2 || p.images_per_class < 1 || !(p.noise_sigma >= 0.0)) {
    throw UsageError("synth needs --classes >= 2, --images >= 1 and --noise >= 0");
  }
  const DatasetManifest m = synth_dataset(p, g.out_dir);
  out << "wrote " << m.entries.size() << " images and manifest.json to " << g.out_dir << " (seed "
      << p.seed << ")\n";
  return kOk;
}

// ---------------------------------------------------------------------------
// entry point
// ---------------------------------------------------------------------------

inline void add_global_options(CLI::App& app, GlobalOptions& g) {
  app.add_option("--config", g.config_path, "JSON pipeline config; flags override it");
  app.add_option("--threads", g.threads, "Worker threads (0 = all cores)");
  app.add_option("--out", g.out_dir, "Output directory");
  Overrides& o = g.ov;
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--lambda", o.lambda, "Tikhonov regularisation weight");
  app.add_option("--psf-variance", o.psf_variance, "Gaussian PSF variance");
  app.add_option("--n-samples", o.n_samples, "Samples per descriptor curve");
  app.add_option("--bits", o.bits, "Bits per code sample");
  app.add_option("--min-area", o.min_area, "Smallest component kept as an object");
  app.add_option("--unwrap-rows", o.unwrap_rows, "Strip rows");
  app.add_option("--unwrap-cols", o.unwrap_cols, "Strip columns");
  app.add_option("--unwrap-preset", o.unwrap_preset, "standard (150x300), large (256x512), one-degree (150x180)");
  app.add_option("--align", o.align, "Matching alignment: off or shift");
  app.add_flag("--no-epsilon-floor", o.no_epsilon_floor, "Let zero strip distances through");
  app.add_flag("--exclude-degraded", o.exclude_degraded, "Drop codes that needed placeholder objects");
}

/// Parses and runs one command line, writing to the given streams.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  CLI::App app{"Iris recognition from pigment-melanin shape codes", "melanin"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  add_global_options(app, g);

  std::string manifest;
  auto* enroll = app.add_subcommand("enroll", "Encode every manifest image to a .shpc file");
  enroll->add_option("--manifest", manifest, "Manifest JSON")->required();

  std::string probe, gallery;
  int top = 0;
  auto* match = app.add_subcommand("match", "Rank gallery subjects against a probe code");
  match->add_option("probe", probe, "Probe .shpc")->required();
  match->add_option("gallery", gallery, "Directory of .shpc files")->required();
  match->add_option("--top", top, "Print only the best N subjects");

  EvaluateOptions eo;
  auto* evaluate = app.add_subcommand("evaluate", "Run a train/test scenario and write reports");
  evaluate->add_option("--manifest", eo.manifest, "Manifest JSON")->required();
  evaluate->add_option("--session", eo.session, "VL, NIR or FUSED");
  evaluate->add_option("--k-train", eo.k_train, "Training images per class");
  evaluate->add_option("--n-per-class", eo.n_per_class, "Images used per class (default: smallest class)");
  evaluate->add_option("--reps", eo.reps, "Random repetitions");
  evaluate->add_flag("--all-scenarios", eo.all_scenarios,
                     "Every k in 1..n-1 for VL, NIR and FUSED, plus a comparison table");

  InspectOptions io;
  auto* inspect = app.add_subcommand("inspect", "Dump every pipeline stage for one image");
  inspect->add_option("image", io.image, "Eye image (PNG or PGM)")->required();
  inspect->add_option("--cx", io.cx, "Iris centre x");
  inspect->add_option("--cy", io.cy, "Iris centre y");
  inspect->add_option("--r-pupil", io.r_pupil, "Pupil radius");
  inspect->add_option("--r-iris", io.r_iris, "Iris radius");
  inspect->add_option("--span-deg", io.span_deg, "Angular span unwrapped from 180 degrees");

  SynthParams sp;
  std::string sessions = "VL";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic iris dataset");
  synth->add_option("--classes", sp.classes, "Number of eyes");
  synth->add_option("--images", sp.images_per_class, "Captures per eye and session");
  synth->add_option("--noise", sp.noise_sigma, "Pixel noise sigma");
  synth->add_option("--sessions", sessions, "Comma-separated: VL,NIR");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }
  try {
    if (*enroll) return cmd_enroll(manifest, g, out, err);
    if (*match) return cmd_match(probe, gallery, top, g, out);
    if (*evaluate) return cmd_evaluate(eo, g, out, err);
    if (*inspect) return cmd_inspect(io, g, out);
    if (*synth) return cmd_synth(sp, sessions, g, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace melanin::cli

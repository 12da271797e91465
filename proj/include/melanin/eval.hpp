#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "melanin/error.hpp"
#include "melanin/image_io.hpp"
#include "melanin/manifest.hpp"
#include "melanin/matching.hpp"
#include "melanin/parallel.hpp"
#include "melanin/pipeline.hpp"
#include "melanin/rng.hpp"

namespace melanin {

struct Scenario {
  int k_train = 4;
  int n_per_class = 5;
  int repetitions = 20;
  std::uint64_t seed = 0;

  void validate() const {
    if (k_train < 1 || k_train >= n_per_class) {
      throw InvalidArgument("scenario: need 1 <= k_train < n_per_class (k=" + std::to_string(k_train) +
                            ", n=" + std::to_string(n_per_class) + ")");
    }
    if (repetitions < 1) throw InvalidArgument("scenario: repetitions must be >= 1");
  }
};

/// A code with its class. Images of a class are listed in capture order.
struct LabeledCode {
  std::string class_key;
  ShapeCode code;
};

struct RankPoint {
  int rank = 1;
  double accuracy = 0.0;  // mean over repetitions
  double std = 0.0;       // population std over repetitions
};

struct ClassResult {
  std::string class_key;
  double rank1 = 0.0;  // fraction of this class's probes ranked first, over all repetitions
  int probes = 0;
};

struct EvalReport {
  Scenario scenario;
  std::string session = "VL";
  int classes = 0;
  std::vector<RankPoint> rank_accuracy;  // ranks 1..classes
  std::vector<double> genuine;           // pooled over repetitions, in order
  std::vector<double> impostor;
  std::size_t genuine_per_rep = 0;
  std::size_t impostor_per_rep = 0;
  std::vector<ClassResult> per_class;  // worst first
  std::vector<std::string> skipped;    // entries that failed to encode or were excluded

  double rank1() const { return rank_accuracy.empty() ? 0.0 : rank_accuracy.front().accuracy; }
};

namespace detail {

inline double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Population variance, accumulated about the first value so a constant
// sample gives exactly zero.
inline double variance_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  const double k = v.front();
  double s = 0.0, s2 = 0.0;
  for (double x : v) {
    s += x - k;
    s2 += (x - k) * (x - k);
  }
  const double n = static_cast<double>(v.size());
  return std::max(0.0, s2 / n - (s / n) * (s / n));
}

struct RepResult {
  std::vector<int> ranks;        // one per probe, true-class position (1-based)
  std::vector<std::size_t> probe_class;
  std::vector<double> genuine;
  std::vector<double> impostor;
};

}  // namespace detail

/// Runs the scenario over pre-encoded codes. Every class must have at least
/// n_per_class codes; larger classes are subsampled per repetition.
inline EvalReport run_scenario(const std::vector<LabeledCode>& codes, const Scenario& sc,
                               const MatchOptions& opt = {}, unsigned threads = 1,
                               const std::string& session = "VL") {
  sc.validate();
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < codes.size(); ++i) by_class[codes[i].class_key].push_back(i);
  if (by_class.size() < 2) throw DataError("evaluate: need at least 2 classes");
  std::vector<std::string> keys;
  std::vector<std::vector<std::size_t>> members;
  for (auto& [key, idx] : by_class) {
    if (idx.size() < static_cast<std::size_t>(sc.n_per_class)) {
      throw DataError("evaluate: class " + key + " has " + std::to_string(idx.size()) +
                      " images, scenario needs " + std::to_string(sc.n_per_class));
    }
    keys.push_back(key);
    members.push_back(idx);
  }
  const std::size_t classes = keys.size();
  const std::size_t k = static_cast<std::size_t>(sc.k_train);
  const std::size_t tests = static_cast<std::size_t>(sc.n_per_class) - k;

  std::vector<detail::RepResult> reps(static_cast<std::size_t>(sc.repetitions));
  parallel_for(reps.size(), threads, [&](std::size_t r) {
    Rng rng(Rng::derive(sc.seed, {0x53504c4954ull, r}));
    std::vector<GalleryEntry> gallery;
    std::vector<std::size_t> gallery_class;
    std::vector<std::pair<std::size_t, std::size_t>> probes;  // (class, code index)
    for (std::size_t c = 0; c < classes; ++c) {
      std::vector<std::size_t> pick = members[c];
      rng.shuffle(pick);
      for (std::size_t i = 0; i < k; ++i) {
        gallery.push_back({keys[c], Eye::Left, Session::VL, codes[pick[i]].code});
        gallery_class.push_back(c);
      }
      for (std::size_t i = k; i < k + tests; ++i) probes.emplace_back(c, pick[i]);
    }
    detail::RepResult& out = reps[r];
    for (const auto& [cls, idx] : probes) {
      const auto scores = score_gallery(codes[idx].code, gallery, opt);
      for (std::size_t g = 0; g < gallery.size(); ++g) {
        (gallery_class[g] == cls ? out.genuine : out.impostor).push_back(scores[g].hd);
      }
      const auto ranked = rank_subjects(gallery, scores);
      int rank = 0;
      for (std::size_t p = 0; p < ranked.size(); ++p) {
        if (ranked[p].subject_id == keys[cls]) rank = static_cast<int>(p) + 1;
      }
      out.ranks.push_back(rank);
      out.probe_class.push_back(cls);
    }
  });

  EvalReport rep;
  rep.scenario = sc;
  rep.session = session;
  rep.classes = static_cast<int>(classes);
  rep.genuine_per_rep = classes * tests * k;
  rep.impostor_per_rep = classes * tests * (classes - 1) * k;
  std::vector<std::vector<double>> acc(classes, std::vector<double>(reps.size()));
  std::vector<int> class_hits(classes, 0), class_probes(classes, 0);
  for (std::size_t r = 0; r < reps.size(); ++r) {
    const auto& rr = reps[r];
    if (rr.genuine.size() != rep.genuine_per_rep || rr.impostor.size() != rep.impostor_per_rep) {
      throw std::logic_error("evaluate: comparison count does not match the scenario");
    }
    rep.genuine.insert(rep.genuine.end(), rr.genuine.begin(), rr.genuine.end());
    rep.impostor.insert(rep.impostor.end(), rr.impostor.begin(), rr.impostor.end());
    for (std::size_t rank = 1; rank <= classes; ++rank) {
      const auto hits = std::count_if(rr.ranks.begin(), rr.ranks.end(),
                                      [&](int x) { return static_cast<std::size_t>(x) <= rank; });
      acc[rank - 1][r] = static_cast<double>(hits) / static_cast<double>(rr.ranks.size());
    }
    for (std::size_t p = 0; p < rr.ranks.size(); ++p) {
      ++class_probes[rr.probe_class[p]];
      if (rr.ranks[p] == 1) ++class_hits[rr.probe_class[p]];
    }
  }
  for (std::size_t rank = 1; rank <= classes; ++rank) {
    rep.rank_accuracy.push_back({static_cast<int>(rank), detail::mean_of(acc[rank - 1]),
                                 std::sqrt(detail::variance_of(acc[rank - 1]))});
  }
  for (std::size_t c = 0; c < classes; ++c) {
    rep.per_class.push_back(
        {keys[c], static_cast<double>(class_hits[c]) / class_probes[c], class_probes[c]});
  }
  std::stable_sort(rep.per_class.begin(), rep.per_class.end(),
                   [](const ClassResult& a, const ClassResult& b) { return a.rank1 < b.rank1; });
  return rep;
}

/// Collects the codes of one session (or VL+NIR fused) from an encoded
/// manifest. Fusion pairs the i-th VL and i-th NIR capture of each class.
inline std::vector<LabeledCode> collect_codes(const DatasetManifest& manifest,
                                              const std::vector<EncodedEntry>& encoded, Session session,
                                              bool exclude_degraded,
                                              std::vector<std::string>* skipped = nullptr) {
  auto usable = [&](std::size_t i) {
    const EncodedEntry& e = encoded[i];
    if (!e.ok) {
      if (skipped) skipped->push_back(manifest.entries[i].path + ": " + e.error);
      return false;
    }
    if (exclude_degraded && e.code.degraded) {
      if (skipped) skipped->push_back(manifest.entries[i].path + ": degraded code excluded");
      return false;
    }
    return true;
  };
  std::vector<LabeledCode> out;
  if (session != Session::Fused) {
    for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
      const ManifestEntry& e = manifest.entries[i];
      if (e.session == session && usable(i)) out.push_back({e.class_key(), encoded[i].code});
    }
    return out;
  }
  std::map<std::string, std::pair<std::vector<std::size_t>, std::vector<std::size_t>>> slots;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const ManifestEntry& e = manifest.entries[i];
    auto& [vl, nir] = slots[e.class_key()];
    (e.session == Session::VL ? vl : nir).push_back(i);
  }
  for (const auto& [key, pair] : slots) {
    const auto& [vl, nir] = pair;
    if (vl.size() != nir.size()) {
      throw DataError("evaluate: FUSED needs paired VL and NIR images; class " + key + " has " +
                      std::to_string(vl.size()) + " VL and " + std::to_string(nir.size()) + " NIR");
    }
    for (std::size_t s = 0; s < vl.size(); ++s) {
      const bool a = usable(vl[s]);
      const bool b = usable(nir[s]);
      if (a && b) out.push_back({key, fuse_codes(encoded[vl[s]].code, encoded[nir[s]].code)});
    }
  }
  return out;
}

/// Encodes the manifest and runs the scenario on one session.
inline EvalReport run_scenario(const DatasetManifest& manifest, Session session, const Scenario& sc,
                               const PipelineConfig& cfg, unsigned threads = 1) {
  sc.validate();
  const auto encoded = encode_entries(manifest, cfg, threads);
  std::vector<std::string> skipped;
  const auto codes = collect_codes(manifest, encoded, session, cfg.exclude_degraded, &skipped);
  EvalReport rep = run_scenario(codes, sc, cfg.match_options(), threads, to_string(session));
  rep.skipped = std::move(skipped);
  return rep;
}

struct HdDistributions {
  int bins = 0;
  std::vector<double> intra;  // unit mass over [0,1]
  std::vector<double> inter;
  double d_prime = 0.0;
};

/// Decidability |mu_inter - mu_intra| / sqrt((var_intra + var_inter) / 2).
inline double decidability(const std::vector<double>& genuine, const std::vector<double>& impostor) {
  const double diff = std::abs(detail::mean_of(impostor) - detail::mean_of(genuine));
  const double spread = std::sqrt((detail::variance_of(genuine) + detail::variance_of(impostor)) / 2.0);
  if (spread == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return diff / spread;
}

inline std::vector<double> unit_histogram(const std::vector<double>& v, int bins) {
  std::vector<double> h(static_cast<std::size_t>(bins), 0.0);
  for (double x : v) {
    const int b = std::clamp(static_cast<int>(std::floor(x * bins)), 0, bins - 1);
    h[static_cast<std::size_t>(b)] += 1.0;
  }
  for (double& x : h) x /= static_cast<double>(v.size());
  return h;
}

inline HdDistributions hd_distributions(const EvalReport& report, int bins = 50) {
  if (bins < 1) throw InvalidArgument("hd_distributions: bins must be >= 1");
  if (report.genuine.empty() || report.impostor.empty()) {
    throw DataError("hd_distributions: empty genuine or impostor pool");
  }
  return {bins, unit_histogram(report.genuine, bins), unit_histogram(report.impostor, bins),
          decidability(report.genuine, report.impostor)};
}

namespace detail {

inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace detail

/// CMC rows "rank,accuracy,std".
inline std::string rank_curve(const EvalReport& report) {
  std::string out = "rank,accuracy,std\n";
  for (const RankPoint& p : report.rank_accuracy) {
    out += std::to_string(p.rank) + "," + detail::fmt(p.accuracy) + "," + detail::fmt(p.std) + "\n";
  }
  return out;
}

struct RocPoint {
  double threshold;
  double far;  // impostor scores <= threshold
  double frr;  // genuine scores > threshold
};

inline std::vector<RocPoint> roc(const EvalReport& report, int steps = 200) {
  if (report.genuine.empty() || report.impostor.empty()) {
    throw DataError("roc: empty genuine or impostor pool");
  }
  std::vector<double> g = report.genuine, im = report.impostor;
  std::sort(g.begin(), g.end());
  std::sort(im.begin(), im.end());
  std::vector<RocPoint> out;
  for (int i = 0; i <= steps; ++i) {
    const double t = static_cast<double>(i) / steps;
    const auto accepted_im = std::upper_bound(im.begin(), im.end(), t) - im.begin();
    const auto accepted_g = std::upper_bound(g.begin(), g.end(), t) - g.begin();
    out.push_back({t, static_cast<double>(accepted_im) / im.size(),
                   1.0 - static_cast<double>(accepted_g) / g.size()});
  }
  return out;
}

/// ROC rows "threshold,far,frr" over HD thresholds.
inline std::string roc_curve(const EvalReport& report, int steps = 200) {
  std::string out = "threshold,far,frr\n";
  for (const RocPoint& p : roc(report, steps)) {
    out += detail::fmt(p.threshold) + "," + detail::fmt(p.far) + "," + detail::fmt(p.frr) + "\n";
  }
  return out;
}

inline nlohmann::json report_to_json(const EvalReport& r, const nlohmann::json& config, int bins = 50) {
  nlohmann::json j;
  j["session"] = r.session;
  j["seed"] = r.scenario.seed;
  j["scenario"] = {{"k_train", r.scenario.k_train},
                   {"n_per_class", r.scenario.n_per_class},
                   {"repetitions", r.scenario.repetitions},
                   {"seed", r.scenario.seed}};
  j["config"] = config;
  j["classes"] = r.classes;
  j["comparisons_per_repetition"] = {{"genuine", r.genuine_per_rep}, {"impostor", r.impostor_per_rep}};
  auto& cmc = j["rank_accuracy"] = nlohmann::json::array();
  for (const RankPoint& p : r.rank_accuracy) {
    cmc.push_back({{"rank", p.rank}, {"accuracy", p.accuracy}, {"std", p.std}});
  }
  if (!r.genuine.empty() && !r.impostor.empty()) {
    const HdDistributions d = hd_distributions(r, bins);
    j["hd_distributions"] = {{"bins", d.bins}, {"intra", d.intra}, {"inter", d.inter}};
    j["decidability"] = d.d_prime;  // infinite values serialise as null
    j["intra_mean"] = detail::mean_of(r.genuine);
    j["inter_mean"] = detail::mean_of(r.impostor);
  }
  auto& pc = j["per_class"] = nlohmann::json::array();
  for (const ClassResult& c : r.per_class) {
    pc.push_back({{"class", c.class_key}, {"rank1", c.rank1}, {"probes", c.probes}});
  }
  j["skipped"] = r.skipped;
  return j;
}

/// Writes {session}_{k}train.csv (CMC), {session}_{k}train_roc.csv and
/// {session}_{k}train.json into out_dir.
inline std::vector<std::filesystem::path> write_report(const EvalReport& r, const nlohmann::json& config,
                                                       const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string stem = r.session + "_" + std::to_string(r.scenario.k_train) + "train";
  const std::vector<std::filesystem::path> paths{out_dir / (stem + ".csv"), out_dir / (stem + "_roc.csv"),
                                                 out_dir / (stem + ".json")};
  write_text_atomic(paths[0], rank_curve(r));
  write_text_atomic(paths[1], roc_curve(r));
  write_text_atomic(paths[2], report_to_json(r, config).dump(2) + "\n");
  return paths;
}

}  // namespace melanin

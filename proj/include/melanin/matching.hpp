#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include "melanin/error.hpp"
#include "melanin/manifest.hpp"
#include "melanin/parallel.hpp"
#include "melanin/shapecode.hpp"

namespace melanin {

enum class Align { Off, ShiftSearch };

struct MatchOptions {
  Align align = Align::Off;
  bool epsilon_floor = true;  // floor each strip distance at one bit, 1/(n*b)
  int max_shift = 10;         // shift-search window, in samples
};

struct MatchScore {
  double hd = 1.0;
  std::vector<double> per_feature;  // unfloored strip distances
  int shift_used = 0;               // circular shift applied to the second code
};

/// Geometric mean, computed with rescaling so long products of small
/// factors do not underflow.
inline double geometric_mean(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  if (std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); })) return v.front();
  double prod = 1.0;
  int scaled = 0;
  for (double x : v) {
    prod *= x;
    if (prod == 0.0) return 0.0;
    if (prod < 1e-200) {
      prod *= 1e200;
      ++scaled;
    }
  }
  const double m = static_cast<double>(v.size());
  double out = std::pow(prod, 1.0 / m);
  if (scaled > 0) out *= std::pow(10.0, -200.0 * scaled / m);
  return out;
}

/// Each strip circularly shifted right by s samples: out[j] = in[j - s].
inline ShapeCode shift_code(const ShapeCode& code, int s) {
  ShapeCode out = code;
  const int n = code.n;
  for (int row = 0; row < code.m; ++row) {
    for (int j = 0; j < n; ++j) {
      const int src = ((j - s) % n + n) % n;
      out.values[static_cast<std::size_t>(row) * n + j] = code.at(row, src);
    }
  }
  return out;
}

inline ShapeCode complement(const ShapeCode& code) {
  ShapeCode out = code;
  const auto mask = static_cast<std::uint16_t>((1u << code.b) - 1u);
  for (auto& v : out.values) v = static_cast<std::uint16_t>(~v & mask);
  return out;
}

namespace detail {

inline std::vector<double> strip_distances(const ShapeCode& a, const ShapeCode& b, int shift) {
  std::vector<double> d(static_cast<std::size_t>(a.m));
  const double norm = static_cast<double>(a.n) * a.b;
  for (int row = 0; row < a.m; ++row) {
    unsigned long bits = 0;
    for (int j = 0; j < a.n; ++j) {
      const int src = ((j - shift) % a.n + a.n) % a.n;
      bits += static_cast<unsigned>(std::popcount(static_cast<unsigned>(a.at(row, j) ^ b.at(row, src))));
    }
    d[static_cast<std::size_t>(row)] = static_cast<double>(bits) / norm;
  }
  return d;
}

inline double pos_combine(const std::vector<double>& d, double eps, bool floor) {
  if (!floor) return geometric_mean(d);
  std::vector<double> f(d);
  for (double& x : f) x = std::max(x, eps);
  return geometric_mean(f);
}

}  // namespace detail

/// Product-of-sums Hamming distance: the geometric mean over strips of the
/// fraction of differing bits. With shift search the second code's strips
/// are circularly shifted together by s in [-max_shift, max_shift] and the
/// smallest distance is kept (smallest |s| wins ties, then positive s).
inline MatchScore pos_hamming(const ShapeCode& a, const ShapeCode& b, const MatchOptions& opt = {}) {
  if (a.m != b.m || a.n != b.n || a.b != b.b) {
    throw InvalidArgument("pos_hamming: code dimensions differ (" + std::to_string(a.m) + "x" +
                          std::to_string(a.n) + "x" + std::to_string(a.b) + " vs " +
                          std::to_string(b.m) + "x" + std::to_string(b.n) + "x" +
                          std::to_string(b.b) + ")");
  }
  const double eps = 1.0 / (static_cast<double>(a.n) * a.b);
  MatchScore best;
  best.per_feature = detail::strip_distances(a, b, 0);
  best.hd = detail::pos_combine(best.per_feature, eps, opt.epsilon_floor);
  if (opt.align == Align::ShiftSearch) {
    const int window = std::min(opt.max_shift, a.n - 1);
    for (int mag = 1; mag <= window; ++mag) {
      for (int s : {mag, -mag}) {
        auto d = detail::strip_distances(a, b, s);
        const double hd = detail::pos_combine(d, eps, opt.epsilon_floor);
        if (hd < best.hd) {
          best = {hd, std::move(d), s};
        }
      }
    }
  }
  return best;
}

/// Strip-wise concatenation of a VL code and an NIR code of the same eye.
inline ShapeCode fuse_codes(const ShapeCode& vl, const ShapeCode& nir) {
  if (vl.n != nir.n || vl.b != nir.b) {
    throw InvalidArgument("fuse_codes: VL and NIR codes differ in samples or bit depth");
  }
  ShapeCode out;
  out.m = vl.m + nir.m;
  out.n = vl.n;
  out.b = vl.b;
  out.values = vl.values;
  out.values.insert(out.values.end(), nir.values.begin(), nir.values.end());
  out.degraded = vl.degraded || nir.degraded;
  return out;
}

struct GalleryEntry {
  std::string subject_id;
  Eye eye = Eye::Left;
  Session session = Session::VL;
  ShapeCode code;
};

struct RankedMatch {
  std::string subject_id;
  MatchScore score;
  std::size_t entry = 0;  // gallery index that produced the subject's best score
};

/// Scores against every gallery entry, in gallery order.
inline std::vector<MatchScore> score_gallery(const ShapeCode& probe,
                                             const std::vector<GalleryEntry>& gallery,
                                             const MatchOptions& opt = {}, unsigned threads = 1) {
  std::vector<MatchScore> scores(gallery.size());
  parallel_for(gallery.size(), threads,
               [&](std::size_t i) { scores[i] = pos_hamming(probe, gallery[i].code, opt); });
  return scores;
}

/// Nearest-neighbour ranking of subjects: a subject scores the minimum HD
/// over its gallery codes; subjects are sorted by HD, then by id.
inline std::vector<RankedMatch> rank_subjects(const std::vector<GalleryEntry>& gallery,
                                              const std::vector<MatchScore>& scores) {
  std::map<std::string, RankedMatch> best;
  for (std::size_t i = 0; i < gallery.size(); ++i) {
    auto [it, fresh] = best.try_emplace(gallery[i].subject_id);
    if (fresh || scores[i].hd < it->second.score.hd) {
      it->second = {gallery[i].subject_id, scores[i], i};
    }
  }
  std::vector<RankedMatch> out;
  out.reserve(best.size());
  for (auto& [id, m] : best) out.push_back(std::move(m));
  std::stable_sort(out.begin(), out.end(), [](const RankedMatch& x, const RankedMatch& y) {
    return x.score.hd != y.score.hd ? x.score.hd < y.score.hd : x.subject_id < y.subject_id;
  });
  return out;
}

inline std::vector<RankedMatch> classify_nn(const ShapeCode& probe,
                                            const std::vector<GalleryEntry>& gallery,
                                            const MatchOptions& opt = {}, unsigned threads = 1) {
  if (gallery.empty()) throw InvalidArgument("classify_nn: empty gallery");
  return rank_subjects(gallery, score_gallery(probe, gallery, opt, threads));
}

}  // namespace melanin

#pragma once

#include <array>
#include <cstddef>
#include <deque>
#include <unordered_map>
#include <vector>

#include "melanin/image.hpp"

namespace melanin {

struct Pixel {
  int x = 0;
  int y = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

struct Component {
  int label = 0;
  std::size_t area = 0;
  std::size_t first = 0;  // raster index of the top-left-most pixel
  int min_x = 0, min_y = 0, max_x = 0, max_y = 0;
  bool touches_border = false;
  std::vector<std::size_t> pixels;  // raster indices
};

struct Labeling {
  int width = 0;
  int height = 0;
  std::vector<int> labels;  // 0 = background, otherwise 1-based component label
  std::vector<Component> components;  // components[l - 1] has label l

  bool is(int x, int y, int label) const {
    return x >= 0 && y >= 0 && x < width && y < height &&
           labels[static_cast<std::size_t>(y) * width + x] == label;
  }
};

namespace detail {

// Moore neighbourhood, clockwise on screen (y grows downward) starting west.
inline constexpr std::array<Pixel, 8> kMoore{{{-1, 0}, {-1, -1}, {0, -1}, {1, -1},
                                              {1, 0},  {1, 1},   {0, 1},  {-1, 1}}};

inline int moore_index(int dx, int dy) {
  for (int k = 0; k < 8; ++k) {
    if (kMoore[k].x == dx && kMoore[k].y == dy) return k;
  }
  return -1;
}

}  // namespace detail

/// 8-connected component labelling. Labels are assigned in raster order of
/// each component's first pixel, so the result is deterministic.
inline Labeling label_components(const BinaryMask& mask) {
  Labeling out;
  out.width = mask.width;
  out.height = mask.height;
  out.labels.assign(mask.bits.size(), 0);
  std::deque<std::size_t> queue;
  for (std::size_t start = 0; start < mask.bits.size(); ++start) {
    if (!mask.bits[start] || out.labels[start] != 0) continue;
    Component c;
    c.label = static_cast<int>(out.components.size()) + 1;
    c.first = start;
    c.min_x = c.max_x = static_cast<int>(start % mask.width);
    c.min_y = c.max_y = static_cast<int>(start / mask.width);
    out.labels[start] = c.label;
    queue.push_back(start);
    while (!queue.empty()) {
      const std::size_t idx = queue.front();
      queue.pop_front();
      c.pixels.push_back(idx);
      const int x = static_cast<int>(idx % mask.width);
      const int y = static_cast<int>(idx / mask.width);
      c.min_x = std::min(c.min_x, x);
      c.max_x = std::max(c.max_x, x);
      c.min_y = std::min(c.min_y, y);
      c.max_y = std::max(c.max_y, y);
      if (x == 0 || y == 0 || x == mask.width - 1 || y == mask.height - 1) {
        c.touches_border = true;
      }
      for (const Pixel& d : detail::kMoore) {
        const int nx = x + d.x;
        const int ny = y + d.y;
        if (nx < 0 || ny < 0 || nx >= mask.width || ny >= mask.height) continue;
        const std::size_t n = static_cast<std::size_t>(ny) * mask.width + nx;
        if (mask.bits[n] && out.labels[n] == 0) {
          out.labels[n] = c.label;
          queue.push_back(n);
        }
      }
    }
    c.area = c.pixels.size();
    out.components.push_back(std::move(c));
  }
  return out;
}

/// Outer boundary of one component by Moore-neighbour tracing, started at
/// the component's top-left-most pixel. Tracing stops when the start pixel
/// is left again by the same move that began the trace (Jacob's criterion).
/// The closing return to the start pixel is not repeated at the end.
inline std::vector<Pixel> trace_boundary(const Labeling& lab, int label) {
  const Component& comp = lab.components.at(static_cast<std::size_t>(label) - 1);
  const Pixel start{static_cast<int>(comp.first % lab.width),
                    static_cast<int>(comp.first / lab.width)};
  std::vector<Pixel> trace{start};
  Pixel p = start;
  Pixel back{start.x - 1, start.y};
  Pixel first_step{};
  bool have_first = false;
  const std::size_t guard = 4 * comp.area + 16;
  for (std::size_t steps = 0; steps < guard; ++steps) {
    const int from = detail::moore_index(back.x - p.x, back.y - p.y);
    bool found = false;
    Pixel next{};
    for (int i = 1; i <= 8; ++i) {
      const int k = (from + i) % 8;
      const Pixel c{p.x + detail::kMoore[k].x, p.y + detail::kMoore[k].y};
      if (lab.is(c.x, c.y, label)) {
        const int kb = (k + 7) % 8;
        back = {p.x + detail::kMoore[kb].x, p.y + detail::kMoore[kb].y};
        next = c;
        found = true;
        break;
      }
    }
    if (!found) break;  // isolated pixel
    if (have_first && p == start && next == first_step) break;
    if (!have_first) {
      first_step = next;
      have_first = true;
    }
    trace.push_back(next);
    p = next;
  }
  if (trace.size() > 1 && trace.back() == start) trace.pop_back();
  return trace;
}

/// Splits a closed pixel trace that revisits pixels (one-pixel necks, spurs)
/// into simple cycles and returns the one enclosing the largest area.
/// `area_of` measures a candidate cycle.
template <typename AreaFn>
std::vector<Pixel> largest_simple_loop(const std::vector<Pixel>& trace, AreaFn area_of) {
  auto key = [](const Pixel& p) {
    return (static_cast<long long>(p.y) << 32) ^ static_cast<unsigned>(p.x);
  };
  std::vector<Pixel> stack;
  std::unordered_map<long long, std::size_t> where;
  std::vector<Pixel> best;
  double best_area = -1.0;
  auto consider = [&](std::vector<Pixel> loop) {
    const double a = std::abs(area_of(loop));
    if (a > best_area) {
      best_area = a;
      best = std::move(loop);
    }
  };
  for (const Pixel& p : trace) {
    auto it = where.find(key(p));
    if (it == where.end()) {
      where.emplace(key(p), stack.size());
      stack.push_back(p);
      continue;
    }
    const std::size_t i = it->second;
    consider(std::vector<Pixel>(stack.begin() + static_cast<std::ptrdiff_t>(i), stack.end()));
    for (std::size_t j = i + 1; j < stack.size(); ++j) where.erase(key(stack[j]));
    stack.resize(i + 1);
  }
  consider(std::move(stack));
  return best;
}

}  // namespace melanin

#pragma once

// Independent reference computations used only by tests. They deliberately
// take a different route from the library (maps, natural log, full
// enumeration) so a shared bug cannot hide.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "scenedesc/labelmap.hpp"
#include "scenedesc/raster.hpp"

namespace scenedesc::oracle {

inline double entropy_of(const std::map<int, long>& counts) {
  long total = 0;
  for (const auto& [k, c] : counts) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  for (const auto& [k, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    h += p * std::log(1.0 / p);
  }
  return h / std::log(2.0);
}

inline double spid(const Raster& r) {
  std::map<int, long> hi, hx, hy;
  const auto s = r.samples();
  const int w = r.width(), h = r.height();
  for (int i = 0; i < w * h; ++i) hi[s[static_cast<std::size_t>(i)]]++;
  for (int y = 0; y < h; ++y)
    for (int x = 1; x < w; ++x) hx[int(s[static_cast<std::size_t>(y * w + x)]) - int(s[static_cast<std::size_t>(y * w + x - 1)])]++;
  for (int y = 1; y < h; ++y)
    for (int x = 0; x < w; ++x) hy[int(s[static_cast<std::size_t>(y * w + x)]) - int(s[static_cast<std::size_t>((y - 1) * w + x)])]++;
  return (entropy_of(hi) + entropy_of(hx) + entropy_of(hy)) / 3.0;
}

/// Pixel sets of 4-connected components of `marked`, flood fill by queue.
inline std::vector<std::vector<int>> components(int w, int h, const std::vector<bool>& marked) {
  std::vector<int> seen(static_cast<std::size_t>(w * h), 0);
  std::vector<std::vector<int>> out;
  for (int start = 0; start < w * h; ++start) {
    if (!marked[static_cast<std::size_t>(start)] || seen[static_cast<std::size_t>(start)]) continue;
    std::vector<int> comp{start};
    seen[static_cast<std::size_t>(start)] = 1;
    for (std::size_t q = 0; q < comp.size(); ++q) {
      const int i = comp[q], x = i % w, y = i / w;
      const int nb[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
      for (const auto& p : nb) {
        if (p[0] < 0 || p[1] < 0 || p[0] >= w || p[1] >= h) continue;
        const int j = p[1] * w + p[0];
        if (marked[static_cast<std::size_t>(j)] && !seen[static_cast<std::size_t>(j)]) {
          seen[static_cast<std::size_t>(j)] = 1;
          comp.push_back(j);
        }
      }
    }
    out.push_back(std::move(comp));
  }
  return out;
}

/// Largest 4-connected component of pixels deviating from their label mean
/// by more than theta, with means recomputed from scratch.
inline std::size_t largest_residual_component(const LabelMap& lm, const Raster& r, int theta) {
  std::map<SegmentId, std::pair<double, long>> acc;
  const auto s = r.samples();
  for (std::size_t i = 0; i < lm.labels.size(); ++i) {
    acc[lm.labels[i]].first += s[i];
    acc[lm.labels[i]].second += 1;
  }
  std::vector<bool> marked(lm.labels.size());
  for (std::size_t i = 0; i < lm.labels.size(); ++i) {
    const auto& [sum, n] = acc[lm.labels[i]];
    marked[i] = std::abs(s[i] - sum / static_cast<double>(n)) > theta;
  }
  std::size_t best = 0;
  for (const auto& c : components(lm.width, lm.height, marked)) best = std::max(best, c.size());
  return best;
}

/// Every injective leaf -> column map (each leaf may also stay unassigned),
/// scored without pruning. Ties keep the first map in enumeration order.
struct BruteAssignment {
  std::vector<int> seg;
  double score = -1.0;
};

inline BruteAssignment enumerate_assignments(
    const std::vector<std::vector<double>>& compat,
    const std::vector<std::tuple<std::size_t, int, std::size_t>>& reqs, std::size_t columns,
    const std::function<bool(int, int, int)>& holds) {
  const std::size_t n = compat.size();
  BruteAssignment best;
  std::vector<int> seg(n, -1);
  std::function<void(std::size_t)> go = [&](std::size_t leaf) {
    if (leaf == n) {
      double sum = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        if (seg[i] >= 0) sum += compat[i][static_cast<std::size_t>(seg[i])];
      double factor = 1.0;
      for (const auto& [a, p, b] : reqs)
        if (seg[a] < 0 || seg[b] < 0 || !holds(seg[a], p, seg[b])) factor *= 0.25;
      const double score = sum / static_cast<double>(n) * factor;
      if (score > best.score) best = {seg, score};
      return;
    }
    for (std::size_t c = 0; c <= columns; ++c) {
      const int col = c == columns ? -1 : static_cast<int>(c);
      bool taken = false;
      for (std::size_t i = 0; i < leaf; ++i) taken |= col >= 0 && seg[i] == col;
      if (taken) continue;
      seg[leaf] = col;
      go(leaf + 1);
      seg[leaf] = -1;
    }
  };
  go(0);
  return best;
}

}  // namespace scenedesc::oracle

#pragma once

// Top-down segmentation: an initial intensity clustering on the working
// (coarse) level, then level-by-level expansion with mean correction,
// boundary relaxation and seed discovery.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "scenedesc/labelmap.hpp"
#include "scenedesc/raster.hpp"

namespace scenedesc {

struct SegConfig {
  int theta = 16;              // seed deviation threshold, gray levels
  std::optional<int> a_min;    // minimum seed area; unset means scale-relative
  int max_sweeps = 5;
  int k_max = 8;

  void validate() const {
    if (theta < 1) throw Error("theta must be >= 1");
    if (a_min && *a_min < 1) throw Error("a_min must be >= 1");
    if (max_sweeps < 1) throw Error("max_sweeps must be >= 1");
    if (k_max < 1 || k_max > 16) throw Error("k_max must be in [1, 16]");
  }

  int effective_a_min(std::size_t level_pixels) const {
    if (a_min) return *a_min;
    return std::max(4, static_cast<int>(std::lround(0.0005 * static_cast<double>(level_pixels))));
  }
};

/// Segmentation of one pyramid level. Per-segment vectors are indexed by id
/// and sized `labelmap.next_id`; ids that no longer own pixels stay allocated.
struct LevelState {
  std::size_t level = 0;
  LabelMap labelmap;
  std::vector<double> means;
  std::vector<std::optional<SegmentId>> parents;
  std::vector<std::size_t> births;

  std::vector<std::size_t> areas() const {
    std::vector<std::size_t> a(static_cast<std::size_t>(labelmap.next_id), 0);
    for (auto l : labelmap.labels) ++a[static_cast<std::size_t>(l)];
    return a;
  }

  /// Ids owning at least one pixel, ascending.
  std::vector<SegmentId> present_ids() const {
    const auto a = areas();
    std::vector<SegmentId> ids;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i] > 0) ids.push_back(static_cast<SegmentId>(i));
    return ids;
  }
};

namespace detail {

// Means of ids that own no pixels are left as they were.
inline void recompute_means(const LabelMap& lm, const Raster& r, std::vector<double>& means) {
  const auto n_ids = static_cast<std::size_t>(lm.next_id);
  std::vector<std::int64_t> sums(n_ids, 0);
  std::vector<std::int64_t> counts(n_ids, 0);
  const auto s = r.samples();
  for (std::size_t i = 0; i < lm.labels.size(); ++i) {
    const auto l = static_cast<std::size_t>(lm.labels[i]);
    sums[l] += s[i];
    ++counts[l];
  }
  means.resize(n_ids, 0.0);
  for (std::size_t l = 0; l < n_ids; ++l)
    if (counts[l] > 0) means[l] = static_cast<double>(sums[l]) / static_cast<double>(counts[l]);
}

// Box filter of width 5, zero padded, on integer counts (scale grows by 5 per pass).
inline std::array<std::int64_t, 256> box_smooth(const std::array<std::int64_t, 256>& h) {
  std::array<std::int64_t, 256> out{};
  for (int i = 0; i < 256; ++i)
    for (int d = -2; d <= 2; ++d)
      if (i + d >= 0 && i + d < 256) out[i] += h[i + d];
  return out;
}

/// Intensities of smoothed-histogram peaks holding at least 1% of pixels,
/// ascending, at most `k_max` of them (the tallest win).
inline std::vector<int> histogram_peaks(const Raster& r, int k_max) {
  std::array<std::int64_t, 256> h{};
  for (auto v : r.samples()) ++h[v];
  for (int pass = 0; pass < 3; ++pass) h = box_smooth(h);
  const auto scaled_total = static_cast<std::int64_t>(r.pixel_count()) * 125;

  struct Peak {
    int at;
    std::int64_t height;
  };
  std::vector<Peak> peaks;
  int a = 0;
  while (a < 256) {
    int b = a;
    while (b + 1 < 256 && h[b + 1] == h[a]) ++b;
    const bool left_lower = a == 0 || h[a - 1] < h[a];
    const bool right_lower = b == 255 || h[b + 1] < h[a];
    if (left_lower && right_lower && h[a] > 0 && 100 * h[a] >= scaled_total)
      peaks.push_back({(a + b) / 2, h[a]});
    a = b + 1;
  }
  if (static_cast<int>(peaks.size()) > k_max) {
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const Peak& x, const Peak& y) { return x.height > y.height; });
    peaks.resize(static_cast<std::size_t>(k_max));
  }
  std::vector<int> at;
  for (const auto& p : peaks) at.push_back(p.at);
  std::sort(at.begin(), at.end());
  return at;
}

/// 1-D k-means over the intensity histogram. Returns the class of each
/// intensity value. Ties go to the lower class index.
inline std::array<int, 256> intensity_kmeans(const Raster& r, std::vector<double> centers) {
  std::array<std::int64_t, 256> h{};
  for (auto v : r.samples()) ++h[v];
  std::array<int, 256> assign{};
  std::array<int, 256> previous{};
  for (int iter = 0; iter < 20; ++iter) {
    for (int v = 0; v < 256; ++v) {
      int best = 0;
      for (std::size_t c = 1; c < centers.size(); ++c)
        if (std::abs(v - centers[c]) < std::abs(v - centers[static_cast<std::size_t>(best)]))
          best = static_cast<int>(c);
      assign[v] = best;
    }
    if (iter > 0 && assign == previous) break;
    previous = assign;
    std::vector<double> sum(centers.size(), 0.0);
    std::vector<std::int64_t> count(centers.size(), 0);
    for (int v = 0; v < 256; ++v) {
      sum[static_cast<std::size_t>(assign[v])] += static_cast<double>(v) * static_cast<double>(h[v]);
      count[static_cast<std::size_t>(assign[v])] += h[v];
    }
    for (std::size_t c = 0; c < centers.size(); ++c)
      if (count[c] > 0) centers[c] = sum[c] / static_cast<double>(count[c]);
  }
  return assign;
}

inline void relax_boundaries(LabelMap& lm, const Raster& r, std::vector<double>& means,
                             int max_sweeps) {
  const int w = lm.width;
  const int h = lm.height;
  const std::size_t n = lm.size();
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    std::size_t changed = 0;
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const SegmentId own = lm.at(x, y);
        std::array<SegmentId, 4> nb{};
        int n_nb = 0;
        if (x > 0) nb[n_nb++] = lm.at(x - 1, y);
        if (x + 1 < w) nb[n_nb++] = lm.at(x + 1, y);
        if (y > 0) nb[n_nb++] = lm.at(x, y - 1);
        if (y + 1 < h) nb[n_nb++] = lm.at(x, y + 1);
        bool boundary = false;
        for (int k = 0; k < n_nb; ++k) boundary |= nb[k] != own;
        if (!boundary) continue;

        const double v = r.at(x, y);
        SegmentId best = own;
        double best_d = std::abs(v - means[static_cast<std::size_t>(own)]);
        for (int k = 0; k < n_nb; ++k) {
          const double d = std::abs(v - means[static_cast<std::size_t>(nb[k])]);
          if (d < best_d || (d == best_d && nb[k] < best)) {
            best = nb[k];
            best_d = d;
          }
        }
        if (best != own) {
          lm.at(x, y) = best;
          ++changed;
        }
      }
    }
    recompute_means(lm, r, means);
    if (changed * 1000 < n) break;
  }
}

// Repeats until no marked component reaches a_min. Every qualifying component
// is carved into pieces of one parent label and one deviation sign, so each
// round strictly refines the partition and the loop terminates.
inline void discover_seeds(LevelState& s, const Raster& r, int theta, int a_min) {
  auto& lm = s.labelmap;
  const auto samples = r.samples();
  const std::size_t n = lm.size();
  for (;;) {
    std::vector<std::int8_t> sign(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const double dev = samples[i] - s.means[static_cast<std::size_t>(lm.labels[i])];
      if (dev > theta) sign[i] = 1;
      else if (dev < -theta) sign[i] = -1;
    }
    std::int32_t n_comp = 0;
    const auto comp = connected_components(
        lm.width, lm.height, [&](std::size_t i) { return sign[i] != 0; },
        [](std::size_t, std::size_t) { return true; }, &n_comp);
    std::vector<std::size_t> comp_area(static_cast<std::size_t>(n_comp), 0);
    for (auto c : comp)
      if (c >= 0) ++comp_area[static_cast<std::size_t>(c)];
    bool any = false;
    for (auto a : comp_area) any |= a >= static_cast<std::size_t>(a_min);
    if (!any) return;

    std::int32_t n_pieces = 0;
    const auto piece = connected_components(
        lm.width, lm.height,
        [&](std::size_t i) {
          return comp[i] >= 0 && comp_area[static_cast<std::size_t>(comp[i])] >= static_cast<std::size_t>(a_min);
        },
        [&](std::size_t i, std::size_t j) {
          return lm.labels[i] == lm.labels[j] && sign[i] == sign[j];
        },
        &n_pieces);

    const auto n_pieces_sz = static_cast<std::size_t>(n_pieces);
    std::vector<SegmentId> piece_parent(n_pieces_sz, -1);
    std::vector<std::size_t> piece_area(n_pieces_sz, 0);
    std::vector<std::size_t> label_area(static_cast<std::size_t>(lm.next_id), 0);
    std::vector<std::size_t> carved(static_cast<std::size_t>(lm.next_id), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++label_area[static_cast<std::size_t>(lm.labels[i])];
      if (piece[i] < 0) continue;
      const auto p = static_cast<std::size_t>(piece[i]);
      piece_parent[p] = lm.labels[i];
      ++piece_area[p];
      ++carved[static_cast<std::size_t>(lm.labels[i])];
    }

    // A label carved away completely keeps its id on its largest piece.
    std::vector<SegmentId> piece_id(n_pieces_sz, -1);
    std::vector<std::int32_t> keeper(static_cast<std::size_t>(lm.next_id), -1);
    for (std::size_t p = 0; p < n_pieces_sz; ++p) {
      const auto l = static_cast<std::size_t>(piece_parent[p]);
      if (carved[l] != label_area[l]) continue;
      if (keeper[l] < 0 || piece_area[p] > piece_area[static_cast<std::size_t>(keeper[l])])
        keeper[l] = static_cast<std::int32_t>(p);
    }
    for (std::size_t p = 0; p < n_pieces_sz; ++p) {
      const auto l = static_cast<std::size_t>(piece_parent[p]);
      if (keeper[l] == static_cast<std::int32_t>(p)) {
        piece_id[p] = piece_parent[p];
        continue;
      }
      piece_id[p] = lm.next_id++;
      s.parents.emplace_back(piece_parent[p]);
      s.births.push_back(s.level);
    }
    for (std::size_t i = 0; i < n; ++i)
      if (piece[i] >= 0) lm.labels[i] = piece_id[static_cast<std::size_t>(piece[i])];
    recompute_means(lm, r, s.means);
  }
}

}  // namespace detail

/// Initial segmentation of the working level: histogram-peak seeded intensity
/// k-means, then 4-connected components of each class.
inline LevelState segment_top(const Raster& r, const SegConfig& cfg, std::size_t level = 0) {
  cfg.validate();
  if (r.channels() != 1) throw Error("segment_top expects a luma raster");

  auto peaks = detail::histogram_peaks(r, cfg.k_max);
  std::vector<double> centers(peaks.begin(), peaks.end());
  if (centers.empty()) {
    double sum = 0.0;
    for (auto v : r.samples()) sum += v;
    centers.push_back(sum / static_cast<double>(r.pixel_count()));
  }
  const auto cls = detail::intensity_kmeans(r, std::move(centers));

  const auto samples = r.samples();
  std::int32_t count = 0;
  auto comp = connected_components(
      r.width(), r.height(), [](std::size_t) { return true; },
      [&](std::size_t i, std::size_t j) { return cls[samples[i]] == cls[samples[j]]; }, &count);

  LevelState s;
  s.level = level;
  s.labelmap.width = r.width();
  s.labelmap.height = r.height();
  s.labelmap.labels.assign(comp.begin(), comp.end());
  s.labelmap.next_id = count;
  s.parents.assign(static_cast<std::size_t>(count), std::nullopt);
  s.births.assign(static_cast<std::size_t>(count), level);
  detail::recompute_means(s.labelmap, r, s.means);
  return s;
}

/// Expand `prev` onto the next finer level `fine`.
inline LevelState refine_level(const LevelState& prev, const Raster& fine, const SegConfig& cfg) {
  cfg.validate();
  if (fine.channels() != 1) throw Error("refine_level expects a luma raster");
  if ((fine.width() + 1) / 2 != prev.labelmap.width || (fine.height() + 1) / 2 != prev.labelmap.height)
    throw DimensionMismatch("refine_level: finer raster " + std::to_string(fine.width()) + "x" +
                            std::to_string(fine.height()) + " does not halve to " +
                            std::to_string(prev.labelmap.width) + "x" +
                            std::to_string(prev.labelmap.height));
  if (prev.level == 0) throw DimensionMismatch("refine_level: previous state is already level 0");

  LevelState s;
  s.level = prev.level - 1;
  s.parents = prev.parents;
  s.births = prev.births;
  s.means = prev.means;

  auto& lm = s.labelmap;
  lm.width = fine.width();
  lm.height = fine.height();
  lm.next_id = prev.labelmap.next_id;
  lm.labels.resize(static_cast<std::size_t>(lm.width) * lm.height);
  for (int y = 0; y < lm.height; ++y)
    for (int x = 0; x < lm.width; ++x) lm.at(x, y) = prev.labelmap.at(x / 2, y / 2);

  detail::recompute_means(lm, fine, s.means);
  detail::relax_boundaries(lm, fine, s.means, cfg.max_sweeps);
  detail::discover_seeds(s, fine, cfg.theta, cfg.effective_a_min(fine.pixel_count()));
  return s;
}

/// States from the working level down to level 0, coarse to fine. The top
/// state also gets a seed pass, so every level ends with no residual
/// component of a_min pixels or more.
inline std::vector<LevelState> build_hierarchy(const Pyramid& p, std::size_t working,
                                               const SegConfig& cfg) {
  if (working >= p.depth()) throw Error("working level out of range");
  std::vector<LevelState> states;
  states.reserve(working + 1);
  const auto& top = p.level(working);
  states.push_back(segment_top(top, cfg, working));
  detail::discover_seeds(states.back(), top, cfg.theta, cfg.effective_a_min(top.pixel_count()));
  for (std::size_t k = working; k-- > 0;) states.push_back(refine_level(states.back(), p.level(k), cfg));
  return states;
}

}  // namespace scenedesc

#pragma once

// Specific information density (bits per pixel) across pyramid levels and
// selection of the working level at the knee of the curve.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "scenedesc/raster.hpp"

namespace scenedesc {

namespace detail {

inline double shannon_entropy(std::span<const std::size_t> histogram) {
  std::size_t total = 0;
  for (auto c : histogram) total += c;
  if (total == 0) return 0.0;
  double h = 0.0;
  const double n = static_cast<double>(total);
  for (auto c : histogram) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / n;
    h -= p * std::log2(p);
  }
  // A single occupied bin yields -0.0 otherwise.
  return h + 0.0;
}

}  // namespace detail

/// Mean of the intensity, horizontal-difference and vertical-difference
/// histogram entropies, in bits per pixel. Constant images give 0.
inline double spid(const Raster& r) {
  if (r.channels() != 1) throw Error("spid expects a luma raster");
  std::array<std::size_t, 256> intensity{};
  std::array<std::size_t, 511> dx{};
  std::array<std::size_t, 511> dy{};
  for (int y = 0; y < r.height(); ++y) {
    for (int x = 0; x < r.width(); ++x) {
      const int v = r.at(x, y);
      ++intensity[v];
      if (x > 0) ++dx[v - r.at(x - 1, y) + 255];
      if (y > 0) ++dy[v - r.at(x, y - 1) + 255];
    }
  }
  return (detail::shannon_entropy(intensity) + detail::shannon_entropy(dx) +
          detail::shannon_entropy(dy)) /
         3.0;
}

struct ScaleSample {
  std::size_t level = 0;
  int width = 0;
  int height = 0;
  std::size_t pixels = 0;
  double spid = 0.0;
};

inline std::vector<ScaleSample> scale_scan(const Pyramid& p) {
  std::vector<ScaleSample> out;
  out.reserve(p.depth());
  for (std::size_t k = 0; k < p.depth(); ++k) {
    const auto& r = p.level(k);
    out.push_back({k, r.width(), r.height(), r.pixel_count(), spid(r)});
  }
  return out;
}

/// Coarsest level whose SPID stays within `tau` (relative) of level 0.
/// With a zero baseline every level qualifies and the coarsest is returned.
inline std::size_t select_working_level(std::span<const ScaleSample> scan, double tau = 0.15) {
  if (scan.empty()) throw Error("select_working_level needs a non-empty scan");
  const double floor = (1.0 - tau) * scan.front().spid;
  std::size_t best = 0;
  for (std::size_t j = 0; j < scan.size(); ++j)
    if (scan[j].spid >= floor) best = j;
  return scan[best].level;
}

struct SpidReport {
  std::vector<ScaleSample> per_level;
  std::size_t working_level = 0;
  double tau = 0.15;
};

inline SpidReport analyze_scales(const Pyramid& p, double tau = 0.15) {
  SpidReport report{scale_scan(p), 0, tau};
  report.working_level = select_working_level(report.per_level, tau);
  return report;
}

}  // namespace scenedesc

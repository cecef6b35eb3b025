#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "scenedesc/error.hpp"

namespace scenedesc {

using SegmentId = std::int32_t;

/// Total partition of a width x height grid into segment ids.
struct LabelMap {
  int width = 0;
  int height = 0;
  std::vector<SegmentId> labels;
  SegmentId next_id = 0;

  LabelMap() = default;
  LabelMap(int w, int h, SegmentId fill = 0)
      : width(w), height(h), labels(static_cast<std::size_t>(w) * h, fill), next_id(fill + 1) {}

  std::size_t size() const noexcept { return labels.size(); }
  SegmentId at(int x, int y) const { return labels[index(x, y)]; }
  SegmentId& at(int x, int y) { return labels[index(x, y)]; }
  std::size_t index(int x, int y) const noexcept { return static_cast<std::size_t>(y) * width + x; }

  friend bool operator==(const LabelMap&, const LabelMap&) = default;
};

/// 4-connected components over cells where `same(a, b)` holds for neighbours.
/// Cells with `include(i) == false` get component -1. Component ids follow
/// row-major first encounter.
template <class Include, class Same>
std::vector<std::int32_t> connected_components(int width, int height, Include include, Same same,
                                               std::int32_t* count = nullptr) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::vector<std::int32_t> comp(n, -1);
  std::vector<std::size_t> stack;
  std::int32_t next = 0;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] != -1 || !include(start)) continue;
    comp[start] = next;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t i = stack.back();
      stack.pop_back();
      const int x = static_cast<int>(i % width);
      const int y = static_cast<int>(i / width);
      auto visit = [&](std::size_t j) {
        if (comp[j] == -1 && include(j) && same(i, j)) {
          comp[j] = next;
          stack.push_back(j);
        }
      };
      if (x > 0) visit(i - 1);
      if (x + 1 < width) visit(i + 1);
      if (y > 0) visit(i - width);
      if (y + 1 < height) visit(i + width);
    }
    ++next;
  }
  if (count) *count = next;
  return comp;
}

}  // namespace scenedesc

// Builds a small synthetic scene and prints its description and fixations.

#include <iostream>

#include "scenedesc/scenedesc.hpp"

int main() {
  using namespace scenedesc;
  std::vector<std::uint8_t> px(64 * 64, 20);
  for (int y = 20; y < 36; ++y)
    for (int x = 30; x < 46; ++x) px[static_cast<std::size_t>(y) * 64 + x] = 230;
  const Raster image(64, 64, 1, std::move(px));

  const auto result = run_pipeline(image);
  std::cout << serialize(result.description);

  const auto& top = result.working_description();
  for (const auto& f : propose_fixations(top.segments, top.relations, result.working_state(), 3))
    std::cout << "fixation " << f.id << " at (" << f.nx << ", " << f.ny << ")\n";
}

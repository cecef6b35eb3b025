#pragma once

// End-to-end extraction: pyramid, scale scan, working level, hierarchy,
// description.

#include <vector>

#include "scenedesc/descriptor.hpp"
#include "scenedesc/infodensity.hpp"
#include "scenedesc/raster.hpp"
#include "scenedesc/segmenter.hpp"

namespace scenedesc {

struct PipelineConfig {
  SegConfig seg;
  StopRule stop;
  double tau = 0.15;
  double epsilon = 0.05;
};

struct PipelineResult {
  Pyramid pyramid;
  SpidReport scales;
  std::vector<LevelState> states;  // working level first, level 0 last
  SceneDescription description;

  const LevelState& working_state() const { return states.front(); }
  const LevelDescription& working_description() const { return description.levels.front(); }
};

inline PipelineResult run_pipeline(const Raster& image, const PipelineConfig& cfg = {}) {
  if (cfg.tau < 0.0 || cfg.tau > 1.0) throw Error("tau must be in [0,1]");
  cfg.seg.validate();
  PipelineResult out;
  out.pyramid = build_pyramid(image, cfg.stop);
  out.scales = analyze_scales(out.pyramid, cfg.tau);
  out.states = build_hierarchy(out.pyramid, out.scales.working_level, cfg.seg);
  out.description = describe_hierarchy(out.pyramid, out.states, cfg.seg, cfg.epsilon);
  return out;
}

}  // namespace scenedesc

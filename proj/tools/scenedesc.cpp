// scenedesc: command-line front end for the scene description pipeline.
//
//   scenedesc describe   IMAGE [seg flags] [--tau T] [--out FILE]
//   scenedesc scale-scan IMAGE [--tau T] [--out FILE]
//   scenedesc segment    IMAGE --out DIR [seg flags] [--tau T]
//   scenedesc fixate     IMAGE [--n N] [seg flags] [--tau T] [--out FILE]
//   scenedesc match      DESCRIPTION LIBDIR [--sigma S] [--out FILE]
//
// Exit status: 0 on success (a BLIND match included), 2 on bad input.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>
#include <variant>

#include "CLI11.hpp"
#include "scenedesc/scenedesc.hpp"

namespace fs = std::filesystem;
using namespace scenedesc;

namespace {

constexpr int kInputError = 2;

struct Options {
  std::string image;
  std::string description;
  std::string library;
  std::string out;
  int theta = 16;
  std::optional<int> amin;
  int sweeps = 5;
  int kmax = 8;
  double tau = 0.15;
  double sigma = 0.6;
  std::size_t n = 1;
};

void add_seg_flags(CLI::App* cmd, Options& o) {
  cmd->add_option("--theta", o.theta, "seed deviation threshold (gray levels)")->check(CLI::Range(1, 255));
  cmd->add_option("--amin", o.amin, "minimum seed area in pixels (default: scale-relative)")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--sweeps", o.sweeps, "boundary relaxation sweeps")->check(CLI::Range(1, 1000));
  cmd->add_option("--kmax", o.kmax, "top-level cluster cap")->check(CLI::Range(1, 16));
  cmd->add_option("--tau", o.tau, "relative SPID drop tolerance")->check(CLI::Range(0.0, 1.0));
}

PipelineConfig pipeline_config(const Options& o) {
  PipelineConfig cfg;
  cfg.seg.theta = o.theta;
  cfg.seg.a_min = o.amin;
  cfg.seg.max_sweeps = o.sweeps;
  cfg.seg.k_max = o.kmax;
  cfg.tau = o.tau;
  return cfg;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("cannot open " + p.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void emit(const Options& o, const std::string& text) {
  if (o.out.empty()) {
    std::cout << text << std::flush;
    return;
  }
  std::ofstream out(o.out, std::ios::binary);
  if (!out) throw Error("cannot write " + o.out);
  out << text;
  if (!out) throw Error("write failed: " + o.out);
}

std::string fixed(double v, int digits) {
  if (v == 0.0) v = 0.0;
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed, digits);
  return std::string(buf, end);
}

int cmd_describe(const Options& o) {
  const auto result = run_pipeline(load_image_file(o.image), pipeline_config(o));
  emit(o, serialize(result.description));
  return 0;
}

int cmd_scale_scan(const Options& o) {
  const auto pyramid = build_pyramid(load_image_file(o.image));
  const auto report = analyze_scales(pyramid, o.tau);
  std::string csv = "level,width,height,pixels,spid\n";
  for (const auto& s : report.per_level)
    csv += std::to_string(s.level) + "," + std::to_string(s.width) + "," + std::to_string(s.height) + "," +
           std::to_string(s.pixels) + "," + fixed(s.spid, 6) + "\n";
  csv += "working_level=" + std::to_string(report.working_level) + "\n";
  emit(o, csv);
  return 0;
}

int cmd_segment(const Options& o) {
  const auto result = run_pipeline(load_image_file(o.image), pipeline_config(o));
  const fs::path dir(o.out);
  fs::create_directories(dir);
  for (const auto& s : result.states) {
    const auto& lm = s.labelmap;
    std::vector<std::uint8_t> gray(lm.size());
    for (std::size_t i = 0; i < gray.size(); ++i)
      gray[i] = static_cast<std::uint8_t>((static_cast<long>(lm.labels[i]) * 37) % 255);
    write_image_file(dir / ("level_" + std::to_string(s.level) + ".pgm"), Raster(lm.width, lm.height, 1, std::move(gray)));
  }
  std::ofstream desc(dir / "description.txt", std::ios::binary);
  desc << serialize(result.description);
  if (!desc) throw Error("cannot write description.txt");
  return 0;
}

int cmd_fixate(const Options& o) {
  const auto result = run_pipeline(load_image_file(o.image), pipeline_config(o));
  const auto& level = result.working_description();
  const auto fixations = propose_fixations(level.segments, level.relations, result.working_state(), o.n);
  std::string text;
  for (std::size_t rank = 0; rank < fixations.size(); ++rank) {
    const auto& f = fixations[rank];
    text += "FIXATION " + std::to_string(rank + 1) + " " + std::to_string(f.id) + " " + format_fixed4(f.nx) + " " +
            format_fixed4(f.ny) + " " + format_fixed4(f.saliency) + "\n";
  }
  emit(o, text);
  return 0;
}

int cmd_match(const Options& o) {
  const auto description = parse(read_file(o.description));
  const auto stores = load_library(story_files(o.library));
  const auto result = match_scene(description, stores, o.sigma);
  std::string text;
  if (const auto* m = std::get_if<StoryMatch>(&result)) {
    text = "MATCH " + m->story_id + " " + format_fixed4(m->score) + "\n";
    for (const auto& [leaf, seg] : m->assignment) text += "ASSIGN " + leaf + " " + std::to_string(seg) + "\n";
  } else {
    text = "BLIND\n";
  }
  emit(o, text);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hierarchical scene description from raster images"};
  app.require_subcommand(1);
  Options o;

  auto* describe = app.add_subcommand("describe", "write the canonical multi-level description");
  describe->add_option("image", o.image, "PGM/PPM input")->required();
  describe->add_option("--out", o.out, "output file (default: stdout)");
  add_seg_flags(describe, o);

  auto* scan = app.add_subcommand("scale-scan", "SPID per pyramid level as CSV");
  scan->add_option("image", o.image, "PGM/PPM input")->required();
  scan->add_option("--tau", o.tau, "relative SPID drop tolerance")->check(CLI::Range(0.0, 1.0));
  scan->add_option("--out", o.out, "output file (default: stdout)");

  auto* segment = app.add_subcommand("segment", "write one label PGM per level plus the description");
  segment->add_option("image", o.image, "PGM/PPM input")->required();
  segment->add_option("--out", o.out, "output directory")->required();
  add_seg_flags(segment, o);

  auto* fixate = app.add_subcommand("fixate", "rank fixation targets on the working level");
  fixate->add_option("image", o.image, "PGM/PPM input")->required();
  fixate->add_option("--n", o.n, "number of fixations")->check(CLI::NonNegativeNumber);
  fixate->add_option("--out", o.out, "output file (default: stdout)");
  add_seg_flags(fixate, o);

  auto* match = app.add_subcommand("match", "interpret a description against a story library");
  match->add_option("description", o.description, "canonical description file")->required();
  match->add_option("library", o.library, "directory of *.story files")->required();
  match->add_option("--sigma", o.sigma, "acceptance threshold")->check(CLI::Range(0.0, 1.0));
  match->add_option("--out", o.out, "output file (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kInputError;
  }

  try {
    if (describe->parsed()) return cmd_describe(o);
    if (scan->parsed()) return cmd_scale_scan(o);
    if (segment->parsed()) return cmd_segment(o);
    if (fixate->parsed()) return cmd_fixate(o);
    if (match->parsed()) return cmd_match(o);
  } catch (const std::exception& e) {
    std::cerr << "scenedesc: " << e.what() << "\n";
    return kInputError;
  }
  return kInputError;
}

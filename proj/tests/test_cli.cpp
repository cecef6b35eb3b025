#include <gtest/gtest.h>
#include <unistd.h>

#include <fstream>
#include <sstream>

#include "process.hpp"
#include "scenedesc/scenedesc.hpp"
#include "synthetic.hpp"

using namespace scenedesc;
namespace fs = std::filesystem;
namespace t = scenedesc::testing;

namespace {

class Cli : public ::testing::Test {
protected:
  void SetUp() override { dir_ = t::fresh_dir("cli"); }
  void TearDown() override { fs::remove_all(dir_); }

  std::string image(const std::string& name, const Raster& r) {
    const auto p = dir_ / name;
    write_image_file(p, r);
    return p.string();
  }
  std::string text(const std::string& name, const std::string& content) {
    const auto p = dir_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p.string();
  }
  static std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, DescribeConstantImage) {
  const auto r = t::run_cli({"describe", image("c.pgm", Raster::filled(16, 16, 90))});
  ASSERT_EQ(r.status, 0);
  const auto d = parse(r.out);
  EXPECT_EQ(d.width, 16);
  for (const auto& level : d.levels) {
    ASSERT_EQ(level.segments.size(), 1u);
    EXPECT_TRUE(level.relations.empty());
    EXPECT_DOUBLE_EQ(level.segments[0].mean, 90.0);
  }
}

TEST_F(Cli, DescribeHalvesHasLeftOf) {
  const auto r = t::run_cli({"describe", image("h.pgm", t::half_half(64, 64, 32))});
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find(" LEFT-OF "), std::string::npos);
  EXPECT_NE(r.out.find(" RIGHT-OF "), std::string::npos);
  EXPECT_EQ(r.out.find(" ABOVE "), std::string::npos);
}

TEST_F(Cli, DescribeHonoursFlagsAndOutFile) {
  const auto out = (dir_ / "d.txt").string();
  const auto r = t::run_cli({"describe", image("h.pgm", t::half_half(32, 32, 16)), "--theta", "40", "--amin", "7",
                             "--out", out});
  ASSERT_EQ(r.status, 0);
  EXPECT_TRUE(r.out.empty());
  EXPECT_EQ(slurp(out).rfind("SCENE 32 32 LEVELS ", 0), 0u);
  EXPECT_NE(slurp(out).find("THETA 40 AMIN 7\n"), std::string::npos);
}

TEST_F(Cli, ColourInputIsAccepted) {
  std::vector<std::uint8_t> rgb(8 * 8 * 3);
  for (std::size_t i = 0; i < rgb.size(); ++i) rgb[i] = (i % 3 == 0) ? 255 : 0;
  const auto r = t::run_cli({"describe", image("rgb.ppm", Raster(8, 8, 3, rgb))});
  ASSERT_EQ(r.status, 0);
  EXPECT_NE(r.out.find("MEAN 76.0000"), std::string::npos);
}

TEST_F(Cli, InputErrorsExitTwo) {
  EXPECT_EQ(t::run_cli({"describe", (dir_ / "missing.pgm").string()}).status, 2);
  EXPECT_EQ(t::run_cli({"describe", text("bad.pgm", "P2\n2 2\n255\n0 0 0 0\n")}).status, 2);
  EXPECT_EQ(t::run_cli({"describe", text("short.pgm", std::string("P5\n4 4\n255\n") + "abc")}).status, 2);
  EXPECT_EQ(t::run_cli({"describe", image("c.pgm", Raster::filled(8, 8, 1)), "--theta", "0"}).status, 2);
  EXPECT_EQ(t::run_cli({"frobnicate"}).status, 2);
  EXPECT_EQ(t::run_cli({}).status, 2);
  EXPECT_EQ(t::run_cli({"--help"}).status, 0);
}

TEST_F(Cli, ScaleScanCheckerboard) {
  const auto r = t::run_cli({"scale-scan", image("cb.pgm", t::checkerboard(512, 8))});
  ASSERT_EQ(r.status, 0);
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "level,width,height,pixels,spid");
  std::getline(in, line);
  EXPECT_EQ(line, "0,512,512,262144,0.774684");
  std::getline(in, line);
  EXPECT_EQ(line, "1,256,256,65536,1.035761");
  EXPECT_NE(r.out.find("\n4,32,32,1024,0.000000\n"), std::string::npos);
  EXPECT_TRUE(r.out.ends_with("working_level=3\n"));
}

TEST_F(Cli, ScaleScanConstantImage) {
  const auto r = t::run_cli({"scale-scan", image("c.pgm", Raster::filled(20, 10, 3))});
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(r.out,
            "level,width,height,pixels,spid\n"
            "0,20,10,200,0.000000\n"
            "1,10,5,50,0.000000\n"
            "working_level=1\n");
}

TEST_F(Cli, SegmentWritesOneLabelImagePerLevel) {
  const auto out = dir_ / "seg";
  const auto src = image("sq.pgm", t::square_on(64, 20, 20, 16, 10, 240));
  const auto r = t::run_cli({"segment", src, "--out", out.string()});
  ASSERT_EQ(r.status, 0);
  const auto d = parse(slurp(out / "description.txt"));
  const auto working = d.levels.front().index;
  std::size_t pgms = 0;
  for (const auto& e : fs::directory_iterator(out)) pgms += e.path().extension() == ".pgm";
  EXPECT_EQ(pgms, working + 1);
  for (std::size_t k = 0; k <= working; ++k) {
    const auto lab = load_image_file(out / ("level_" + std::to_string(k) + ".pgm"));
    EXPECT_EQ(lab.width(), d.levels[d.levels.size() - 1 - k].width);
  }
  const auto fin = load_image_file(out / "level_0.pgm");
  EXPECT_NE(fin.at(0, 0), fin.at(27, 27));
}

TEST_F(Cli, FixateBrightSquare) {
  const auto r = t::run_cli({"fixate", image("sq.pgm", t::square_on(64, 32, 8, 16, 0, 250)), "--n", "2"});
  ASSERT_EQ(r.status, 0);
  std::istringstream in(r.out);
  std::string kw;
  int rank = 0, id = 0;
  double nx = 0, ny = 0, sal = 0;
  in >> kw >> rank >> id >> nx >> ny >> sal;
  EXPECT_EQ(kw, "FIXATION");
  EXPECT_EQ(rank, 1);
  // Working level is 8x8; the square covers cells 4..5 x 1..2 there.
  EXPECT_EQ(id, 1);
  EXPECT_NEAR(nx, 4.5 / 7.0, 1e-4);
  EXPECT_NEAR(ny, 1.5 / 7.0, 1e-4);
  EXPECT_NEAR(sal, 250.0 / 255.0, 1e-4);
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 2);
}

TEST_F(Cli, FixateConstantImageIsEmpty) {
  const auto r = t::run_cli({"fixate", image("c.pgm", Raster::filled(32, 32, 128)), "--n", "5"});
  EXPECT_EQ(r.status, 0);
  EXPECT_TRUE(r.out.empty());
}

TEST_F(Cli, MatchThreeBands) {
  const auto desc = t::run_cli({"describe", image("tl.pgm", t::bands(60, 90, {255, 128, 0}))});
  ASSERT_EQ(desc.status, 0);
  const auto desc_file = text("tl.txt", desc.out);

  const auto r = t::run_cli({"match", desc_file, SCENEDESC_SAMPLES});
  ASSERT_EQ(r.status, 0);
  EXPECT_EQ(r.out.rfind("MATCH traffic-light 1.0000\n", 0), 0u);
  EXPECT_NE(r.out.find("ASSIGN red "), std::string::npos);
  EXPECT_NE(r.out.find("ASSIGN amber "), std::string::npos);
  EXPECT_NE(r.out.find("ASSIGN green "), std::string::npos);

  const auto empty_lib = dir_ / "empty";
  fs::create_directories(empty_lib);
  const auto blind = t::run_cli({"match", desc_file, empty_lib.string()});
  EXPECT_EQ(blind.status, 0);
  EXPECT_EQ(blind.out, "BLIND\n");

  const auto bad_lib = dir_ / "bad";
  fs::create_directories(bad_lib);
  std::ofstream(bad_lib / "x.story") << "STORY x\nNODE 0 root\nEND\n";
  EXPECT_EQ(t::run_cli({"match", desc_file, bad_lib.string()}).status, 2);

  EXPECT_EQ(t::run_cli({"match", text("junk.txt", "SCENE\n"), SCENEDESC_SAMPLES}).status, 2);
}

TEST_F(Cli, RepeatedRunsAreByteIdentical) {
  const auto src = image("n.pgm", t::perturb(t::bands(96, 64, {30, 200, 90}), 7, 12));
  const auto a = t::run_cli({"describe", src});
  const auto b = t::run_cli({"describe", src});
  ASSERT_EQ(a.status, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(t::run_cli({"fixate", src, "--n", "3"}).out, t::run_cli({"fixate", src, "--n", "3"}).out);
}

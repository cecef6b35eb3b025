#include <gtest/gtest.h>

#include <random>
#include <string>

#include "scenedesc/raster.hpp"
#include "synthetic.hpp"

using namespace scenedesc;
namespace t = scenedesc::testing;

namespace {

std::string pnm(const std::string& header, std::initializer_list<int> payload) {
  std::string s = header;
  for (int v : payload) s.push_back(static_cast<char>(v));
  return s;
}

std::string field_of(const std::string& bytes) {
  try {
    load_image(bytes);
  } catch (const ParseError& e) {
    return e.field();
  }
  return "<no error>";
}

}  // namespace

TEST(LoadImage, MinimalGray) {
  const auto r = load_image(pnm("P5 2 2 255\n", {0, 255, 128, 64}));
  EXPECT_EQ(r.width(), 2);
  EXPECT_EQ(r.height(), 2);
  EXPECT_EQ(r.channels(), 1);
  EXPECT_EQ(std::vector<std::uint8_t>(r.samples().begin(), r.samples().end()),
            (std::vector<std::uint8_t>{0, 255, 128, 64}));
}

TEST(LoadImage, MinimalColor) {
  const auto r = load_image(pnm("P6 1 1 255\n", {255, 0, 0}));
  EXPECT_EQ(r.channels(), 3);
  EXPECT_EQ(r.samples()[0], 255);
  EXPECT_EQ(r.samples()[1], 0);
  EXPECT_EQ(r.samples()[2], 0);
}

TEST(LoadImage, CommentsInHeader) {
  const auto r = load_image(pnm("P5\n# made by hand\n2 # width\n1\n255\n", {7, 9}));
  EXPECT_EQ(r.width(), 2);
  EXPECT_EQ(r.at(1, 0), 9);
}

TEST(LoadImage, ErrorsNameTheField) {
  EXPECT_EQ(field_of("P7 1 1 255\n"), "magic");
  EXPECT_EQ(field_of("P2 1 1 255\n0"), "magic");
  EXPECT_EQ(field_of(pnm("P5 1 1 65535\n", {0, 0})), "maxval");
  EXPECT_EQ(field_of(pnm("P5 2 2 255\n", {1, 2, 3})), "payload");
  EXPECT_EQ(field_of("P5 0 2 255\n"), "width");
  EXPECT_EQ(field_of("P5 2 0 255\n"), "height");
  EXPECT_EQ(field_of("P5 2"), "height");
  EXPECT_EQ(field_of("P5 x 2 255\n"), "width");
}

TEST(LoadImage, WriteThenLoadIsIdentity) {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 17), h = 1 + static_cast<int>(rng() % 13);
    const int ch = rng() % 2 ? 3 : 1;
    std::vector<std::uint8_t> s(static_cast<std::size_t>(w * h * ch));
    for (auto& v : s) v = static_cast<std::uint8_t>(rng());
    const Raster r(w, h, ch, s);
    EXPECT_EQ(load_image(encode_pnm(r)), r);
  }
}

TEST(ToLuma, Rec601) {
  EXPECT_EQ(to_luma(Raster(1, 1, 3, {255, 255, 255})).samples()[0], 255);
  EXPECT_EQ(to_luma(Raster(1, 1, 3, {255, 0, 0})).samples()[0], 76);
  EXPECT_EQ(to_luma(Raster(1, 1, 3, {0, 255, 0})).samples()[0], 150);  // 149.685
  EXPECT_EQ(to_luma(Raster(1, 1, 3, {0, 0, 255})).samples()[0], 29);   // 29.07
}

TEST(ToLuma, IdentityOnLumaAndIdempotent) {
  const auto g = t::random_raster(9, 7, 5);
  EXPECT_EQ(to_luma(g), g);
  std::mt19937 rng(8);
  std::vector<std::uint8_t> s(5 * 4 * 3);
  for (auto& v : s) v = static_cast<std::uint8_t>(rng());
  const auto once = to_luma(Raster(5, 4, 3, s));
  EXPECT_EQ(to_luma(once), once);
}

TEST(DownscaleHalf, BlockMeans) {
  const auto r = t::make(4, 4, [](int x, int y) {
    const int q[2][2] = {{0, 255}, {64, 128}};
    return q[y / 2][x / 2];
  });
  const auto d = downscale_half(r);
  ASSERT_EQ(d.width(), 2);
  ASSERT_EQ(d.height(), 2);
  EXPECT_EQ(std::vector<std::uint8_t>(d.samples().begin(), d.samples().end()),
            (std::vector<std::uint8_t>{0, 255, 64, 128}));
}

TEST(DownscaleHalf, DegenerateAndConstant) {
  EXPECT_EQ(downscale_half(Raster::filled(1, 1, 42)), Raster::filled(1, 1, 42));
  EXPECT_EQ(downscale_half(Raster::filled(2, 2, 100)), Raster::filled(1, 1, 100));
  EXPECT_EQ(downscale_half(Raster::filled(7, 3, 9)), Raster::filled(4, 2, 9));
}

TEST(DownscaleHalf, ClippedEdgeBlocks) {
  // 3x1: blocks {10,21} and {30}
  const auto d = downscale_half(Raster(3, 1, 1, {10, 21, 30}));
  EXPECT_EQ(d.width(), 2);
  EXPECT_EQ(d.samples()[0], 16);  // 15.5 rounds up
  EXPECT_EQ(d.samples()[1], 30);
}

TEST(DownscaleHalf, MeanDriftBounded) {
  for (std::uint32_t seed = 0; seed < 50; ++seed) {
    std::mt19937 rng(seed);
    const int w = 2 * (1 + static_cast<int>(rng() % 20)), h = 2 * (1 + static_cast<int>(rng() % 20));
    const auto r = t::random_raster(w, h, seed);
    const auto d = downscale_half(r);
    auto mean = [](const Raster& x) {
      double s = 0;
      for (auto v : x.samples()) s += v;
      return s / static_cast<double>(x.pixel_count());
    };
    EXPECT_LE(std::abs(mean(r) - mean(d)), 1.0);
  }
}

TEST(BuildPyramid, HalvingArithmetic) {
  // Desk oracle: tests/oracles/spid_curve.py
  const auto hd = build_pyramid(Raster::filled(1920, 1080, 0));
  ASSERT_EQ(hd.depth(), 9u);
  EXPECT_EQ(hd.level(7).width(), 15);
  EXPECT_EQ(hd.level(7).height(), 9);
  EXPECT_EQ(hd.coarsest().width(), 8);
  EXPECT_EQ(hd.coarsest().height(), 5);

  EXPECT_EQ(build_pyramid(Raster::filled(10, 10, 0)).depth(), 1u);

  const auto p = build_pyramid(Raster::filled(512, 512, 3));
  ASSERT_EQ(p.depth(), 7u);
  const int sides[] = {512, 256, 128, 64, 32, 16, 8};
  for (std::size_t k = 0; k < p.depth(); ++k) EXPECT_EQ(p.level(k).width(), sides[k]);
}

TEST(BuildPyramid, StopRuleHoldsOnlyAtTheEnd) {
  std::mt19937 rng(21);
  for (int trial = 0; trial < 40; ++trial) {
    const int w = 1 + static_cast<int>(rng() % 700), h = 1 + static_cast<int>(rng() % 700);
    const auto p = build_pyramid(Raster::filled(w, h, 1));
    ASSERT_GE(p.depth(), 1u);
    EXPECT_TRUE(p.halt_rule.satisfied_by(p.coarsest()));
    for (std::size_t k = 0; k + 1 < p.depth(); ++k) {
      EXPECT_FALSE(p.halt_rule.satisfied_by(p.level(k)));
      EXPECT_EQ(p.level(k + 1).width(), (p.level(k).width() + 1) / 2);
      EXPECT_EQ(p.level(k + 1).height(), (p.level(k).height() + 1) / 2);
      EXPECT_LT(p.level(k + 1).pixel_count(), p.level(k).pixel_count());
    }
  }
}

TEST(BuildPyramid, ColorInputIsConvertedToLuma) {
  const auto p = build_pyramid(Raster(1, 1, 3, {255, 0, 0}));
  EXPECT_EQ(p.level(0).channels(), 1);
  EXPECT_EQ(p.level(0).samples()[0], 76);
}

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <sstream>

#include "mldetect/error.hpp"
#include "mldetect/featgrid.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace mldetect;

namespace {

using testing_support::oracle_grid;

void expect_grids_near(const FeatureGrid& a, const FeatureGrid& b, double tol) {
  ASSERT_EQ(a.rows, b.rows);
  ASSERT_EQ(a.cols, b.cols);
  for (std::size_t i = 0; i < a.values.size(); ++i)
    ASSERT_NEAR(a.values[i], b.values[i], tol) << "flat index " << i << " channel " << i % kChannels;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::Io;
}

}  // namespace

TEST(FeatureGrid, SixtyFourSquareGivesSixBySix) {
  const FeatureGrid g = compute_feature_grid(RasterImage(64, 64, 0.3f));
  EXPECT_EQ(g.rows, 6);
  EXPECT_EQ(g.cols, 6);
  EXPECT_EQ(g.values.size(), 6u * 6u * 33u);
}

TEST(FeatureGrid, PartialCellsAreDropped) {
  const FeatureGrid g = compute_feature_grid(RasterImage(71, 45, 0.3f));
  EXPECT_EQ(g.cols, 8 - 2);
  EXPECT_EQ(g.rows, 5 - 2);
}

TEST(FeatureGrid, TinyImagesThrow) {
  EXPECT_EQ(code_of([] { compute_feature_grid(RasterImage(15, 64)); }), ErrorCode::ImageTooSmall);
  EXPECT_EQ(code_of([] { compute_feature_grid(RasterImage(64, 23)); }), ErrorCode::ImageTooSmall);
}

TEST(FeatureGrid, ConstantImageHasNoGradientEnergy) {
  RasterImage img(48, 40);
  for (int y = 0; y < 40; ++y)
    for (int x = 0; x < 48; ++x) {
      img.at(x, y, 0) = 0.8f;
      img.at(x, y, 1) = 0.2f;
      img.at(x, y, 2) = 0.4f;
    }
  const FeatureGrid g = compute_feature_grid(img);
  const LabColor lab = rgb_to_lab(0.8f, 0.2f, 0.4f);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      for (int ch = 0; ch < kGradientChannels; ++ch) EXPECT_EQ(g.at(r, c, ch), 0.0f);
      EXPECT_NEAR(g.at(r, c, kColorA), rescale_ab(lab.a), 1e-5);
      EXPECT_NEAR(g.at(r, c, kColorB), rescale_ab(lab.b), 1e-5);
    }
}

TEST(FeatureGrid, HorizontalRampFillsOnlyTheZeroDegreeBin) {
  RasterImage img(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(x) / 64.0f;
  const FeatureGrid g = compute_feature_grid(img);
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      EXPECT_GT(g.at(r, c, 0), 0.0f);
      for (int o = 1; o < kOrientations; ++o) EXPECT_EQ(g.at(r, c, o), 0.0f);
      EXPECT_FLOAT_EQ(g.at(r, c, kInsensitiveBegin), g.at(r, c, 0));
    }
}

TEST(FeatureGrid, DownwardRampUsesTheNinetyDegreeBin) {
  RasterImage img(64, 64);
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x)
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = static_cast<float>(y) / 64.0f;
  const FeatureGrid g = compute_feature_grid(img);
  for (int o = 0; o < kOrientations; ++o) {
    if (o == 4 || o == 5) continue;
    EXPECT_EQ(g.at(2, 2, o), 0.0f) << o;
  }
  // 90 degrees sits exactly between the 80 and 100 degree bins.
  EXPECT_GT(g.at(2, 2, 4), 0.0f);
  EXPECT_FLOAT_EQ(g.at(2, 2, 4), g.at(2, 2, 5));
}

TEST(FeatureGrid, MatchesAtan2Oracle) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 4; ++trial) {
    const RasterImage img = trial % 2 ? testing_support::random_image(72, 56, rng)
                                      : testing_support::blob_image(80, 64, rng);
    expect_grids_near(compute_feature_grid(img), oracle_grid(img), 1e-5);
  }
}

TEST(FeatureGrid, GradientChannelsAreBounded) {
  std::mt19937_64 rng(5);
  const FeatureGrid g = compute_feature_grid(testing_support::random_image(96, 80, rng));
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c)
      for (int ch = 0; ch < kGradientChannels; ++ch) {
        EXPECT_GE(g.at(r, c, ch), 0.0f);
        EXPECT_LE(g.at(r, c, ch), kTruncation + 1e-6);
      }
}

TEST(FeatureGrid, FlipPermutationIsAnInvolution) {
  const auto& p = flip_channel_permutation();
  for (int ch = 0; ch < kChannels; ++ch) EXPECT_EQ(p[p[ch]], ch);
  EXPECT_EQ(p[0], 9);
  EXPECT_EQ(p[kInsensitiveBegin], kInsensitiveBegin);
  EXPECT_EQ(p[kEnergyBegin], kEnergyBegin + 1);
  EXPECT_EQ(p[kColorA], kColorA);
}

TEST(FeatureGrid, CovariantUnderHorizontalFlip) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 3; ++trial) {
    const RasterImage img = testing_support::blob_image(88, 72, rng);
    expect_grids_near(compute_feature_grid(flip_horizontal(img)), flip_grid(compute_feature_grid(img)), 1e-5);
  }
}

TEST(GridDump, RoundTripsBitExactly) {
  std::mt19937_64 rng(1);
  const FeatureGrid g = compute_feature_grid(testing_support::random_image(64, 80, rng));
  std::stringstream ss;
  write_grid_dump(ss, g);
  const FeatureGrid back = read_grid_dump(ss);
  EXPECT_EQ(back.rows, g.rows);
  EXPECT_EQ(back.cols, g.cols);
  EXPECT_EQ(back.values, g.values);
}

TEST(GridDump, TruncatedInputThrows) {
  std::stringstream ss;
  write_grid_dump(ss, FeatureGrid(6, 6));
  std::string s = ss.str();
  s.resize(s.size() - 3);
  std::istringstream in(s);
  EXPECT_EQ(code_of([&] { read_grid_dump(in); }), ErrorCode::MalformedInput);
}

TEST(Pyramid, LevelCountFollowsMinDim) {
  const FeaturePyramid p = build_pyramid(RasterImage(256, 256, 0.5f), {4, 64, true});
  ASSERT_EQ(p.levels.size(), 9u);
  EXPECT_FALSE(p.upsampled);
  EXPECT_EQ(p.levels.front().image_width, 256);
  EXPECT_EQ(p.levels.back().image_width, 64);
  for (const auto& l : p.levels) {
    EXPECT_EQ(l.image_width % 8, 0);
    EXPECT_EQ(l.grid.cols, l.image_width / 8 - 2);
  }
}

TEST(Pyramid, OneScalePerOctaveHalvesEachLevel) {
  const FeaturePyramid p = build_pyramid(RasterImage(256, 192, 0.5f), {1, 64, true});
  ASSERT_GE(p.levels.size(), 2u);
  for (std::size_t i = 1; i < p.levels.size(); ++i)
    EXPECT_DOUBLE_EQ(p.levels[i].scale / p.levels[i - 1].scale, 0.5);
}

TEST(Pyramid, SmallImagesAreUpsampled) {
  const FeaturePyramid p = build_pyramid(RasterImage(60, 60, 0.5f), {4, 64, true});
  EXPECT_TRUE(p.upsampled);
  EXPECT_EQ(p.source_width, 60);
  EXPECT_EQ(p.levels.front().image_width, 120);
  EXPECT_DOUBLE_EQ(p.x_factor(0), 2.0);
}

TEST(Pyramid, TooSmallWithoutUpsamplingThrows) {
  EXPECT_EQ(code_of([] { build_pyramid(RasterImage(40, 40, 0.5f), {4, 64, false}); }), ErrorCode::ImageTooSmall);
}

TEST(RegionViews, SixtyFourPixelBoxGivesSixBySix) {
  const FeaturePyramid p = build_pyramid(RasterImage(64, 64, 0.5f), {4, 64, false});
  const auto views = extract_region_views(p, {0, 0, 64, 64});
  ASSERT_EQ(views.size(), 1u);
  EXPECT_EQ(views[0], (GridView{0, 0, 0, 6, 6}));
}

TEST(RegionViews, FortyPixelBoxIsTooSmall) {
  const FeaturePyramid p = build_pyramid(RasterImage(64, 64, 0.5f), {4, 64, false});
  EXPECT_EQ(code_of([&] { extract_region_views(p, {0, 0, 40, 40}); }), ErrorCode::RegionTooSmall);
}

TEST(RegionViews, ViewsStayInsideEveryLevel) {
  std::mt19937_64 rng(4);
  const FeaturePyramid p = build_pyramid(RasterImage(320, 240, 0.5f), {4, 64, false});
  for (int i = 0; i < 500; ++i) {
    const Box b = testing_support::random_box(rng, 200.0, 60.0, 200.0);
    std::vector<GridView> views;
    try {
      views = extract_region_views(p, b);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::RegionTooSmall);
      continue;
    }
    for (const GridView& v : views) {
      const FeatureGrid& g = p.levels[v.level].grid;
      EXPECT_GE(v.rows, 6);
      EXPECT_GE(v.cols, 6);
      EXPECT_LE(v.row0 + v.rows, g.rows);
      EXPECT_LE(v.col0 + v.cols, g.cols);
      const FeatureGrid cut = view_grid(p, v);
      EXPECT_EQ(cut.at(0, 0, 31), g.at(v.row0, v.col0, 31));
    }
  }
}

TEST(PyramidSet, CacheReturnsTheSamePyramid) {
  std::mt19937_64 rng(8);
  const RasterImage img = testing_support::blob_image(120, 96, rng);
  const auto dir = std::filesystem::temp_directory_path() / "mldetect_test_cache";
  std::filesystem::remove_all(dir);
  auto cache = std::make_shared<PyramidCache>(dir);
  const PyramidConfig cfg{4, 64, true};
  PyramidSet first(img, cfg, cache, "img");
  const FeaturePyramid& a = first.normal();
  PyramidSet second(img, cfg, cache, "img");
  const FeaturePyramid& b = second.normal();
  ASSERT_EQ(a.levels.size(), b.levels.size());
  for (std::size_t i = 0; i < a.levels.size(); ++i) {
    EXPECT_EQ(a.levels[i].scale, b.levels[i].scale);
    EXPECT_EQ(a.levels[i].grid.values, b.levels[i].grid.values);
  }
  EXPECT_TRUE(first.upsampled().upsampled);
  std::filesystem::remove_all(dir);
}

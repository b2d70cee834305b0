#include <gtest/gtest.h>

#include <algorithm>

#include "fibra/features.hpp"
#include "test_support.hpp"

using namespace fibra;
using fibra::testing::random_axes;

namespace {

DirectionField constant_field(Dims3 grid, const Vec3& dir) {
  DirectionField df;
  df.grid = grid;
  df.cube_edge = 4;
  df.cells.resize(grid.count());
  for (auto& c : df.cells) {
    c.axis = axis_from(dir);
    c.valid = true;
    c.count = 64;
  }
  return df;
}

}  // namespace

TEST(MeanDirection, Examples) {
  std::vector<AxialDirection> same(7, axis_from(Vec3(0, 0, 1)));
  EXPECT_EQ(mean_direction(same), Vec3(0, 0, 1));
  std::vector<AxialDirection> two = {axis_from(Vec3(1, 0, 0)), axis_from(Vec3(0, 1, 0))};
  EXPECT_EQ(mean_direction(two), Vec3(0.5, 0.5, 0));
}

TEST(MeanDirection, EmptyWindow) {
  try {
    mean_direction({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyWindow);
  }
}

TEST(MeanDirection, MatchesNaiveSummation) {
  auto d = random_axes(100, 31);
  double sx = 0, sy = 0, sz = 0;
  for (const auto& a : d) {
    sx += a.x();
    sy += a.y();
    sz += a.z();
  }
  const Vec3 m = mean_direction(d);
  EXPECT_NEAR(m.x(), sx / 100, 1e-12);
  EXPECT_NEAR(m.y(), sy / 100, 1e-12);
  EXPECT_NEAR(m.z(), sz / 100, 1e-12);
  EXPECT_LE(m.norm(), 1.0);
  Rng rng(1);
  std::shuffle(d.begin(), d.end(), rng);
  EXPECT_LT((mean_direction(d) - m).norm(), 1e-12);
}

TEST(ExtractFeatures, PartitionArithmetic) {
  const auto df = constant_field({8, 8, 8}, Vec3(0, 1, 1));
  FeatureParams p;
  p.spec = {8, 8, 16};
  const auto g = extract_features(df, p);
  EXPECT_EQ(g.grid.count(), 1u);
  ASSERT_EQ(g.windows.size(), 1u);
  EXPECT_EQ(g.windows[0].n, 512u);

  p.spec = {4, 2, 2};
  EXPECT_EQ(extract_features(df, p).grid, (Dims3{3, 3, 3}));
}

TEST(ExtractFeatures, ConstantFieldIsDegenerate) {
  const Vec3 dir = Vec3(0.2, 0.3, 0.9).normalized();
  const auto df = constant_field({16, 16, 8}, dir);
  FeatureParams p;
  p.spec = {8, 8, 16};
  p.mode = AttributeMode::both;
  p.standardize = false;
  const auto g = extract_features(df, p);
  ASSERT_EQ(g.windows.size(), 4u);
  const double floor_value = 2 * std::log(1e-6) + 1.1447 + 0.5772 + std::log(511.0);
  for (const auto& f : g.windows) {
    EXPECT_LT((f.mean - axis_from(dir).vec()).norm(), 1e-12);
    EXPECT_NEAR(f.entropy, floor_value, 1e-9);
    EXPECT_TRUE(f.degenerate);
  }
  EXPECT_EQ(g.degenerate_count(), 4u);
}

TEST(ExtractFeatures, TwoRegionFieldSeparates) {
  auto df = constant_field({16, 16, 16}, Vec3(0, 0, 1));
  for (std::size_t z = 0; z < 16; ++z)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 8; ++x) df.cells[df.grid.index(x, y, z)].axis = axis_from(Vec3(1, 0, 0));
  FeatureParams p;
  p.spec = {4, 4, 8};
  const auto g = extract_features(df, p);
  ASSERT_EQ(g.windows.size(), 64u);
  for (const auto& f : g.windows) {
    const Vec3 expected = f.window.x < 2 ? Vec3(1, 0, 0) : Vec3(0, 0, 1);
    EXPECT_LT((f.mean - expected).norm(), 1e-12);
  }
  const auto a = UnitVector::normalize(g.windows[0].mean), b = UnitVector::normalize(g.windows[3].mean);
  EXPECT_NEAR(geodesic_distance(a, b, Metric::axial), kPi / 2, 1e-12);
}

TEST(ExtractFeatures, SkipsSparseWindowsAndFailsWhenNoneRemain) {
  auto df = constant_field({8, 8, 16}, Vec3(0, 0, 1));
  for (std::size_t i = 0; i < 8 * 8 * 8; ++i) df.cells[i].valid = false;
  FeatureParams p;
  p.spec = {8, 8, 16};
  const auto g = extract_features(df, p);
  ASSERT_EQ(g.windows.size(), 1u);
  EXPECT_EQ(g.windows[0].window, (GridIndex{0, 0, 1}));
  for (auto& c : df.cells) c.valid = false;
  try {
    extract_features(df, p);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NoValidWindows);
  }
}

TEST(ExtractFeatures, StandardizationDefaults) {
  DirectionField df;
  df.grid = {16, 16, 16};
  df.cells.resize(df.grid.count());
  const auto axes = random_axes(df.grid.count(), 5);
  for (std::size_t i = 0; i < axes.size(); ++i) df.cells[i] = {axes[i], 10, true};
  FeatureParams p;
  p.spec = {4, 4, 8};
  p.mode = AttributeMode::entropy;
  EXPECT_FALSE(extract_features(df, p).normalization.applied);
  p.mode = AttributeMode::both;
  const auto g = extract_features(df, p);
  ASSERT_TRUE(g.normalization.applied);
  const auto m = g.matrix();
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(m.col(k).mean(), 0.0, 1e-9);
    EXPECT_NEAR(std::sqrt((m.col(k).array() - m.col(k).mean()).square().mean()), 1.0, 1e-9);
  }
}

TEST(WindowSpec, Validation) {
  EXPECT_THROW((WindowSpec{1, 1, 2}.validate()), Error);
  EXPECT_THROW((WindowSpec{2, 0, 2}.validate()), Error);
  EXPECT_THROW((WindowSpec{2, 1, 1}.validate()), Error);
  EXPECT_NO_THROW((WindowSpec{2, 1, 2}.validate()));
}

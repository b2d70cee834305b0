#include <gtest/gtest.h>

#include <cmath>

#include "fibra/rsa.hpp"
#include "test_support.hpp"

using namespace fibra;
using fibra::testing::brute_force_violations;
using fibra::testing::ternary_segment_distance;

namespace {

RsaParams small_params(std::uint64_t seed) {
  RsaParams p = rsa_preset("rotated-mean", {64, 64, 64});
  p.fibre_radius = 1.5;
  p.fibre_length = 16;
  p.volume_fraction = 0.12;
  p.seed = seed;
  return p;
}

}  // namespace

TEST(SegmentDistance, MatchesTernaryOracle) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  for (int k = 0; k < 2000; ++k) {
    Vec3 a0(u(rng), u(rng), u(rng)), a1(u(rng), u(rng), u(rng)), b0(u(rng), u(rng), u(rng)), b1(u(rng), u(rng), u(rng));
    ASSERT_NEAR(std::sqrt(segment_distance_sq(a0, a1, b0, b1)), ternary_segment_distance(a0, a1, b0, b1), 1e-7);
  }
  // Parallel segments.
  EXPECT_NEAR(std::sqrt(segment_distance_sq(Vec3(0, 0, 0), Vec3(0, 0, 4), Vec3(1, 0, 2), Vec3(1, 0, 9))), 1.0, 1e-12);
}

TEST(GenerateRsa, ZeroFractionIsEmpty) {
  RsaParams p = small_params(1);
  p.volume_fraction = 0.0;
  const auto fs = generate_rsa(p);
  EXPECT_TRUE(fs.cylinders.empty());
  EXPECT_FALSE(fs.jammed);
}

TEST(GenerateRsa, DeterministicForSeed) {
  const auto a = generate_rsa(small_params(42)), b = generate_rsa(small_params(42));
  ASSERT_EQ(a.cylinders.size(), b.cylinders.size());
  for (std::size_t i = 0; i < a.cylinders.size(); ++i) {
    EXPECT_EQ(a.cylinders[i].center, b.cylinders[i].center);
    EXPECT_EQ(a.cylinders[i].axis, b.cylinders[i].axis);
  }
  EXPECT_NE(generate_rsa(small_params(43)).cylinders.front().center, a.cylinders.front().center);
}

TEST(GenerateRsa, NoIntersectionsBruteForce) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto fs = generate_rsa(small_params(seed));
    ASSERT_GT(fs.cylinders.size(), 50u);
    EXPECT_EQ(brute_force_violations(fs), 0u) << "seed " << seed;
    for (const auto& c : fs.cylinders) {
      EXPECT_TRUE(c.center.x() >= 0 && c.center.x() < 64 && c.center.y() >= 0 && c.center.y() < 64 &&
                  c.center.z() >= 0 && c.center.z() < 64);
      EXPECT_EQ(c.is_anomaly, fs.anomaly.contains(c.center));
    }
  }
}

TEST(GenerateRsa, VolumeFractionNearTarget) {
  const auto fs = generate_rsa(small_params(9));
  ASSERT_FALSE(fs.jammed);
  const auto vol = voxelize(fs);
  std::size_t on = 0;
  for (auto v : vol.voxels) on += v == 255;
  const double achieved = static_cast<double>(on) / vol.voxels.size();
  EXPECT_NEAR(achieved, 0.12, 0.1 * 0.12);
}

TEST(GenerateRsa, JammedFlagWhenBudgetTooSmall) {
  RsaParams p = small_params(4);
  p.max_attempts = 50;
  const auto fs = generate_rsa(p);
  EXPECT_TRUE(fs.jammed);
  EXPECT_LT(fs.placed_fraction, 0.9 * p.volume_fraction);
}

TEST(GenerateRsa, RejectsInvalidParams) {
  RsaParams p = small_params(1);
  p.volume_fraction = 0.35;
  EXPECT_THROW(generate_rsa(p), Error);
  p = small_params(1);
  p.normal_dirs.kappa = -1;
  EXPECT_THROW(generate_rsa(p), Error);
}

TEST(GenerateRsa, AnomalyConcentrationIsMonotoneInKappa) {
  double previous = 10.0;
  for (double kappa : {1.0, 10.0, 100.0}) {
    RsaParams p = small_params(5);
    p.anomaly = AnomalyRegion::make_box(Vec3(0, 0, 0), Vec3(64, 64, 64));
    p.anomaly_dirs = {Vec3(0, 1, 1), kappa};
    const auto fs = generate_rsa(p);
    const auto mean_axis = UnitVector::normalize(0, 1, 1);
    double sum = 0;
    for (const auto& c : fs.cylinders) sum += geodesic_distance(c.axis, mean_axis, Metric::axial);
    const double mean = sum / fs.cylinders.size();
    EXPECT_LT(mean, previous) << "kappa " << kappa;
    previous = mean;
  }
}

TEST(Voxelize, EmptySystemIsZero) {
  FibreSystem fs;
  fs.dims = {16, 16, 16};
  const auto vol = voxelize(fs);
  for (auto v : vol.voxels) ASSERT_EQ(v, 0);
}

TEST(Voxelize, SingleCylinderVolume) {
  FibreSystem fs;
  fs.dims = {48, 48, 48};
  Cylinder c;
  c.center = Vec3(24, 24, 24);
  c.axis = axis_from(Vec3(0, 0, 1));
  c.radius = 5;
  c.half_length = 12;
  fs.cylinders.push_back(c);
  const auto vol = voxelize(fs);
  std::size_t on = 0;
  for (auto v : vol.voxels) {
    ASSERT_TRUE(v == 0 || v == 255);
    on += v == 255;
  }
  const double analytic = kPi * 25 * 24;
  EXPECT_NEAR(on, analytic, 0.05 * analytic);
}

TEST(Voxelize, BlurAndNoiseStayInRange) {
  auto fs = generate_rsa(small_params(2));
  const auto vol = voxelize(fs, 1.0, 10.0, 3);
  std::size_t mid = 0;
  for (auto v : vol.voxels) mid += v != 0 && v != 255;
  EXPECT_GT(mid, vol.voxels.size() / 2);
  const auto again = voxelize(fs, 1.0, 10.0, 3);
  EXPECT_EQ(vol.voxels, again.voxels);
}

TEST(GroundTruth, EmptyAndFullRegions) {
  FibreSystem fs;
  fs.dims = {128, 128, 128};
  WindowSpec spec{4, 4, 2};
  auto none = ground_truth_labels(fs, spec, 4);
  EXPECT_EQ(none.size(), 8u * 8 * 8);
  for (std::size_t i = 0; i < none.size(); ++i) EXPECT_FALSE(none.is_anomaly(i));

  fs.anomaly = AnomalyRegion::make_box(Vec3(0, 0, 0), Vec3(128, 128, 128));
  auto all = ground_truth_labels(fs, spec, 4);
  for (std::size_t i = 0; i < all.size(); ++i) EXPECT_TRUE(all.is_anomaly(i));
}

TEST(GroundTruth, CentralBoxMatchesEnumeration) {
  FibreSystem fs;
  fs.dims = {200, 200, 300};
  fs.anomaly = AnomalyRegion::make_box(Vec3(50, 60, 70), Vec3(150, 130, 230));
  WindowSpec spec{8, 3, 16};
  const auto truth = ground_truth_labels(fs, spec, 4);
  std::size_t expected = 0, windows = 0;
  // Window centres enumerated directly in voxel units.
  for (int z = 0; (z * 3 + 8) <= 75; ++z)
    for (int y = 0; (y * 3 + 8) <= 50; ++y)
      for (int x = 0; (x * 3 + 8) <= 50; ++x) {
        ++windows;
        const double cx = 4.0 * (3 * x + 4), cy = 4.0 * (3 * y + 4), cz = 4.0 * (3 * z + 4);
        expected += cx >= 50 && cx < 150 && cy >= 60 && cy < 130 && cz >= 70 && cz < 230;
      }
  std::size_t got = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) got += truth.is_anomaly(i);
  EXPECT_EQ(truth.size(), windows);
  EXPECT_EQ(got, expected);
  EXPECT_GT(got, 0u);
}

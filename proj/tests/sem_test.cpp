#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "fibra/sem.hpp"
#include "test_support.hpp"

using namespace fibra;

namespace {

struct Sample {
  Eigen::MatrixXd x;
  std::vector<int> truth;
  std::vector<GridIndex> windows;
  Dims3 grid;
};

std::vector<GridIndex> cube_windows(Dims3 g) {
  std::vector<GridIndex> w;
  for (std::size_t z = 0; z < g.nz; ++z)
    for (std::size_t y = 0; y < g.ny; ++y)
      for (std::size_t x = 0; x < g.nx; ++x) w.push_back({int(x), int(y), int(z)});
  return w;
}

// Two 1D Gaussians (mu = 0 and 5, sigma = 1), randomly scattered over a 10x10x10 window grid.
Sample two_gaussians(std::uint64_t seed, std::size_t per_class = 500) {
  Rng rng(seed);
  std::normal_distribution<double> g(0, 1);
  Sample s;
  s.grid = {10, 10, 10};
  s.windows = cube_windows(s.grid);
  s.x.resize(2 * per_class, 1);
  s.truth.resize(2 * per_class);
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    s.truth[i] = i < per_class ? 0 : 1;
    s.x(i, 0) = g(rng) + 5.0 * s.truth[i];
  }
  std::vector<std::size_t> perm(2 * per_class);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng);
  Sample out = s;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.x(i, 0) = s.x(perm[i], 0);
    out.truth[i] = s.truth[perm[i]];
  }
  return out;
}

double misassignment(const std::vector<int>& pred, const std::vector<int>& truth) {
  std::size_t same = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) same += pred[i] == truth[i];
  const std::size_t diff = pred.size() - same;
  return static_cast<double>(std::min(same, diff)) / pred.size();
}

std::size_t boundary_length(const ClusterMap& m) {
  std::map<GridIndex, int> lab;
  for (std::size_t i = 0; i < m.size(); ++i) lab[m.windows[i]] = m.labels[i];
  std::size_t b = 0;
  for (const auto& [w, l] : lab)
    for (GridIndex n : {GridIndex{w.x + 1, w.y, w.z}, GridIndex{w.x, w.y + 1, w.z}, GridIndex{w.x, w.y, w.z + 1}}) {
      auto it = lab.find(n);
      if (it != lab.end()) b += it->second != l;
    }
  return b;
}

}  // namespace

TEST(SemParams, Defaults) {
  SemParams p;
  EXPECT_EQ(p.k_init, 10);
  EXPECT_EQ(p.max_iterations, 200);
  EXPECT_EQ(p.restarts, 5);
  EXPECT_DOUBLE_EQ(p.beta, 1.0);
  EXPECT_DOUBLE_EQ(p.convergence, 0.005);
  p.k_init = 1;
  EXPECT_THROW(p.validate(), Error);
  p = {};
  p.beta = -0.1;
  EXPECT_THROW(p.validate(), Error);
}

TEST(SemFit, RecoversTwoGaussians) {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto s = two_gaussians(seed);
    SemParams p;
    p.beta = 0;
    p.seed = seed;
    const auto r = sem_fit(s.x, s.windows, s.grid, p);
    ASSERT_EQ(r.components.size(), 2u);
    std::vector<double> means = {r.components[0].mean(0), r.components[1].mean(0)};
    std::sort(means.begin(), means.end());
    EXPECT_NEAR(means[0], 0.0, 0.3);
    EXPECT_NEAR(means[1], 5.0, 0.3);
    EXPECT_LE(misassignment(r.map.labels, s.truth), 0.02);
    double w = 0;
    for (const auto& c : r.components) w += c.weight;
    EXPECT_NEAR(w, 1.0, 1e-9);
  }
}

TEST(SemFit, KeptRestartHasBestLikelihood) {
  const auto s = two_gaussians(7);
  SemParams p;
  p.beta = 0;
  const auto r = sem_fit(s.x, s.windows, s.grid, p);
  ASSERT_EQ(r.restart_loglik.size(), 5u);
  for (double ll : r.restart_loglik) EXPECT_GE(r.restart_loglik[r.kept_restart], ll);
  EXPECT_FALSE(r.trace.empty());
}

TEST(SemFit, IdenticalFeaturesCollapse) {
  Dims3 grid{6, 6, 4};
  Eigen::MatrixXd x = Eigen::MatrixXd::Constant(grid.count(), 3, 0.25);
  SemParams p;
  const auto r = sem_fit(x, cube_windows(grid), grid, p);
  EXPECT_LE(r.components.size(), 2u);
  EXPECT_EQ(r.map.cluster_count(), 1u);
  for (std::size_t i = 0; i < r.map.size(); ++i) EXPECT_FALSE(r.map.is_anomaly(i));
}

TEST(SemFit, TooFewWindows) {
  Dims3 grid{3, 3, 3};
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(27, 1);
  try {
    sem_fit(x, cube_windows(grid), grid, SemParams{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewWindows);
  }
}

TEST(SemFit, DeterministicForSeed) {
  const auto s = two_gaussians(3);
  SemParams p;
  p.seed = 99;
  const auto a = sem_fit(s.x, s.windows, s.grid, p);
  const auto b = sem_fit(s.x, s.windows, s.grid, p);
  EXPECT_EQ(a.map.labels, b.map.labels);
  EXPECT_EQ(a.trace, b.trace);
}

TEST(SemFit, ZeroBetaEqualsNonSpatial) {
  const auto s = two_gaussians(4);
  SemParams zero;
  zero.beta = 0;
  zero.seed = 5;
  SemParams off = zero;
  off.beta = 3.0;
  off.spatial = false;
  const auto a = sem_fit(s.x, s.windows, s.grid, zero);
  const auto b = sem_fit(s.x, s.windows, s.grid, off);
  EXPECT_EQ(a.map.labels, b.map.labels);
  EXPECT_EQ(a.trace, b.trace);
  EXPECT_EQ(a.restart_loglik, b.restart_loglik);
}

TEST(SemFit, CovarianceFloorHolds) {
  const auto s = two_gaussians(2);
  const auto r = sem_fit(s.x, s.windows, s.grid, SemParams{});
  for (const auto& c : r.components) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(c.covariance);
    EXPECT_GT(es.eigenvalues().minCoeff(), 0.0);
  }
}

TEST(SemFit, SpatialCouplingShortensBoundaries) {
  // Two blocks (x < 6 vs x >= 6) with noisy 1D features; non-spatial SEM leaves speckle.
  const Dims3 grid{12, 12, 6};
  const auto windows = cube_windows(grid);
  double sum0 = 0, sum2 = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(seed);
    std::normal_distribution<double> g(0, 1);
    Eigen::MatrixXd x(windows.size(), 1);
    for (std::size_t i = 0; i < windows.size(); ++i) x(i, 0) = g(rng) + (windows[i].x < 6 ? 0.0 : 2.5);
    SemParams p;
    p.seed = seed;
    p.restarts = 2;
    p.beta = 0;
    sum0 += boundary_length(sem_fit(x, windows, grid, p).map);
    p.beta = 2;
    sum2 += boundary_length(sem_fit(x, windows, grid, p).map);
  }
  EXPECT_LE(sum2 / 20, sum0 / 20);
}

TEST(Bhattacharyya, ZeroForIdenticalAndPositiveOtherwise) {
  GaussianComponent a{0.5, Eigen::VectorXd::Zero(2), Eigen::MatrixXd::Identity(2, 2)};
  GaussianComponent b = a;
  EXPECT_NEAR(sem_detail::bhattacharyya(a, b), 0.0, 1e-12);
  b.mean(0) = 2;
  // Equal covariances: D = |mu1 - mu2|^2 / 8.
  EXPECT_NEAR(sem_detail::bhattacharyya(a, b), 0.5, 1e-12);
  const auto m = sem_detail::merge(a, b);
  EXPECT_NEAR(m.weight, 1.0, 1e-12);
  EXPECT_NEAR(m.mean(0), 1.0, 1e-12);
  EXPECT_NEAR(m.covariance(0, 0), 2.0, 1e-12);
}

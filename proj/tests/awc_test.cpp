#include <gtest/gtest.h>

#include <random>

#include "fibra/awc.hpp"
#include "test_support.hpp"

using namespace fibra;

namespace {

// Closed-form overlap for d = 3: V_cap = pi (4h + s)(2h - s)^2 / 12.
double q_closed_form_3d(double t) {
  const double h = 1.0, s = t;
  const double v = 4.0 / 3.0 * kPi;
  const double cap = kPi * (4 * h + s) * (2 * h - s) * (2 * h - s) / 12.0;
  return cap / (2 * v - cap);
}

Eigen::MatrixXd blobs(std::uint64_t seed, std::size_t per_blob, double separation, std::vector<int>& truth) {
  Rng rng(seed);
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd x(2 * per_blob, 3);
  truth.assign(2 * per_blob, 0);
  for (std::size_t i = 0; i < 2 * per_blob; ++i) {
    const int b = i < per_blob ? 0 : 1;
    truth[i] = b;
    for (int k = 0; k < 3; ++k) x(i, k) = g(rng) + (k == 0 ? b * separation : 0.0);
  }
  return x;
}

}  // namespace

TEST(BallOverlap, Endpoints) {
  for (int d : {1, 2, 3, 4}) {
    EXPECT_EQ(ball_overlap_q(0.0, d), 1.0);
    EXPECT_EQ(ball_overlap_q(2.0, d), 0.0);
  }
  EXPECT_DOUBLE_EQ(ball_overlap_q(1.0, 1), 1.0 / 3.0);
}

TEST(BallOverlap, ThreeDimensionalClosedForm) {
  for (int k = 0; k <= 200; ++k) {
    const double t = 2.0 * k / 200;
    EXPECT_NEAR(ball_overlap_q(t, 3), q_closed_form_3d(t), 1e-9) << t;
  }
}

TEST(BallOverlap, StrictlyDecreasing) {
  for (int d : {1, 3, 4}) {
    double prev = ball_overlap_q(0.0, d);
    for (int k = 1; k < 400; ++k) {
      const double q = ball_overlap_q(2.0 * k / 400, d);
      ASSERT_LT(q, prev) << "d=" << d << " k=" << k;
      prev = q;
    }
  }
}

TEST(KlBernoulli, NonNegativeWithEqualityOnDiagonal) {
  for (int a = 0; a <= 50; ++a)
    for (int b = 1; b < 50; ++b) {
      const double theta = a / 50.0, q = b / 50.0;
      const double kl = kl_bernoulli(theta, q);
      ASSERT_GE(kl, 0.0);
      if (a == b) ASSERT_NEAR(kl, 0.0, 1e-15);
      else ASSERT_GT(kl, 0.0);
    }
}

TEST(AwcStatistic, SignConvention) {
  EXPECT_LT(awc_statistic(9, 1, 0.5), 0.0);   // more overlap than expected: always joined
  EXPECT_GT(awc_statistic(1, 9, 0.5), 0.0);   // gap
  EXPECT_EQ(awc_statistic(5, 5, 0.5), 0.0);
}

TEST(Components, Examples) {
  EXPECT_EQ(components(WeightMatrix::identity(5)).cluster_count(), 5u);
  EXPECT_EQ(components(WeightMatrix::full(5)).cluster_count(), 1u);
  WeightMatrix w(7);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = i + 1; j < 3; ++j) w.set(i, j, true);
  for (std::size_t i = 3; i < 7; ++i)
    for (std::size_t j = i + 1; j < 7; ++j) w.set(i, j, true);
  const auto m = components(w);
  const auto pop = m.populations();
  ASSERT_EQ(pop.size(), 2u);
  EXPECT_EQ(pop.at(0), 4u);  // larger block first
  EXPECT_EQ(pop.at(1), 3u);
}

TEST(AwcFit, InfiniteLambdaSingleBlob) {
  Rng rng(1);
  std::normal_distribution<double> g(0, 1);
  Eigen::MatrixXd x(150, 3);
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (int k = 0; k < 3; ++k) x(i, k) = g(rng);
  AwcParams p;
  p.lambda = 1e12;
  const auto r = awc_fit(x, p);
  EXPECT_EQ(r.map.cluster_count(), 1u);
}

TEST(AwcFit, TwoSeparatedBlobs) {
  for (double lambda : {4.0, 8.0, 12.0}) {
    std::vector<int> truth;
    const auto x = blobs(5, 120, 20.0, truth);
    AwcParams p;
    p.lambda = lambda;
    const auto r = awc_fit(x, p);
    ASSERT_EQ(r.map.cluster_count(), 2u) << "lambda " << lambda;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) agree += r.map.labels[i] == truth[i];
    EXPECT_TRUE(agree == 0 || agree == truth.size()) << "lambda " << lambda;
  }
}

TEST(AwcFit, WeightMatrixSymmetricWithUnitDiagonal) {
  std::vector<int> truth;
  const auto x = blobs(6, 60, 6.0, truth);
  for (int steps : {0, 1, 3, 100}) {
    AwcParams p;
    p.max_steps = steps;
    const auto r = awc_fit(x, p);
    for (std::size_t i = 0; i < r.weights.size(); ++i) {
      ASSERT_TRUE(r.weights.get(i, i));
      for (std::size_t j = 0; j < r.weights.size(); ++j) ASSERT_EQ(r.weights.get(i, j), r.weights.get(j, i));
    }
  }
}

TEST(AwcFit, FirstStepMonotoneInLambda) {
  std::vector<int> truth;
  const auto x = blobs(8, 80, 5.0, truth);
  AwcParams p;
  p.max_steps = 1;
  p.lambda = 0.5;
  const auto low = awc_fit(x, p);
  p.lambda = 5.0;
  const auto high = awc_fit(x, p);
  for (std::size_t i = 0; i < low.weights.size(); ++i)
    for (std::size_t j = 0; j < low.weights.size(); ++j)
      if (low.weights.get(i, j)) {
        ASSERT_TRUE(high.weights.get(i, j));
      }
}

TEST(AwcFit, TooFewPoints) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(8, 3);
  EXPECT_THROW(awc_fit(x, AwcParams{}), Error);
  AwcParams bad;
  bad.growth = 1.0;
  EXPECT_THROW(bad.validate(), Error);
}

TEST(AwcPresets, TableValues) {
  EXPECT_DOUBLE_EQ(awc_preset_lambda("rsa", AttributeMode::entropy), 9.2);
  EXPECT_DOUBLE_EQ(awc_preset_lambda("rsa", AttributeMode::mean_dir), 10.0);
  EXPECT_DOUBLE_EQ(awc_preset_lambda("rsa", AttributeMode::both), 0.2);
  EXPECT_DOUBLE_EQ(awc_preset_lambda("real", AttributeMode::entropy), 19.27);
  EXPECT_DOUBLE_EQ(awc_preset_lambda("real", AttributeMode::mean_dir), 4.27);
  EXPECT_DOUBLE_EQ(awc_preset_lambda("real", AttributeMode::both), 1.21);
  EXPECT_THROW(awc_preset_lambda("other", AttributeMode::both), Error);
}

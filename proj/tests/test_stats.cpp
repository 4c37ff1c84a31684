#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "slowfast/stats.hpp"

using namespace slowfast;

TEST(Stats, MeanVarianceMedian) {
  const std::vector<double> xs{1.0, 2.0, 3.0, 4.0};
  EXPECT_DOUBLE_EQ(mean(xs), 2.5);
  EXPECT_DOUBLE_EQ(sample_variance(xs), 5.0 / 3.0);
  EXPECT_DOUBLE_EQ(median(xs), 2.5);
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
}

TEST(Stats, WhiteNoiseHasUnitAutocorrelationTime) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> d;
  std::vector<double> xs(50000);
  for (auto& x : xs) x = d(rng);
  EXPECT_NEAR(integrated_autocorr_time(xs), 1.0, 0.1);
}

TEST(Stats, Ar1AutocorrelationTime) {
  // x_{n+1} = phi x_n + noise has tau = (1 + phi) / (1 - phi).
  std::mt19937_64 rng(2);
  std::normal_distribution<double> d;
  const double phi = 0.8;
  std::vector<double> xs(400000);
  double x = 0.0;
  for (auto& v : xs) v = x = phi * x + d(rng);
  EXPECT_NEAR(integrated_autocorr_time(xs), 9.0, 0.6);
  const Estimate e = chain_mean(xs);
  EXPECT_NEAR(e.std_error, std::sqrt(9.0 / (1 - phi * phi) / xs.size()), 0.1 * e.std_error);
  EXPECT_NEAR(effective_sample_size(xs), xs.size() / 9.0, xs.size() / 9.0 * 0.08);
}

TEST(Stats, JointSigma) {
  EXPECT_TRUE(within_joint_sigma({1.0, 0.3}, {2.0, 0.4}, 3.0));
  EXPECT_FALSE(within_joint_sigma({1.0, 0.03}, {2.0, 0.04}, 3.0));
}

TEST(Stats, WilsonIntervalReferenceValues) {
  // 50 of 100 at 95%: 0.5 -+ 0.0963 approximately (Wilson).
  const Interval a = wilson_interval(50, 100);
  EXPECT_NEAR(a.low, 0.4038, 1e-4);
  EXPECT_NEAR(a.high, 0.5962, 1e-4);
  const Interval b = wilson_interval(0, 200);
  EXPECT_DOUBLE_EQ(b.low, 0.0);
  EXPECT_NEAR(b.high, 0.01884, 1e-4);
  const Interval c = wilson_interval(200, 200);
  EXPECT_NEAR(c.low, 1.0 - 0.01884, 1e-4);
  EXPECT_DOUBLE_EQ(c.high, 1.0);
}

TEST(Stats, LeastSquaresRecoversLine) {
  const std::vector<double> x{0, 1, 2, 3, 4};
  std::vector<double> y;
  for (double v : x) y.push_back(2.0 - 0.5 * v);
  const LinearFit f = least_squares(x, y);
  EXPECT_NEAR(f.slope, -0.5, 1e-14);
  EXPECT_NEAR(f.intercept, 2.0, 1e-14);
  EXPECT_NEAR(f.slope_std_error, 0.0, 1e-12);
  const std::vector<double> s{1, 1, 1, 1, 1};
  const LinearFit w = weighted_least_squares(x, y, s);
  EXPECT_NEAR(w.slope, -0.5, 1e-14);
  EXPECT_NEAR(w.slope_std_error, 1.0 / std::sqrt(10.0), 1e-14);
}

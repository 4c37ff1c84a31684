#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace slowfast {

/// A Monte Carlo estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

double mean(std::span<const double> xs);
double sample_variance(std::span<const double> xs);
double median(std::vector<double> xs);

/// Integrated autocorrelation time with Sokal's self-consistent window
/// (window M is the first lag with M >= 5 tau(M)). Returns 1 for white noise.
double integrated_autocorr_time(std::span<const double> xs);

/// Mean of an i.i.d. sample, SE = sd / sqrt(n).
Estimate iid_mean(std::span<const double> xs);

/// Mean of a correlated (Markov chain) sample, SE inflated by sqrt(tau).
Estimate chain_mean(std::span<const double> xs);

/// Effective sample size n / tau.
double effective_sample_size(std::span<const double> xs);

/// |a - b| <= n_sigma * sqrt(se_a^2 + se_b^2).
bool within_joint_sigma(const Estimate& a, const Estimate& b, double n_sigma);

struct Interval {
  double low = 0.0;
  double high = 0.0;
};

/// Wilson score interval for a binomial proportion (z = 1.96 for 95%).
Interval wilson_interval(std::size_t successes, std::size_t trials, double z = 1.959963984540054);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_std_error = 0.0;
};

/// Ordinary least squares y = intercept + slope * x.
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

/// Weighted least squares with per-point standard errors sigma_i
/// (weights 1 / sigma_i^2). slope_std_error comes from the weights alone.
LinearFit weighted_least_squares(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> sigma);

}  // namespace slowfast

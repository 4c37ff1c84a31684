#include "slowfast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace slowfast {

double mean(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(xs.size() - 1);
}

double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median of empty sample");
  const std::size_t mid = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + mid, xs.end());
  if (xs.size() % 2 == 1) return xs[mid];
  const double upper = xs[mid];
  const double lower = *std::max_element(xs.begin(), xs.begin() + mid);
  return 0.5 * (lower + upper);
}

double integrated_autocorr_time(std::span<const double> xs) {
  const std::size_t n = xs.size();
  if (n < 4) return 1.0;
  const double m = mean(xs);
  double c0 = 0.0;
  for (double x : xs) c0 += (x - m) * (x - m);
  c0 /= static_cast<double>(n);
  if (c0 <= 0.0) return 1.0;

  const std::size_t max_lag = n / 4;
  double tau = 1.0;
  for (std::size_t lag = 1; lag < max_lag; ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (xs[i] - m) * (xs[i + lag] - m);
    c /= static_cast<double>(n);
    tau += 2.0 * c / c0;
    if (static_cast<double>(lag) >= 5.0 * tau) break;
  }
  return std::max(tau, 1.0);
}

Estimate iid_mean(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  return {mean(xs), std::sqrt(sample_variance(xs) / n)};
}

Estimate chain_mean(std::span<const double> xs) {
  const double n = static_cast<double>(xs.size());
  const double tau = integrated_autocorr_time(xs);
  return {mean(xs), std::sqrt(sample_variance(xs) * tau / n)};
}

double effective_sample_size(std::span<const double> xs) {
  return static_cast<double>(xs.size()) / integrated_autocorr_time(xs);
}

bool within_joint_sigma(const Estimate& a, const Estimate& b, double n_sigma) {
  const double joint = std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
  return std::abs(a.value - b.value) <= n_sigma * joint;
}

Interval wilson_interval(std::size_t successes, std::size_t trials, double z) {
  if (trials == 0) throw std::invalid_argument("Wilson interval needs at least one trial");
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double centre = (p + z2 / (2.0 * n)) / denom;
  const double half = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
  const double low = successes == 0 ? 0.0 : std::max(0.0, centre - half);
  const double high = successes == trials ? 1.0 : std::min(1.0, centre + half);
  return {low, high};
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
  std::vector<double> ones(x.size(), 1.0);
  LinearFit fit = weighted_least_squares(x, y, ones);
  // Replace the weight-only slope error with the residual-based one.
  const std::size_t n = x.size();
  if (n > 2) {
    const double mx = mean(x);
    double sxx = 0.0, rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sxx += (x[i] - mx) * (x[i] - mx);
      const double r = y[i] - fit.intercept - fit.slope * x[i];
      rss += r * r;
    }
    fit.slope_std_error = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return fit;
}

LinearFit weighted_least_squares(std::span<const double> x, std::span<const double> y,
                                 std::span<const double> sigma) {
  if (x.size() != y.size() || x.size() != sigma.size() || x.size() < 2) {
    throw std::invalid_argument("least squares needs at least two matched points");
  }
  double sw = 0.0, swx = 0.0, swy = 0.0, swxx = 0.0, swxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double w = 1.0 / (sigma[i] * sigma[i]);
    sw += w;
    swx += w * x[i];
    swy += w * y[i];
    swxx += w * x[i] * x[i];
    swxy += w * x[i] * y[i];
  }
  const double det = sw * swxx - swx * swx;
  if (!(std::abs(det) > 0.0)) throw std::invalid_argument("least squares: degenerate abscissae");
  LinearFit fit;
  fit.slope = (sw * swxy - swx * swy) / det;
  fit.intercept = (swxx * swy - swx * swxy) / det;
  fit.slope_std_error = std::sqrt(sw / det);
  return fit;
}

}  // namespace slowfast

#pragma once

// Reference computations that share no code path with the library.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace oracle {

constexpr double kPi = std::numbers::pi;

/// e_k(xi) written out directly (k is 0-based).
inline double dirichlet_mode(int k, double L, double xi) {
  return std::sqrt(2.0 / L) * std::sin((k + 1) * kPi * xi / L);
}

inline double neumann_mode(int k, double L, double xi) {
  return k == 0 ? 1.0 / std::sqrt(L) : std::sqrt(2.0 / L) * std::cos(k * kPi * xi / L);
}

inline double synth(const std::vector<double>& c, double L, double xi, bool dirichlet = true) {
  double s = 0.0;
  for (std::size_t k = 0; k < c.size(); ++k) {
    s += c[k] * (dirichlet ? dirichlet_mode(static_cast<int>(k), L, xi)
                           : neumann_mode(static_cast<int>(k), L, xi));
  }
  return s;
}

/// Adaptive 61-point Gauss-Kronrod integral of fn over [a, b].
inline double integrate(const std::function<double(double)>& fn, double a, double b,
                        double tol = 1e-13) {
  if (a == b) return 0.0;
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(fn, a, b, 15, tol, &err);
}

/// <fn, e_k> on (0, L) by adaptive quadrature.
inline double project(const std::function<double(double)>& fn, int k, double L,
                      bool dirichlet = true) {
  return integrate(
      [&](double xi) {
        return fn(xi) * (dirichlet ? dirichlet_mode(k, L, xi) : neumann_mode(k, L, xi));
      },
      0.0, L);
}

/// int_0^L int_0^{y(xi)} g(xi, x(xi), s) ds dxi by nested adaptive quadrature.
inline double potential(const std::function<double(double, double, double)>& g,
                        const std::vector<double>& x, const std::vector<double>& y, double L) {
  return integrate(
      [&](double xi) {
        const double s1 = synth(x, L, xi);
        const double top = synth(y, L, xi);
        return integrate([&](double s) { return g(xi, s1, s); }, 0.0, top);
      },
      0.0, L, 1e-11);
}

/// exp(t diag(-alpha)) x through Eigen's dense matrix exponential.
inline std::vector<double> dense_semigroup(const std::vector<double>& alpha,
                                           const std::vector<double>& x, double t) {
  const int n = static_cast<int>(alpha.size());
  Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n, n);
  for (int k = 0; k < n; ++k) M(k, k) = -alpha[k] * t;
  const Eigen::MatrixXd E = M.exp();
  Eigen::VectorXd v(n);
  for (int k = 0; k < n; ++k) v(k) = x[k];
  const Eigen::VectorXd out = E * v;
  return std::vector<double>(out.data(), out.data() + n);
}

/// Stationary mean of dv = [-(alpha_k + a) v + s_k] dt + dw per mode.
inline double ou_stationary_mean(double alpha, double a, double source) {
  return source / (alpha + a);
}

inline double ou_stationary_variance(double alpha, double a) { return 1.0 / (2.0 * (alpha + a)); }

/// <1, e_k> for the Dirichlet basis on (0, L).
inline double dirichlet_unit_coefficient(int k, double L) {
  const double n = k + 1;
  return std::sqrt(2.0 / L) * L * (1.0 - std::cos(n * kPi)) / (n * kPi);
}

}  // namespace oracle

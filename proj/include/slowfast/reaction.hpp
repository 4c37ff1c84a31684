#pragma once

#include <array>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "slowfast/spectral.hpp"

namespace slowfast {

/// Catalog of scalar reaction terms r(xi, s1, s2) with certified derivative
/// bounds. s1 is the slow argument, s2 the fast one.
enum class TermKind {
  Constant,      // c
  LinearSlow,    // b s1
  LinearFast,    // b s2
  LinearDamped,  // -a s2
  TanhSlow,      // b tanh(s s1)
  SinSlow,       // b sin(s1)
  SinFast,       // b sin(s2)
  TanhFast,      // b tanh(s2)
  TanhProduct,   // b tanh(s1) tanh(s2)
  SinSum,        // b sin(s1 + s2)
  SinProduct,    // b sin(s1) s2      (unbounded d/ds1: evaluation only)
  SineSource,    // c sin(n pi xi / L)
};

struct ReactionTerm {
  TermKind kind = TermKind::Constant;
  std::array<double, 2> params{0.0, 0.0};

  double value(double xi, double length, double s1, double s2) const;
  double d_slow(double xi, double length, double s1, double s2) const;
  double d_fast(double xi, double length, double s1, double s2) const;
  double bound_d_slow() const;
  double bound_d_fast() const;
  bool depends_on_slow() const;
  bool depends_on_fast() const;
  bool is_affine() const;
  /// Closed-form int_0^y r(xi, s1, s) ds exists for this term.
  bool has_antiderivative() const;
  double antiderivative(double xi, double length, double s1, double y) const;

  std::string to_string() const;
  bool operator==(const ReactionTerm&) const = default;
};

/// Affine part c0 + c_slow s1 + c_fast s2 of a reaction function.
struct AffinePart {
  double constant = 0.0;
  double slow = 0.0;
  double fast = 0.0;
};

/// A sum of catalog terms, e.g. "linear_damped(a=0.5) + tanh_slow(b=0.2)".
///
/// Its Nemytskii operator is evaluated as an exact coefficient-space map for
/// the affine part plus a pseudo-spectral (synthesize, pointwise, analyze)
/// evaluation of the remaining terms.
class ReactionFunction {
 public:
  ReactionFunction() = default;
  explicit ReactionFunction(std::vector<ReactionTerm> terms);

  /// Throws std::invalid_argument on unknown terms or parameters.
  static ReactionFunction parse(std::string_view text);
  std::string to_string() const;

  const std::vector<ReactionTerm>& terms() const { return terms_; }
  const AffinePart& affine() const { return affine_; }
  const std::vector<ReactionTerm>& nonlinear_terms() const { return nonlinear_; }
  bool is_affine() const { return nonlinear_.empty(); }
  bool depends_on_slow() const;
  bool depends_on_fast() const;

  double value(double xi, double length, double s1, double s2) const;
  double d_slow(double xi, double length, double s1, double s2) const;
  double d_fast(double xi, double length, double s1, double s2) const;
  double bound_d_slow() const;
  double bound_d_fast() const;
  /// max of the two partial bounds: |F(x1,y1) - F(x2,y2)| <= L (|dx| + |dy|).
  double lipschitz() const;

  /// int_0^y r(xi, s1, s) ds; analytic where the catalog has it, otherwise
  /// 16-point Gauss-Legendre.
  double antiderivative_fast(double xi, double length, double s1, double y) const;

  /// The Nemytskii operator (x, y) -> r(., x(.), y(.)) projected on the basis.
  Field nemytskii(const OperatorSpectrum& S, const Field& x, const Field& y) const;

  /// <d_slow r(., x, y) k, h>_H.
  double slow_derivative_pairing(const OperatorSpectrum& S, const Field& x, const Field& y,
                                 const Field& k, const Field& h) const;

  bool operator==(const ReactionFunction& other) const { return terms_ == other.terms_; }

 private:
  std::vector<ReactionTerm> terms_;
  std::vector<ReactionTerm> nonlinear_;
  AffinePart affine_;
};

/// Validated pair (f, g) bound to the fast operator B.
class ReactionSystem {
 public:
  /// Throws HypothesisViolation when a derivative bound is infinite or when
  /// L_g = sup |dg/ds2| >= lambda.
  static ReactionSystem make(ReactionFunction f, ReactionFunction g,
                             const OperatorSpectrum& fast_spectrum);

  const ReactionFunction& f() const { return f_; }
  const ReactionFunction& g() const { return g_; }
  const OperatorSpectrum& spectrum() const { return spectrum_; }
  double lipschitz_f() const { return lipschitz_f_; }
  double lipschitz_g() const { return lipschitz_g_; }
  /// delta = (lambda - L_g) / 2.
  double dissipativity_gap() const { return delta_; }

 private:
  ReactionSystem(ReactionFunction f, ReactionFunction g, OperatorSpectrum S);

  ReactionFunction f_;
  ReactionFunction g_;
  OperatorSpectrum spectrum_;
  double lipschitz_f_ = 0.0;
  double lipschitz_g_ = 0.0;
  double delta_ = 0.0;
};

Field eval_F(const ReactionSystem& r, const Field& x, const Field& y);
Field eval_G(const ReactionSystem& r, const Field& x, const Field& y);

/// U(x, y) = int_0^L int_0^{y(xi)} g(xi, x(xi), s) ds dxi.
double potential_U(const ReactionSystem& r, const Field& x, const Field& y);

/// (<G(x,y), k>, central difference of U(x, y + tau k)).
std::pair<double, double> potential_gradient_check(const ReactionSystem& r, const Field& x,
                                                   const Field& y, const Field& k,
                                                   double tau = 1e-4);

/// <U_x(x, y), k> = int_0^1 <G_x(x, theta y) k, y> dtheta (8-point Gauss in theta).
double potential_x_derivative(const ReactionSystem& r, const Field& x, const Field& y,
                              const Field& k);

}  // namespace slowfast

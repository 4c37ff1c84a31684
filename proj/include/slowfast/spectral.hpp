#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace slowfast {

enum class BoundaryKind { Dirichlet, ShiftedNeumann };

std::string to_string(BoundaryKind kind);
BoundaryKind boundary_from_string(const std::string& name);

/// Constant-coefficient operator D * d^2/dxi^2 - m on (0, L).
struct OperatorParams {
  BoundaryKind boundary = BoundaryKind::Dirichlet;
  double diffusivity = 1.0;
  double mass = 0.0;

  bool operator==(const OperatorParams&) const = default;
};

/// Identifies the eigenfunction family {e_k}. Two spectra with equal BasisId
/// share eigenfunctions even when their eigenvalues differ.
struct BasisId {
  BoundaryKind boundary = BoundaryKind::Dirichlet;
  double length = 0.0;
  int n_modes = 0;

  bool operator==(const BasisId&) const = default;
};

/// Element of L^2(0, L) stored as coefficients against an orthonormal
/// eigenbasis.
class Field {
 public:
  Field() = default;
  Field(BasisId basis, std::vector<double> coeffs);

  static Field zeros(const BasisId& basis);
  static Field unit(const BasisId& basis, int k);

  const BasisId& basis() const { return basis_; }
  int size() const { return static_cast<int>(coeffs_.size()); }
  std::span<const double> coeffs() const { return coeffs_; }
  std::span<double> coeffs() { return coeffs_; }
  double operator[](int k) const { return coeffs_[k]; }
  double& operator[](int k) { return coeffs_[k]; }

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(double s);

  bool operator==(const Field&) const = default;

 private:
  BasisId basis_;
  std::vector<double> coeffs_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);

/// Throws std::invalid_argument unless both fields live on the same basis.
void require_same_basis(const Field& a, const Field& b);

double inner(const Field& a, const Field& b);
double norm(const Field& x);

/// Nodal quadrature grid tied to an eigenbasis. `values` at node j of mode k
/// are stored row-major as basis[j * n_modes + k].
struct NodalGrid {
  BasisId basis;
  std::vector<double> nodes;
  std::vector<double> weights;
  std::vector<double> basis_values;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
};

class OperatorSpectrum {
 public:
  static constexpr double kDefaultTraceExponent = 0.51;

  /// Analytic eigenpairs. grid_points = 0 selects the default 2N + 1 nodes.
  /// Throws HypothesisViolation when min eigenvalue <= 0.
  static OperatorSpectrum build(double length, const OperatorParams& op, int n_modes,
                                int grid_points = 0,
                                double trace_exponent = kDefaultTraceExponent);

  double length() const { return basis_.length; }
  BoundaryKind boundary() const { return basis_.boundary; }
  const OperatorParams& params() const { return params_; }
  const BasisId& basis() const { return basis_; }
  int n_modes() const { return basis_.n_modes; }
  std::span<const double> eigenvalues() const { return eigenvalues_; }
  double eigenvalue(int k) const { return eigenvalues_[k]; }
  double spectral_gap() const { return spectral_gap_; }
  double trace_exponent() const { return trace_exponent_; }
  const NodalGrid& grid() const { return *grid_; }

  /// Same eigenfunctions, eigenvalues shifted by `delta`. Used to absorb a
  /// linear reaction term into the exactly-integrated part.
  OperatorSpectrum shifted(double delta) const;

  /// e_k(xi) for 0-based mode index k.
  double eigenfunction(int k, double xi) const;

  /// <1, e_k>_H computed analytically.
  double unit_coefficient(int k) const;

  /// Coefficients of the constant function c.
  Field constant_field(double c) const;

  Field zeros() const { return Field::zeros(basis_); }
  /// Pads with zeros; throws std::invalid_argument when given more than N entries.
  Field make_field(std::vector<double> coeffs) const;

 private:
  OperatorSpectrum() = default;

  OperatorParams params_;
  BasisId basis_;
  std::vector<double> eigenvalues_;
  double spectral_gap_ = 0.0;
  double trace_exponent_ = kDefaultTraceExponent;
  std::shared_ptr<const NodalGrid> grid_;
};

Field apply_semigroup(const OperatorSpectrum& S, const Field& x, double t);

/// (sum_k exp(-2 alpha_k t))^{1/2}, the truncated Hilbert-Schmidt norm of e^{tB}.
double hilbert_schmidt_decay(const OperatorSpectrum& S, double t);

/// sum_k exp(-alpha_k t).
double trace_sum(const OperatorSpectrum& S, double t);

/// trace_sum(t) / ((t ^ 1)^{-gamma} e^{-lambda t}); bounded in t when the
/// stored trace exponent is admissible.
double trace_bound_ratio(const OperatorSpectrum& S, double t);

/// hilbert_schmidt_decay(t) / ((t ^ 1)^{-gamma/2} e^{-lambda t}).
double hilbert_schmidt_bound_ratio(const OperatorSpectrum& S, double t);

/// Zeroes coefficients with (1-based) index > n.
Field project(const Field& x, int n);

/// (sum_k (1 + alpha_k)^a x_k^2)^{1/2}, a in [0, 2].
double sobolev_norm(const OperatorSpectrum& S, const Field& x, double a);

std::vector<double> synthesize(const Field& x, const NodalGrid& grid);
Field analyze(std::span<const double> values, const NodalGrid& grid);

/// Evaluates sum_k x_k e_k(xi) at arbitrary points.
double evaluate_at(const OperatorSpectrum& S, const Field& x, double xi);

}  // namespace slowfast

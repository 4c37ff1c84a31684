#include "slowfast/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "slowfast/errors.hpp"

namespace slowfast {

namespace {

constexpr double kPi = std::numbers::pi;

double basis_function(const BasisId& b, int k, double xi) {
  const double L = b.length;
  if (b.boundary == BoundaryKind::Dirichlet) {
    return std::sqrt(2.0 / L) * std::sin((k + 1) * kPi * xi / L);
  }
  if (k == 0) return 1.0 / std::sqrt(L);
  return std::sqrt(2.0 / L) * std::cos(k * kPi * xi / L);
}

// Dirichlet: nodes j L / (M + 1), j = 1..M (discrete sine orthogonality).
// Neumann: midpoints (j + 1/2) L / M (discrete cosine orthogonality).
// Both reproduce band-limited fields exactly when M >= N.
std::shared_ptr<const NodalGrid> make_grid(const BasisId& basis, int n_nodes) {
  auto grid = std::make_shared<NodalGrid>();
  grid->basis = basis;
  grid->nodes.resize(n_nodes);
  grid->weights.resize(n_nodes);
  const double L = basis.length;
  for (int j = 0; j < n_nodes; ++j) {
    if (basis.boundary == BoundaryKind::Dirichlet) {
      grid->nodes[j] = (j + 1) * L / (n_nodes + 1);
      grid->weights[j] = L / (n_nodes + 1);
    } else {
      grid->nodes[j] = (j + 0.5) * L / n_nodes;
      grid->weights[j] = L / n_nodes;
    }
  }
  const int N = basis.n_modes;
  grid->basis_values.resize(static_cast<std::size_t>(n_nodes) * N);
  for (int j = 0; j < n_nodes; ++j) {
    for (int k = 0; k < N; ++k) {
      grid->basis_values[static_cast<std::size_t>(j) * N + k] =
          basis_function(basis, k, grid->nodes[j]);
    }
  }
  return grid;
}

}  // namespace

std::string to_string(BoundaryKind kind) {
  return kind == BoundaryKind::Dirichlet ? "dirichlet" : "shifted_neumann";
}

BoundaryKind boundary_from_string(const std::string& name) {
  if (name == "dirichlet") return BoundaryKind::Dirichlet;
  if (name == "shifted_neumann") return BoundaryKind::ShiftedNeumann;
  throw std::invalid_argument("unknown boundary kind '" + name +
                              "' (expected dirichlet or shifted_neumann)");
}

// ---------------------------------------------------------------------------
// Field

Field::Field(BasisId basis, std::vector<double> coeffs)
    : basis_(basis), coeffs_(std::move(coeffs)) {
  if (static_cast<int>(coeffs_.size()) != basis_.n_modes) {
    throw std::invalid_argument("field has " + std::to_string(coeffs_.size()) +
                                " coefficients, basis expects " +
                                std::to_string(basis_.n_modes));
  }
}

Field Field::zeros(const BasisId& basis) {
  return Field(basis, std::vector<double>(basis.n_modes, 0.0));
}

Field Field::unit(const BasisId& basis, int k) {
  Field e = zeros(basis);
  e.coeffs_.at(k) = 1.0;
  return e;
}

void require_same_basis(const Field& a, const Field& b) {
  if (!(a.basis() == b.basis())) {
    throw std::invalid_argument("fields live on different bases");
  }
}

Field& Field::operator+=(const Field& other) {
  require_same_basis(*this, other);
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] += other.coeffs_[k];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  require_same_basis(*this, other);
  for (std::size_t k = 0; k < coeffs_.size(); ++k) coeffs_[k] -= other.coeffs_[k];
  return *this;
}

Field& Field::operator*=(double s) {
  for (double& c : coeffs_) c *= s;
  return *this;
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }

double inner(const Field& a, const Field& b) {
  require_same_basis(a, b);
  double s = 0.0;
  for (int k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

double norm(const Field& x) { return std::sqrt(inner(x, x)); }

// ---------------------------------------------------------------------------
// OperatorSpectrum

OperatorSpectrum OperatorSpectrum::build(double length, const OperatorParams& op, int n_modes,
                                         int grid_points, double trace_exponent) {
  if (!(length > 0.0)) throw std::invalid_argument("domain length must be positive");
  if (n_modes < 1) throw std::invalid_argument("need at least one mode");
  if (!(op.diffusivity > 0.0)) throw std::invalid_argument("diffusivity must be positive");
  if (!(trace_exponent > 0.0 && trace_exponent < 1.0)) {
    throw std::invalid_argument("trace exponent must lie in (0, 1)");
  }
  if (op.boundary == BoundaryKind::ShiftedNeumann && !(op.mass > 0.0)) {
    throw HypothesisViolation("positive spectral gap",
                              "shifted Neumann operator needs mass > 0, got " +
                                  std::to_string(op.mass));
  }
  if (grid_points == 0) grid_points = 2 * n_modes + 1;
  if (grid_points < 2 * n_modes + 1) {
    throw std::invalid_argument("nodal grid needs at least 2N + 1 = " +
                                std::to_string(2 * n_modes + 1) + " points");
  }

  OperatorSpectrum S;
  S.params_ = op;
  S.basis_ = BasisId{op.boundary, length, n_modes};
  S.trace_exponent_ = trace_exponent;
  S.eigenvalues_.resize(n_modes);
  for (int k = 0; k < n_modes; ++k) {
    const double wave =
        op.boundary == BoundaryKind::Dirichlet ? (k + 1) * kPi / length : k * kPi / length;
    S.eigenvalues_[k] = op.diffusivity * wave * wave + op.mass;
  }
  S.spectral_gap_ = *std::min_element(S.eigenvalues_.begin(), S.eigenvalues_.end());
  if (!(S.spectral_gap_ > 0.0)) {
    throw HypothesisViolation("positive spectral gap",
                              "smallest eigenvalue is " + std::to_string(S.spectral_gap_));
  }
  S.grid_ = make_grid(S.basis_, grid_points);
  return S;
}

OperatorSpectrum OperatorSpectrum::shifted(double delta) const {
  OperatorSpectrum S = *this;
  S.params_.mass += delta;
  for (double& a : S.eigenvalues_) a += delta;
  S.spectral_gap_ += delta;
  if (!(S.spectral_gap_ > 0.0)) {
    throw HypothesisViolation("positive spectral gap", "shifted spectrum has smallest eigenvalue " +
                                                           std::to_string(S.spectral_gap_));
  }
  return S;
}

double OperatorSpectrum::eigenfunction(int k, double xi) const {
  return basis_function(basis_, k, xi);
}

double OperatorSpectrum::unit_coefficient(int k) const {
  const double L = basis_.length;
  if (basis_.boundary == BoundaryKind::Dirichlet) {
    const int n = k + 1;
    return std::sqrt(2.0 / L) * L * (1.0 - std::cos(n * kPi)) / (n * kPi);
  }
  return k == 0 ? std::sqrt(L) : 0.0;
}

Field OperatorSpectrum::constant_field(double c) const {
  Field out = zeros();
  for (int k = 0; k < n_modes(); ++k) out[k] = c * unit_coefficient(k);
  return out;
}

Field OperatorSpectrum::make_field(std::vector<double> coeffs) const {
  if (static_cast<int>(coeffs.size()) > n_modes()) {
    throw std::invalid_argument("field has " + std::to_string(coeffs.size()) +
                                " coefficients, basis holds " + std::to_string(n_modes()));
  }
  coeffs.resize(n_modes(), 0.0);
  return Field(basis_, std::move(coeffs));
}

// ---------------------------------------------------------------------------
// Operations

namespace {
void require_conforms(const OperatorSpectrum& S, const Field& x) {
  if (!(x.basis() == S.basis())) throw std::invalid_argument("field does not conform to spectrum");
}
}  // namespace

Field apply_semigroup(const OperatorSpectrum& S, const Field& x, double t) {
  require_conforms(S, x);
  if (t < 0.0) throw std::invalid_argument("semigroup time must be nonnegative");
  Field out = x;
  if (t == 0.0) return out;
  for (int k = 0; k < out.size(); ++k) out[k] *= std::exp(-S.eigenvalue(k) * t);
  return out;
}

double hilbert_schmidt_decay(const OperatorSpectrum& S, double t) {
  if (!(t > 0.0)) throw std::invalid_argument("Hilbert-Schmidt decay needs t > 0");
  double s = 0.0;
  for (double a : S.eigenvalues()) s += std::exp(-2.0 * a * t);
  return std::sqrt(s);
}

double trace_sum(const OperatorSpectrum& S, double t) {
  double s = 0.0;
  for (double a : S.eigenvalues()) s += std::exp(-a * t);
  return s;
}

double trace_bound_ratio(const OperatorSpectrum& S, double t) {
  const double envelope =
      std::pow(std::min(t, 1.0), -S.trace_exponent()) * std::exp(-S.spectral_gap() * t);
  return trace_sum(S, t) / envelope;
}

double hilbert_schmidt_bound_ratio(const OperatorSpectrum& S, double t) {
  const double envelope =
      std::pow(std::min(t, 1.0), -0.5 * S.trace_exponent()) * std::exp(-S.spectral_gap() * t);
  return hilbert_schmidt_decay(S, t) / envelope;
}

Field project(const Field& x, int n) {
  if (n < 1 || n > x.size()) {
    throw std::out_of_range("projection index " + std::to_string(n) + " outside [1, " +
                            std::to_string(x.size()) + "]");
  }
  Field out = x;
  for (int k = n; k < out.size(); ++k) out[k] = 0.0;
  return out;
}

double sobolev_norm(const OperatorSpectrum& S, const Field& x, double a) {
  require_conforms(S, x);
  if (a < 0.0 || a > 2.0) throw std::invalid_argument("Sobolev exponent must lie in [0, 2]");
  double s = 0.0;
  for (int k = 0; k < x.size(); ++k) s += std::pow(1.0 + S.eigenvalue(k), a) * x[k] * x[k];
  return std::sqrt(s);
}

std::vector<double> synthesize(const Field& x, const NodalGrid& grid) {
  if (!(x.basis() == grid.basis)) throw std::invalid_argument("grid/basis mismatch in synthesis");
  const int N = x.size();
  const int M = grid.n_nodes();
  std::vector<double> values(M, 0.0);
  const auto c = x.coeffs();
  for (int j = 0; j < M; ++j) {
    const double* row = &grid.basis_values[static_cast<std::size_t>(j) * N];
    double s = 0.0;
    for (int k = 0; k < N; ++k) s += c[k] * row[k];
    values[j] = s;
  }
  return values;
}

Field analyze(std::span<const double> values, const NodalGrid& grid) {
  const int M = grid.n_nodes();
  if (static_cast<int>(values.size()) != M) {
    throw std::invalid_argument("grid/basis mismatch in analysis: got " +
                                std::to_string(values.size()) + " values for " +
                                std::to_string(M) + " nodes");
  }
  const int N = grid.basis.n_modes;
  Field out = Field::zeros(grid.basis);
  auto c = out.coeffs();
  for (int j = 0; j < M; ++j) {
    const double wv = grid.weights[j] * values[j];
    const double* row = &grid.basis_values[static_cast<std::size_t>(j) * N];
    for (int k = 0; k < N; ++k) c[k] += wv * row[k];
  }
  return out;
}

double evaluate_at(const OperatorSpectrum& S, const Field& x, double xi) {
  require_conforms(S, x);
  double s = 0.0;
  for (int k = 0; k < x.size(); ++k) s += x[k] * S.eigenfunction(k, xi);
  return s;
}

}  // namespace slowfast

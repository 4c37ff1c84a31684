#include "slowfast/reaction.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fmt/format.h>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "slowfast/errors.hpp"

namespace slowfast {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct CatalogEntry {
  std::string_view name;
  TermKind kind;
  std::array<std::string_view, 2> param_names;
  int n_params;
  double second_default;
};

// The first parameter is required; the second (if any) has a default.
constexpr std::array<CatalogEntry, 12> kCatalog{{
    {"constant", TermKind::Constant, {"c", ""}, 1, 0.0},
    {"linear_slow", TermKind::LinearSlow, {"b", ""}, 1, 0.0},
    {"linear_fast", TermKind::LinearFast, {"b", ""}, 1, 0.0},
    {"linear_damped", TermKind::LinearDamped, {"a", ""}, 1, 0.0},
    {"tanh_slow", TermKind::TanhSlow, {"b", "s"}, 2, 1.0},
    {"sin_slow", TermKind::SinSlow, {"b", ""}, 1, 0.0},
    {"sin_fast", TermKind::SinFast, {"b", ""}, 1, 0.0},
    {"tanh_fast", TermKind::TanhFast, {"b", ""}, 1, 0.0},
    {"tanh_product", TermKind::TanhProduct, {"b", ""}, 1, 0.0},
    {"sin_sum", TermKind::SinSum, {"b", ""}, 1, 0.0},
    {"sin_product", TermKind::SinProduct, {"b", ""}, 1, 0.0},
    {"sine_source", TermKind::SineSource, {"c", "n"}, 2, 1.0},
}};

const CatalogEntry& entry_for(TermKind kind) {
  for (const auto& e : kCatalog) {
    if (e.kind == kind) return e;
  }
  throw std::logic_error("term kind missing from catalog");
}

double sech2(double s) {
  const double c = std::cosh(s);
  return 1.0 / (c * c);
}

double log_cosh(double y) {
  const double a = std::abs(y);
  return a + std::log1p(std::exp(-2.0 * a)) - std::numbers::ln2;
}

}  // namespace

// ---------------------------------------------------------------------------
// ReactionTerm

double ReactionTerm::value(double xi, double length, double s1, double s2) const {
  const double p = params[0];
  switch (kind) {
    case TermKind::Constant: return p;
    case TermKind::LinearSlow: return p * s1;
    case TermKind::LinearFast: return p * s2;
    case TermKind::LinearDamped: return -p * s2;
    case TermKind::TanhSlow: return p * std::tanh(params[1] * s1);
    case TermKind::SinSlow: return p * std::sin(s1);
    case TermKind::SinFast: return p * std::sin(s2);
    case TermKind::TanhFast: return p * std::tanh(s2);
    case TermKind::TanhProduct: return p * std::tanh(s1) * std::tanh(s2);
    case TermKind::SinSum: return p * std::sin(s1 + s2);
    case TermKind::SinProduct: return p * std::sin(s1) * s2;
    case TermKind::SineSource:
      return p * std::sin(params[1] * std::numbers::pi * xi / length);
  }
  return 0.0;
}

double ReactionTerm::d_slow(double, double, double s1, double s2) const {
  const double p = params[0];
  switch (kind) {
    case TermKind::LinearSlow: return p;
    case TermKind::TanhSlow: return p * params[1] * sech2(params[1] * s1);
    case TermKind::SinSlow: return p * std::cos(s1);
    case TermKind::TanhProduct: return p * sech2(s1) * std::tanh(s2);
    case TermKind::SinSum: return p * std::cos(s1 + s2);
    case TermKind::SinProduct: return p * std::cos(s1) * s2;
    default: return 0.0;
  }
}

double ReactionTerm::d_fast(double, double, double s1, double s2) const {
  const double p = params[0];
  switch (kind) {
    case TermKind::LinearFast: return p;
    case TermKind::LinearDamped: return -p;
    case TermKind::SinFast: return p * std::cos(s2);
    case TermKind::TanhFast: return p * sech2(s2);
    case TermKind::TanhProduct: return p * std::tanh(s1) * sech2(s2);
    case TermKind::SinSum: return p * std::cos(s1 + s2);
    case TermKind::SinProduct: return p * std::sin(s1);
    default: return 0.0;
  }
}

double ReactionTerm::bound_d_slow() const {
  const double p = std::abs(params[0]);
  switch (kind) {
    case TermKind::LinearSlow:
    case TermKind::SinSlow:
    case TermKind::TanhProduct:
    case TermKind::SinSum: return p;
    case TermKind::TanhSlow: return p * std::abs(params[1]);
    case TermKind::SinProduct: return p == 0.0 ? 0.0 : kInf;
    default: return 0.0;
  }
}

double ReactionTerm::bound_d_fast() const {
  const double p = std::abs(params[0]);
  switch (kind) {
    case TermKind::LinearFast:
    case TermKind::LinearDamped:
    case TermKind::SinFast:
    case TermKind::TanhFast:
    case TermKind::TanhProduct:
    case TermKind::SinSum:
    case TermKind::SinProduct: return p;
    default: return 0.0;
  }
}

bool ReactionTerm::depends_on_slow() const {
  if (params[0] == 0.0) return false;
  switch (kind) {
    case TermKind::LinearSlow:
    case TermKind::SinSlow:
    case TermKind::TanhProduct:
    case TermKind::SinSum:
    case TermKind::SinProduct: return true;
    case TermKind::TanhSlow: return params[1] != 0.0;
    default: return false;
  }
}

bool ReactionTerm::depends_on_fast() const {
  if (params[0] == 0.0) return false;
  switch (kind) {
    case TermKind::LinearFast:
    case TermKind::LinearDamped:
    case TermKind::SinFast:
    case TermKind::TanhFast:
    case TermKind::TanhProduct:
    case TermKind::SinSum:
    case TermKind::SinProduct: return true;
    default: return false;
  }
}

bool ReactionTerm::is_affine() const {
  switch (kind) {
    case TermKind::Constant:
    case TermKind::LinearSlow:
    case TermKind::LinearFast:
    case TermKind::LinearDamped: return true;
    default: return false;
  }
}

bool ReactionTerm::has_antiderivative() const { return kind != TermKind::SinSum; }

double ReactionTerm::antiderivative(double xi, double length, double s1, double y) const {
  const double p = params[0];
  switch (kind) {
    case TermKind::Constant: return p * y;
    case TermKind::LinearSlow: return p * s1 * y;
    case TermKind::LinearFast: return 0.5 * p * y * y;
    case TermKind::LinearDamped: return -0.5 * p * y * y;
    case TermKind::TanhSlow: return p * std::tanh(params[1] * s1) * y;
    case TermKind::SinSlow: return p * std::sin(s1) * y;
    case TermKind::SinFast: return p * (1.0 - std::cos(y));
    case TermKind::TanhFast: return p * log_cosh(y);
    case TermKind::TanhProduct: return p * std::tanh(s1) * log_cosh(y);
    case TermKind::SinProduct: return 0.5 * p * std::sin(s1) * y * y;
    case TermKind::SineSource: return value(xi, length, s1, 0.0) * y;
    case TermKind::SinSum: break;
  }
  throw std::logic_error("term has no closed-form antiderivative");
}

std::string ReactionTerm::to_string() const {
  const CatalogEntry& e = entry_for(kind);
  std::string out = fmt::format("{}({}={}", e.name, e.param_names[0], params[0]);
  if (e.n_params == 2) out += fmt::format(", {}={}", e.param_names[1], params[1]);
  return out + ")";
}

// ---------------------------------------------------------------------------
// ReactionFunction

ReactionFunction::ReactionFunction(std::vector<ReactionTerm> terms) : terms_(std::move(terms)) {
  for (const auto& t : terms_) {
    switch (t.kind) {
      case TermKind::Constant: affine_.constant += t.params[0]; break;
      case TermKind::LinearSlow: affine_.slow += t.params[0]; break;
      case TermKind::LinearFast: affine_.fast += t.params[0]; break;
      case TermKind::LinearDamped: affine_.fast -= t.params[0]; break;
      default: nonlinear_.push_back(t);
    }
  }
}

namespace {

class TermParser {
 public:
  explicit TermParser(std::string_view text) : text_(text) {}

  std::vector<ReactionTerm> parse() {
    std::vector<ReactionTerm> terms;
    skip_ws();
    if (at_end()) return terms;
    const auto save = pos_;
    const std::string_view first = consume_word();
    if (first == "zero" || first == "0") {
      skip_ws();
      if (!at_end()) fail("unexpected text after '" + std::string(first) + "'");
      return terms;
    }
    pos_ = save;
    while (true) {
      terms.push_back(parse_term());
      skip_ws();
      if (at_end()) break;
      expect('+');
    }
    return terms;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("reaction '" + std::string(text_) + "' at offset " +
                                std::to_string(pos_) + ": " + what);
  }

  void expect(char c) {
    skip_ws();
    if (at_end() || text_[pos_] != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string_view consume_word() {
    skip_ws();
    const auto start = pos_;
    while (!at_end() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    return text_.substr(start, pos_ - start);
  }

  double consume_number() {
    skip_ws();
    double v = 0.0;
    const char* first = text_.data() + pos_;
    const char* last = text_.data() + text_.size();
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc()) fail("expected a number");
    pos_ += static_cast<std::size_t>(ptr - first);
    return v;
  }

  ReactionTerm parse_term() {
    const std::string_view name = consume_word();
    const CatalogEntry* entry = nullptr;
    for (const auto& e : kCatalog) {
      if (e.name == name) entry = &e;
    }
    if (entry == nullptr) fail("unknown reaction term '" + std::string(name) + "'");

    ReactionTerm term;
    term.kind = entry->kind;
    term.params = {0.0, entry->second_default};
    std::array<bool, 2> seen{false, false};
    expect('(');
    skip_ws();
    if (!at_end() && text_[pos_] == ')') {
      ++pos_;
    } else {
      while (true) {
        const std::string_view pname = consume_word();
        int idx = -1;
        for (int i = 0; i < entry->n_params; ++i) {
          if (entry->param_names[i] == pname) idx = i;
        }
        if (idx < 0) {
          fail("term '" + std::string(name) + "' has no parameter '" + std::string(pname) + "'");
        }
        if (seen[idx]) fail("parameter '" + std::string(pname) + "' given twice");
        expect('=');
        term.params[idx] = consume_number();
        seen[idx] = true;
        skip_ws();
        if (!at_end() && text_[pos_] == ',') {
          ++pos_;
          continue;
        }
        expect(')');
        break;
      }
    }
    if (!seen[0]) {
      fail("term '" + std::string(name) + "' requires parameter '" +
           std::string(entry->param_names[0]) + "'");
    }
    return term;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

}  // namespace

ReactionFunction ReactionFunction::parse(std::string_view text) {
  return ReactionFunction(TermParser(text).parse());
}

std::string ReactionFunction::to_string() const {
  if (terms_.empty()) return "zero";
  std::string out;
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (i > 0) out += " + ";
    out += terms_[i].to_string();
  }
  return out;
}

bool ReactionFunction::depends_on_slow() const {
  for (const auto& t : terms_) {
    if (t.depends_on_slow()) return true;
  }
  return false;
}

bool ReactionFunction::depends_on_fast() const {
  for (const auto& t : terms_) {
    if (t.depends_on_fast()) return true;
  }
  return false;
}

double ReactionFunction::value(double xi, double length, double s1, double s2) const {
  double s = 0.0;
  for (const auto& t : terms_) s += t.value(xi, length, s1, s2);
  return s;
}

double ReactionFunction::d_slow(double xi, double length, double s1, double s2) const {
  double s = 0.0;
  for (const auto& t : terms_) s += t.d_slow(xi, length, s1, s2);
  return s;
}

double ReactionFunction::d_fast(double xi, double length, double s1, double s2) const {
  double s = 0.0;
  for (const auto& t : terms_) s += t.d_fast(xi, length, s1, s2);
  return s;
}

double ReactionFunction::bound_d_slow() const {
  double s = std::abs(affine_.slow);
  for (const auto& t : nonlinear_) s += t.bound_d_slow();
  return s;
}

double ReactionFunction::bound_d_fast() const {
  // Affine fast terms combine exactly before taking absolute values.
  double s = std::abs(affine_.fast);
  for (const auto& t : nonlinear_) s += t.bound_d_fast();
  return s;
}

double ReactionFunction::lipschitz() const { return std::max(bound_d_slow(), bound_d_fast()); }

double ReactionFunction::antiderivative_fast(double xi, double length, double s1, double y) const {
  double s = 0.0;
  for (const auto& t : terms_) {
    if (t.has_antiderivative()) {
      s += t.antiderivative(xi, length, s1, y);
    } else {
      s += boost::math::quadrature::gauss<double, 16>::integrate(
          [&](double u) { return t.value(xi, length, s1, u); }, 0.0, y);
    }
  }
  return s;
}

Field ReactionFunction::nemytskii(const OperatorSpectrum& S, const Field& x,
                                  const Field& y) const {
  require_same_basis(x, y);
  if (!(x.basis() == S.basis())) throw std::invalid_argument("field does not conform to spectrum");
  const int N = S.n_modes();
  Field out = Field::zeros(S.basis());
  if (!nonlinear_.empty()) {
    const NodalGrid& grid = S.grid();
    const std::vector<double> xv = synthesize(x, grid);
    const std::vector<double> yv = synthesize(y, grid);
    std::vector<double> vals(grid.n_nodes(), 0.0);
    for (int j = 0; j < grid.n_nodes(); ++j) {
      double s = 0.0;
      for (const auto& t : nonlinear_) s += t.value(grid.nodes[j], S.length(), xv[j], yv[j]);
      vals[j] = s;
    }
    out = analyze(vals, grid);
  }
  if (affine_.constant != 0.0) {
    for (int k = 0; k < N; ++k) out[k] += affine_.constant * S.unit_coefficient(k);
  }
  if (affine_.slow != 0.0) {
    for (int k = 0; k < N; ++k) out[k] += affine_.slow * x[k];
  }
  if (affine_.fast != 0.0) {
    for (int k = 0; k < N; ++k) out[k] += affine_.fast * y[k];
  }
  return out;
}

double ReactionFunction::slow_derivative_pairing(const OperatorSpectrum& S, const Field& x,
                                                 const Field& y, const Field& k,
                                                 const Field& h) const {
  double s = affine_.slow * inner(k, h);
  bool slow_nonlinear = false;
  for (const auto& t : nonlinear_) slow_nonlinear = slow_nonlinear || t.depends_on_slow();
  if (!slow_nonlinear) return s;
  const NodalGrid& grid = S.grid();
  const auto xv = synthesize(x, grid), yv = synthesize(y, grid);
  const auto kv = synthesize(k, grid), hv = synthesize(h, grid);
  for (int j = 0; j < grid.n_nodes(); ++j) {
    double d = 0.0;
    for (const auto& t : nonlinear_) d += t.d_slow(grid.nodes[j], S.length(), xv[j], yv[j]);
    s += grid.weights[j] * d * kv[j] * hv[j];
  }
  return s;
}

// ---------------------------------------------------------------------------
// ReactionSystem

ReactionSystem::ReactionSystem(ReactionFunction f, ReactionFunction g, OperatorSpectrum S)
    : f_(std::move(f)), g_(std::move(g)), spectrum_(std::move(S)) {}

ReactionSystem ReactionSystem::make(ReactionFunction f, ReactionFunction g,
                                    const OperatorSpectrum& fast_spectrum) {
  if (!std::isfinite(f.bound_d_slow()) || !std::isfinite(f.bound_d_fast())) {
    throw HypothesisViolation("bounded derivatives of f",
                              "'" + f.to_string() + "' has an unbounded partial derivative");
  }
  if (!std::isfinite(g.bound_d_slow()) || !std::isfinite(g.bound_d_fast())) {
    throw HypothesisViolation("bounded derivatives of g",
                              "'" + g.to_string() + "' has an unbounded partial derivative");
  }
  const double lambda = fast_spectrum.spectral_gap();
  const double Lg = g.bound_d_fast();
  if (!(Lg < lambda)) {
    throw HypothesisViolation(
        "fast dissipativity (L_g < lambda)",
        fmt::format("L_g = sup|dg/ds2| = {} is not below the spectral gap lambda = {} of the fast "
                    "operator",
                    Lg, lambda));
  }
  ReactionSystem r(std::move(f), std::move(g), fast_spectrum);
  r.lipschitz_f_ = r.f_.lipschitz();
  r.lipschitz_g_ = Lg;
  r.delta_ = 0.5 * (lambda - Lg);
  return r;
}

Field eval_F(const ReactionSystem& r, const Field& x, const Field& y) {
  return r.f().nemytskii(r.spectrum(), x, y);
}

Field eval_G(const ReactionSystem& r, const Field& x, const Field& y) {
  return r.g().nemytskii(r.spectrum(), x, y);
}

double potential_U(const ReactionSystem& r, const Field& x, const Field& y) {
  require_same_basis(x, y);
  const OperatorSpectrum& S = r.spectrum();
  const ReactionFunction& g = r.g();
  const AffinePart& a = g.affine();
  double u = 0.0;
  if (a.constant != 0.0) {
    for (int k = 0; k < y.size(); ++k) u += a.constant * S.unit_coefficient(k) * y[k];
  }
  if (a.slow != 0.0) u += a.slow * inner(x, y);
  if (a.fast != 0.0) u += 0.5 * a.fast * inner(y, y);
  if (!g.nonlinear_terms().empty()) {
    const NodalGrid& grid = S.grid();
    const auto xv = synthesize(x, grid), yv = synthesize(y, grid);
    for (int j = 0; j < grid.n_nodes(); ++j) {
      double s = 0.0;
      for (const auto& t : g.nonlinear_terms()) {
        if (t.has_antiderivative()) {
          s += t.antiderivative(grid.nodes[j], S.length(), xv[j], yv[j]);
        } else {
          s += boost::math::quadrature::gauss<double, 16>::integrate(
              [&](double v) { return t.value(grid.nodes[j], S.length(), xv[j], v); }, 0.0, yv[j]);
        }
      }
      u += grid.weights[j] * s;
    }
  }
  return u;
}

std::pair<double, double> potential_gradient_check(const ReactionSystem& r, const Field& x,
                                                   const Field& y, const Field& k, double tau) {
  const double analytic = inner(eval_G(r, x, y), k);
  const double up = potential_U(r, x, y + tau * k);
  const double down = potential_U(r, x, y - tau * k);
  return {analytic, (up - down) / (2.0 * tau)};
}

double potential_x_derivative(const ReactionSystem& r, const Field& x, const Field& y,
                              const Field& k) {
  require_same_basis(x, y);
  require_same_basis(x, k);
  const ReactionFunction& g = r.g();
  double s = g.affine().slow * inner(k, y);
  bool slow_nonlinear = false;
  for (const auto& t : g.nonlinear_terms()) slow_nonlinear = slow_nonlinear || t.depends_on_slow();
  if (!slow_nonlinear) return s;

  const OperatorSpectrum& S = r.spectrum();
  const NodalGrid& grid = S.grid();
  const auto xv = synthesize(x, grid), yv = synthesize(y, grid), kv = synthesize(k, grid);
  for (int j = 0; j < grid.n_nodes(); ++j) {
    const double theta_integral = boost::math::quadrature::gauss<double, 8>::integrate(
        [&](double theta) {
          double d = 0.0;
          for (const auto& t : g.nonlinear_terms()) {
            d += t.d_slow(grid.nodes[j], S.length(), xv[j], theta * yv[j]);
          }
          return d;
        },
        0.0, 1.0);
    s += grid.weights[j] * kv[j] * yv[j] * theta_integral;
  }
  return s;
}

}  // namespace slowfast

#include "slowfast/fast_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "slowfast/errors.hpp"
#include "slowfast/parallel.hpp"

namespace slowfast {

namespace {

ReactionFunction without_fast_linear(const ReactionFunction& g) {
  std::vector<ReactionTerm> kept;
  for (const auto& t : g.terms()) {
    if (t.kind != TermKind::LinearFast && t.kind != TermKind::LinearDamped) kept.push_back(t);
  }
  return ReactionFunction(std::move(kept));
}

double nonlinear_fast_bound(const ReactionFunction& g) {
  double s = 0.0;
  for (const auto& t : g.nonlinear_terms()) s += t.bound_d_fast();
  return s;
}

// Splits [0, T] into whole steps no longer than dt.
std::pair<std::uint64_t, double> step_grid(double T, double dt) {
  if (!(T >= 0.0) || !(dt > 0.0)) throw std::invalid_argument("need T >= 0 and dt > 0");
  if (T == 0.0) return {0, dt};
  const auto n = static_cast<std::uint64_t>(std::ceil(T / dt - 1e-9));
  return {n, T / static_cast<double>(n)};
}

}  // namespace

double max_fast_step(const ReactionSystem& r) {
  const double L = nonlinear_fast_bound(r.g());
  return L > 0.0 ? 0.1 / L : std::numeric_limits<double>::infinity();
}

// ---------------------------------------------------------------------------

FastStepper::FastStepper(const ReactionSystem& r, double dt, double eps)
    : r_(&r),
      effective_(r.spectrum().shifted(-r.g().affine().fast)),
      propagator_(effective_, dt, eps),
      residual_(without_fast_linear(r.g())),
      dt_(dt),
      eps_(eps),
      residual_depends_on_v_(false) {
  if (dt / eps > max_fast_step(r) * (1.0 + 1e-12)) {
    throw std::invalid_argument("fast step " + std::to_string(dt / eps) +
                                " (fast time units) exceeds the admissible " +
                                std::to_string(max_fast_step(r)));
  }
  residual_depends_on_v_ = residual_.depends_on_fast();
}

Field FastStepper::residual_drift(const Field& x, const Field& v) const {
  return residual_.nemytskii(r_->spectrum(), x, v);
}

void FastStepper::step(Field& v, const Field& x, const NoiseStream& ns, std::uint64_t step_index,
                       bool with_noise) const {
  const Field drift = residual_drift(x, v);
  propagator_.step(v.coeffs(), drift.coeffs(), ns, step_index, with_noise);
}

void FastStepper::step_with_drift(Field& v, const Field& drift, const NoiseStream& ns,
                                  std::uint64_t step_index, bool with_noise) const {
  propagator_.step(v.coeffs(), drift.coeffs(), ns, step_index, with_noise);
}

// ---------------------------------------------------------------------------

TrajectorySample simulate_fast(const Field& x_frozen, const Field& y0, const ReactionSystem& r,
                               double T, double dt, const NoiseStream& ns, NoiseSwitch noise,
                               int record_every) {
  if (record_every < 1) throw std::invalid_argument("record_every must be >= 1");
  const auto [n_steps, h] = step_grid(T, dt);
  const FastStepper stepper(r, h);
  const bool with_noise = noise == NoiseSwitch::On;

  TrajectorySample out;
  out.seed = ns.seed();
  out.replica_id = ns.replica_id();
  out.times.push_back(0.0);
  out.states.push_back(y0);

  Field v = y0;
  const bool cache = !stepper.residual_depends_on_v();
  const Field fixed_drift = cache ? stepper.residual_drift(x_frozen, v) : Field();
  for (std::uint64_t n = 0; n < n_steps; ++n) {
    if (cache) {
      stepper.step_with_drift(v, fixed_drift, ns, n, with_noise);
    } else {
      stepper.step(v, x_frozen, ns, n, with_noise);
    }
    if ((n + 1) % static_cast<std::uint64_t>(record_every) == 0 || n + 1 == n_steps) {
      out.times.push_back(static_cast<double>(n + 1) * h);
      out.states.push_back(v);
    }
  }
  return out;
}

Field fast_fixed_point(const Field& x, const ReactionSystem& r, double tol, int max_iter) {
  const FastStepper stepper(r, 1e-3);
  const OperatorSpectrum& eff = stepper.effective_spectrum();
  Field v = eff.zeros();
  for (int it = 0; it < max_iter; ++it) {
    const Field drift = stepper.residual_drift(x, v);
    Field next = drift;
    for (int k = 0; k < next.size(); ++k) next[k] /= eff.eigenvalue(k);
    const double change = norm(next - v);
    v = std::move(next);
    if (change <= tol * (1.0 + norm(v))) return v;
  }
  throw std::runtime_error("fixed-point iteration did not converge");
}

ContractionFit contraction_estimate(const Field& x, const Field& y, const Field& z,
                                    const ReactionSystem& r, double T, double dt,
                                    const NoiseStream& ns) {
  const double initial = norm(y - z);
  if (initial == 0.0) {
    throw DegenerateFit("initial data coincide: contraction rate undefined");
  }
  const auto [n_steps, h] = step_grid(T, dt);
  const FastStepper stepper(r, h);
  Field a = y, b = z;
  std::vector<double> ts, logs;
  const double lo = 0.2 * T, hi = 0.8 * T;
  for (std::uint64_t n = 0; n < n_steps; ++n) {
    stepper.step(a, x, ns, n);
    stepper.step(b, x, ns, n);
    const double t = static_cast<double>(n + 1) * h;
    if (t < lo || t > hi) continue;
    const double d = norm(a - b);
    if (!(d > 1e-13 * initial) || !(d > 1e-300)) {
      throw DegenerateFit("coupled trajectories coincide to round-off before the fit window ends; "
                          "shorten T");
    }
    ts.push_back(t);
    logs.push_back(std::log(d));
  }
  if (ts.size() < 2) throw DegenerateFit("fit window holds fewer than two points");
  const LinearFit fit = least_squares(ts, logs);
  return {-fit.slope, fit.intercept, lo, hi};
}

double slow_sensitivity(const Field& x1, const Field& x2, const Field& y, const ReactionSystem& r,
                        double T, double dt, const NoiseStream& ns) {
  const double dx = norm(x1 - x2);
  if (dx == 0.0) throw std::invalid_argument("slow states coincide");
  const auto [n_steps, h] = step_grid(T, dt);
  const FastStepper stepper(r, h);
  Field a = y, b = y;
  double worst = 0.0;
  for (std::uint64_t n = 0; n < n_steps; ++n) {
    stepper.step(a, x1, ns, n);
    stepper.step(b, x2, ns, n);
    worst = std::max(worst, norm(a - b));
  }
  return worst / dx;
}

// ---------------------------------------------------------------------------

std::vector<MomentRow> moment_profile(const Field& x, const Field& y0, const ReactionSystem& r,
                                      int p, double T, double dt, int replicas,
                                      const NoiseStream& ns, int record_every) {
  if (p != 1 && p != 2 && p != 4) throw std::invalid_argument("moment order must be 1, 2 or 4");
  if (replicas < 2) throw std::invalid_argument("need at least two replicas");
  const auto [n_steps, h] = step_grid(T, dt);
  const FastStepper stepper(r, h);
  const auto every = static_cast<std::uint64_t>(record_every);
  const std::size_t n_rows = n_steps / every + 1;
  std::vector<std::vector<double>> values(n_rows, std::vector<double>(replicas));

  const bool cache = !stepper.residual_depends_on_v();
  const Field fixed_drift = cache ? stepper.residual_drift(x, y0) : Field();
  parallel_for(static_cast<std::size_t>(replicas), [&](std::size_t rep) {
    const NoiseStream stream = ns.for_replica(rep);
    Field v = y0;
    values[0][rep] = std::pow(norm(v), p);
    for (std::uint64_t n = 0; n < n_steps; ++n) {
      if (cache) {
        stepper.step_with_drift(v, fixed_drift, stream, n);
      } else {
        stepper.step(v, x, stream, n);
      }
      if ((n + 1) % every == 0) values[(n + 1) / every][rep] = std::pow(norm(v), p);
    }
  });

  std::vector<MomentRow> rows(n_rows);
  for (std::size_t i = 0; i < n_rows; ++i) {
    const Estimate e = iid_mean(values[i]);
    rows[i] = {static_cast<double>(i * every) * h, e.value, e.std_error};
  }
  return rows;
}

double moment_envelope(double t, int p, double delta, double x_norm, double y_norm) {
  return std::exp(-delta * p * t) * std::pow(y_norm, p) + std::pow(x_norm, p) + 1.0;
}

double fit_moment_constant(const std::vector<MomentRow>& rows, int p, double delta, double x_norm,
                           double y_norm) {
  double c = 0.0;
  for (const auto& row : rows) {
    c = std::max(c, row.moment / moment_envelope(row.t, p, delta, x_norm, y_norm));
  }
  return c;
}

bool moment_envelope_holds(const std::vector<MomentRow>& rows, int p, double delta, double x_norm,
                           double y_norm, double c, double slack) {
  for (const auto& row : rows) {
    if (row.moment > (1.0 + slack) * c * moment_envelope(row.t, p, delta, x_norm, y_norm)) {
      return false;
    }
  }
  return true;
}

// ---------------------------------------------------------------------------

Functional Functional::linear(Field h) {
  Functional f;
  f.kind = Kind::Linear;
  f.h = std::move(h);
  return f;
}

Functional Functional::norm_of() {
  Functional f;
  f.kind = Kind::Norm;
  return f;
}

Functional Functional::clipped_linear(Field h, double clip) {
  if (!(clip > 0.0)) throw std::invalid_argument("clip bound must be positive");
  Functional f;
  f.kind = Kind::ClippedLinear;
  f.h = std::move(h);
  f.clip = clip;
  return f;
}

double Functional::operator()(const Field& y) const {
  switch (kind) {
    case Kind::Linear: return inner(y, h);
    case Kind::Norm: return norm(y);
    case Kind::ClippedLinear: return std::clamp(inner(y, h), -clip, clip);
  }
  return 0.0;
}

double Functional::lipschitz() const { return kind == Kind::Norm ? 1.0 : norm(h); }

Estimate semigroup_expectation(const Functional& phi, const Field& x, const Field& y, double t,
                               double dt, int replicas, const ReactionSystem& r,
                               const NoiseStream& ns) {
  if (t == 0.0) return {phi(y), 0.0};
  if (replicas < 2) throw std::invalid_argument("need at least two replicas");
  std::vector<double> values(replicas);
  parallel_for(static_cast<std::size_t>(replicas), [&](std::size_t rep) {
    const TrajectorySample path = simulate_fast(x, y, r, t, dt, ns.for_replica(rep),
                                                NoiseSwitch::On, std::numeric_limits<int>::max());
    values[rep] = phi(path.states.back());
  });
  return iid_mean(values);
}

Estimate semigroup_difference(const Functional& phi, const Field& x, const Field& y,
                              const Field& z, double t, double dt, int replicas,
                              const ReactionSystem& r, const NoiseStream& ns) {
  if (t == 0.0) return {phi(y) - phi(z), 0.0};
  if (replicas < 2) throw std::invalid_argument("need at least two replicas");
  std::vector<double> values(replicas);
  parallel_for(static_cast<std::size_t>(replicas), [&](std::size_t rep) {
    const NoiseStream stream = ns.for_replica(rep);
    const int every = std::numeric_limits<int>::max();
    const auto a = simulate_fast(x, y, r, t, dt, stream, NoiseSwitch::On, every);
    const auto b = simulate_fast(x, z, r, t, dt, stream, NoiseSwitch::On, every);
    values[rep] = phi(a.states.back()) - phi(b.states.back());
  });
  return iid_mean(values);
}

}  // namespace slowfast

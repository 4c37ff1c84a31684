#include "slowfast/multiscale.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <ostream>
#include <stdexcept>

#include "slowfast/fast_dynamics.hpp"
#include "slowfast/parallel.hpp"

namespace slowfast {

void SimConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(fmt::format("{} must be positive and finite (got {})", name, v));
    }
  };
  positive(eps, "eps");
  positive(T, "T");
  positive(dt_slow, "dt_slow");
  positive(dt_fast, "dt_fast");
  positive(eta, "eta");
  if (n_modes < 1) throw std::invalid_argument("n_modes must be >= 1");
  if (replicas < 1) throw std::invalid_argument("replicas must be >= 1");
}

std::uint64_t SimConfig::macro_steps() const {
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(std::ceil(T / dt_slow - 1e-9)));
}

double SimConfig::macro_step() const { return T / static_cast<double>(macro_steps()); }

std::uint64_t SimConfig::micro_steps() const {
  const double n = std::ceil(macro_step() / (dt_fast * eps) - 1e-9);
  return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(n));
}

namespace {

// Exponential Euler for the slow equation with the slow-linear part of f
// moved into the operator: rates a_k = alpha_k - c_slow.
class SlowStepper {
 public:
  SlowStepper(const OperatorSpectrum& A, const ReactionSystem& r, double h)
      : c_slow_(r.f().affine().slow) {
    if (!(A.basis() == r.spectrum().basis())) {
      throw std::invalid_argument(
          "slow and fast operators must share eigenfunctions (same boundary, length and modes)");
    }
    const int N = A.n_modes();
    decay_.resize(N);
    gain_.resize(N);
    for (int k = 0; k < N; ++k) {
      const double a = A.eigenvalue(k) - c_slow_;
      decay_[k] = std::exp(-a * h);
      gain_[k] = a == 0.0 ? h : -std::expm1(-a * h) / a;
    }
  }

  void step(Field& u, const Field& drift) const {
    for (int k = 0; k < u.size(); ++k) {
      const double residual = drift[k] - c_slow_ * u[k];
      u[k] = decay_[k] * u[k] + gain_[k] * residual;
    }
  }

 private:
  double c_slow_;
  std::vector<double> decay_;
  std::vector<double> gain_;
};

void require_finite(const Field& x, const char* name) {
  for (double c : x.coeffs()) {
    if (!std::isfinite(c)) throw std::invalid_argument(std::string(name) + " has non-finite coefficients");
  }
}

}  // namespace

void run_coupled(const Field& x0, const Field& y0, const OperatorSpectrum& slow_spectrum,
                 const ReactionSystem& r, const SimConfig& cfg, const NoiseStream& ns,
                 const CoupledObserver& observer) {
  cfg.validate();
  const OperatorSpectrum& B = r.spectrum();
  if (!(x0.basis() == B.basis()) || !(y0.basis() == B.basis())) {
    throw std::invalid_argument("initial data must live on the system basis");
  }
  require_finite(x0, "x0");
  require_finite(y0, "y0");

  const std::uint64_t n_macro = cfg.macro_steps();
  const std::uint64_t n_micro = cfg.micro_steps();
  const double h = cfg.macro_step();
  const SlowStepper slow(slow_spectrum, r, h);
  const FastStepper fast(r, h / static_cast<double>(n_micro), cfg.eps);
  const bool fast_free = !r.f().depends_on_fast();
  const bool cache_g = !fast.residual_depends_on_v();
  const double inv_micro = 1.0 / static_cast<double>(n_micro);
  const Field zero = B.zeros();

  Field u = x0, v = y0;
  Field drift = zero;
  std::uint64_t micro = 0;
  for (std::uint64_t n = 0; n < n_macro; ++n) {
    const Field g_drift = cache_g ? fast.residual_drift(u, v) : Field();
    if (fast_free) {
      drift = eval_F(r, u, zero);
    } else {
      drift = zero;
    }
    for (std::uint64_t m = 0; m < n_micro; ++m, ++micro) {
      if (!fast_free) drift += eval_F(r, u, v);
      if (cache_g) {
        fast.step_with_drift(v, g_drift, ns, micro);
      } else {
        fast.step(v, u, ns, micro);
      }
    }
    if (!fast_free) drift *= inv_micro;
    slow.step(u, drift);
    observer(n, u, v, drift);
  }
}

CoupledPath simulate_coupled(const Field& x0, const Field& y0, const OperatorSpectrum& slow_spectrum,
                             const ReactionSystem& r, const SimConfig& cfg,
                             const NoiseStream& ns) {
  CoupledPath path;
  path.config = cfg;
  path.replica_id = ns.replica_id();
  const double h = cfg.macro_step();
  path.times.push_back(0.0);
  path.u_states.push_back(x0);
  path.v_states.push_back(y0);
  run_coupled(x0, y0, slow_spectrum, r, cfg, ns,
              [&](std::uint64_t n, const Field& u, const Field& v, const Field& drift) {
                path.times.push_back(static_cast<double>(n + 1) * h);
                path.u_states.push_back(u);
                path.v_states.push_back(v);
                path.slow_drift.push_back(drift);
              });
  return path;
}

// ---------------------------------------------------------------------------

ClosedFormDrift::ClosedFormDrift(const ReactionSystem& r)
    : r_(&r), fast_free_(!r.f().depends_on_fast()) {
  if (!supports(r)) {
    throw std::invalid_argument(
        "no closed-form averaged drift: needs f independent of the fast argument, or affine g with "
        "f affine in the fast argument");
  }
}

bool ClosedFormDrift::supports(const ReactionSystem& r) {
  if (!r.f().depends_on_fast()) return true;
  if (!r.g().is_affine()) return false;
  for (const auto& t : r.f().nonlinear_terms()) {
    if (t.depends_on_fast()) return false;
  }
  return true;
}

Field ClosedFormDrift::gaussian_mean(const Field& x) const {
  const OperatorSpectrum& S = r_->spectrum();
  const AffinePart& a = r_->g().affine();
  Field m = S.zeros();
  for (int k = 0; k < m.size(); ++k) {
    m[k] = (a.constant * S.unit_coefficient(k) + a.slow * x[k]) / (S.eigenvalue(k) - a.fast);
  }
  return m;
}

std::vector<double> ClosedFormDrift::gaussian_variance() const {
  const OperatorSpectrum& S = r_->spectrum();
  std::vector<double> var(S.n_modes());
  for (int k = 0; k < S.n_modes(); ++k) {
    var[k] = 1.0 / (2.0 * (S.eigenvalue(k) - r_->g().affine().fast));
  }
  return var;
}

AveragedDrift ClosedFormDrift::evaluate(const Field& x) const {
  AveragedDrift out;
  out.x = x;
  out.value = eval_F(*r_, x, fast_free_ ? r_->spectrum().zeros() : gaussian_mean(x));
  out.std_error.assign(x.size(), 0.0);
  return out;
}

MonteCarloDrift::MonteCarloDrift(const ReactionSystem& r, MeasureConfig cfg, NoiseStream ns)
    : r_(&r), cfg_(std::move(cfg)), ns_(std::move(ns)) {}

AveragedDrift MonteCarloDrift::evaluate(const Field& x) const {
  return averaged_drift(x, *r_, cfg_, ns_);
}

std::size_t MonteCarloDrift::budget() const {
  if (cfg_.estimator == Provenance::PcnGibbs) return static_cast<std::size_t>(cfg_.pcn.n_samples);
  return static_cast<std::size_t>(
      std::llround(cfg_.ergodic.T_sample / cfg_.ergodic.dt) / cfg_.ergodic.thin);
}

CachedDrift::CachedDrift(const DriftEvaluator& inner, double rel_tol)
    : inner_(&inner), rel_tol_(rel_tol) {}

AveragedDrift CachedDrift::evaluate(const Field& x) const {
  const double tol = rel_tol_ * (1.0 + norm(x));
  for (const auto& entry : cache_) {
    if (norm(entry.x - x) <= tol) return entry;
  }
  ++evaluations_;
  cache_.push_back(inner_->evaluate(x));
  return cache_.back();
}

std::unique_ptr<DriftEvaluator> make_drift_evaluator(const ReactionSystem& r,
                                                      const MeasureConfig& cfg,
                                                      const NoiseStream& ns) {
  if (ClosedFormDrift::supports(r)) return std::make_unique<ClosedFormDrift>(r);
  return std::make_unique<MonteCarloDrift>(r, cfg, ns);
}

AveragedPath solve_averaged(const Field& x0, const OperatorSpectrum& slow_spectrum,
                            const ReactionSystem& r, const DriftEvaluator& fbar, double T,
                            double dt) {
  SimConfig grid;
  grid.T = T;
  grid.dt_slow = dt;
  grid.validate();
  const std::uint64_t n_macro = grid.macro_steps();
  const double h = grid.macro_step();
  const SlowStepper slow(slow_spectrum, r, h);

  AveragedPath out;
  out.samples_per_step = fbar.budget();
  out.times.push_back(0.0);
  out.states.push_back(x0);
  Field u = x0;
  std::size_t noisy_steps = 0;
  for (std::uint64_t n = 0; n < n_macro; ++n) {
    const AveragedDrift d = fbar.evaluate(u);
    double se_sq = 0.0;
    for (double s : d.std_error) se_sq += s * s;
    const double se = std::sqrt(se_sq);
    out.drift_std_error.push_back(se);
    if (se > 0.1 * norm(d.value)) ++noisy_steps;
    slow.step(u, d.value);
    out.times.push_back(static_cast<double>(n + 1) * h);
    out.states.push_back(u);
  }
  if (noisy_steps > 0) {
    out.warnings.push_back(fmt::format(
        "averaged-drift standard error exceeds 10% of |Fbar| on {} of {} steps; raise the "
        "measure sample budget",
        noisy_steps, n_macro));
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

// Largest per-time mean over replicas; values[t][rep].
struct SupOfMeans {
  double value = 0.0;
  double std_error = 0.0;
  std::size_t index = 0;
};

SupOfMeans sup_of_means(const std::vector<std::vector<double>>& values) {
  SupOfMeans best;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Estimate e = iid_mean(values[i]);
    if (i == 0 || e.value > best.value) best = {e.value, e.std_error, i};
  }
  return best;
}

LinearFit log_trend(const std::vector<double>& eps, const std::vector<Estimate>& stats) {
  std::vector<double> lx, ly, sig;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    lx.push_back(std::log(eps[i]));
    ly.push_back(std::log(stats[i].value));
    sig.push_back(std::max(stats[i].std_error / stats[i].value, 1e-6));
  }
  return weighted_least_squares(lx, ly, sig);
}

}  // namespace

AprioriReport apriori_bounds_check(const Field& x0, const Field& y0,
                                   const OperatorSpectrum& slow_spectrum, const ReactionSystem& r,
                                   const SimConfig& base, const std::vector<double>& eps_grid,
                                   const NoiseStream& ns) {
  if (eps_grid.size() < 2) throw std::invalid_argument("need at least two eps values");
  if (base.replicas < 2) throw std::invalid_argument("need at least two replicas");
  AprioriReport report;
  std::vector<Estimate> u_stats, v_stats;
  for (double eps : eps_grid) {
    SimConfig cfg = base;
    cfg.eps = eps;
    cfg.validate();
    const std::size_t reps = static_cast<std::size_t>(cfg.replicas);
    const std::size_t n_times = cfg.macro_steps() + 1;
    std::vector<double> sup_u(reps);
    std::vector<std::vector<double>> v_sq(n_times, std::vector<double>(reps));
    parallel_for(reps, [&](std::size_t rep) {
      double s = inner(x0, x0);
      v_sq[0][rep] = inner(y0, y0);
      run_coupled(x0, y0, slow_spectrum, r, cfg, ns.for_replica(rep),
                  [&](std::uint64_t n, const Field& u, const Field& v, const Field&) {
                    s = std::max(s, inner(u, u));
                    v_sq[n + 1][rep] = inner(v, v);
                  });
      sup_u[rep] = s;
    });
    const SupOfMeans sv = sup_of_means(v_sq);
    AprioriRow row{eps, iid_mean(sup_u), {sv.value, sv.std_error}};
    report.rows.push_back(row);
    u_stats.push_back(row.sup_u_sq);
    v_stats.push_back(row.sup_mean_v_sq);
  }
  report.u_trend = log_trend(eps_grid, u_stats);
  report.v_trend = log_trend(eps_grid, v_stats);
  // Growth as eps decreases is a significantly negative slope against log eps.
  report.no_growth = report.u_trend.slope >= -3.0 * report.u_trend.slope_std_error &&
                     report.v_trend.slope >= -3.0 * report.v_trend.slope_std_error;
  return report;
}

std::vector<double> remainder_series(const CoupledPath& path, const Field& h,
                                     const DriftEvaluator& fbar) {
  const double dt = path.config.macro_step();
  std::vector<double> R(path.u_states.size(), 0.0);
  for (std::size_t j = 0; j < path.slow_drift.size(); ++j) {
    const double gap = inner(path.slow_drift[j], h) - inner(fbar.evaluate(path.u_states[j]).value, h);
    R[j + 1] = R[j] + dt * gap;
  }
  return R;
}

std::vector<RemainderRow> remainder_study(const Field& x0, const Field& y0, const Field& h,
                                          const OperatorSpectrum& slow_spectrum,
                                          const ReactionSystem& r, const DriftEvaluator& fbar,
                                          const SimConfig& base,
                                          const std::vector<double>& eps_grid,
                                          const NoiseStream& ns, std::string_view config_hash) {
  if (base.replicas < 2) throw std::invalid_argument("need at least two replicas");
  std::vector<RemainderRow> rows;
  for (double eps : eps_grid) {
    SimConfig cfg = base;
    cfg.eps = eps;
    cfg.validate();
    const std::size_t reps = static_cast<std::size_t>(cfg.replicas);
    const std::size_t n_times = cfg.macro_steps() + 1;
    const double dt = cfg.macro_step();
    std::vector<std::vector<double>> abs_R(n_times, std::vector<double>(reps, 0.0));
    parallel_for(reps, [&](std::size_t rep) {
      CachedDrift cached(fbar);
      const DriftEvaluator& eval = fbar.exact() ? fbar : static_cast<const DriftEvaluator&>(cached);
      Field prev = x0;
      double R = 0.0;
      run_coupled(x0, y0, slow_spectrum, r, cfg, ns.for_replica(rep),
                  [&](std::uint64_t n, const Field& u, const Field&, const Field& drift) {
                    R += dt * (inner(drift, h) - inner(eval.evaluate(prev).value, h));
                    abs_R[n + 1][rep] = std::abs(R);
                    prev = u;
                  });
    });
    const SupOfMeans s = sup_of_means(abs_R);
    RemainderRow row;
    row.eps = eps;
    row.replica_count = cfg.replicas;
    row.sup_mean_abs = s.value;
    row.std_error = s.std_error;
    row.t_at_sup = static_cast<double>(s.index) * dt;
    row.seed = ns.seed();
    row.config_hash = std::string(config_hash);
    rows.push_back(row);
  }
  return rows;
}

bool remainder_strictly_decreasing(const std::vector<RemainderRow>& rows, double n_sigma) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double upper = rows[i].sup_mean_abs + n_sigma * rows[i].std_error;
    const double lower = rows[i - 1].sup_mean_abs - n_sigma * rows[i - 1].std_error;
    if (!(upper < lower)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

CorrectionEstimate correction_estimate(const Field& x, const Field& y, const Field& h, double c_eps,
                                       const ReactionSystem& r, const DriftEvaluator& fbar,
                                       double T_cut, double dt, int replicas,
                                       const NoiseStream& ns) {
  if (!(c_eps > 0.0)) throw std::invalid_argument("c_eps must be positive");
  if (!(T_cut > 0.0) || !(dt > 0.0)) throw std::invalid_argument("need T_cut > 0 and dt > 0");
  if (replicas < 2) throw std::invalid_argument("need at least two replicas");
  const AveragedDrift Fbar = fbar.evaluate(x);
  const double fbar_h = inner(Fbar.value, h);
  const double delta = r.dissipativity_gap();

  CorrectionEstimate out;
  out.truncation_bound = r.lipschitz_f() * norm(h) *
                         (1.0 + norm(x) + norm(y) + norm(Fbar.value)) *
                         std::exp(-(c_eps + delta) * T_cut) / (c_eps + delta);
  if (!r.f().depends_on_fast()) return out;

  const auto n_steps = static_cast<std::uint64_t>(std::ceil(T_cut / dt - 1e-9));
  const double step = T_cut / static_cast<double>(n_steps);
  const FastStepper stepper(r, step);
  const double fbar_part = fbar_h * -std::expm1(-c_eps * T_cut) / c_eps;
  std::vector<double> values(replicas);
  parallel_for(static_cast<std::size_t>(replicas), [&](std::size_t rep) {
    const NoiseStream stream = ns.for_replica(rep);
    Field v = y;
    double prev = inner(eval_F(r, x, v), h);
    double acc = 0.0;
    for (std::uint64_t n = 0; n < n_steps; ++n) {
      stepper.step(v, x, stream, n);
      const double w0 = std::exp(-c_eps * step * static_cast<double>(n));
      const double w1 = std::exp(-c_eps * step * static_cast<double>(n + 1));
      const double cur = inner(eval_F(r, x, v), h);
      acc += 0.5 * step * (w0 * prev + w1 * cur);
      prev = cur;
    }
    values[rep] = acc - fbar_part;
  });
  const Estimate e = iid_mean(values);
  out.value = e.value;
  out.std_error = e.std_error;
  out.truncation_dominated = out.truncation_bound > out.std_error;
  return out;
}

double fit_correction_constant(const std::vector<CorrectionEstimate>& values,
                               const std::vector<double>& x_norms,
                               const std::vector<double>& y_norms, double h_norm, double delta) {
  if (values.size() != x_norms.size() || values.size() != y_norms.size()) {
    throw std::invalid_argument("mismatched sample sizes");
  }
  double c = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    c = std::max(c, std::abs(values[i].value) * delta / ((1.0 + x_norms[i] + y_norms[i]) * h_norm));
  }
  return c;
}

// ---------------------------------------------------------------------------

std::vector<ConvergenceRow> convergence_study(const Field& x0, const Field& y0,
                                              const OperatorSpectrum& slow_spectrum,
                                              const ReactionSystem& r, const AveragedPath& ubar,
                                              const SimConfig& base,
                                              const std::vector<double>& eps_grid,
                                              const NoiseStream& ns,
                                              std::string_view config_hash) {
  for (std::size_t i = 1; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] < eps_grid[i - 1])) {
      throw std::invalid_argument("eps grid must be strictly decreasing");
    }
  }
  if (ubar.states.size() != base.macro_steps() + 1) {
    throw std::invalid_argument("averaged path is not on the macro grid of the study");
  }
  std::vector<ConvergenceRow> rows;
  for (double eps : eps_grid) {
    SimConfig cfg = base;
    cfg.eps = eps;
    cfg.validate();
    const std::size_t reps = static_cast<std::size_t>(cfg.replicas);
    std::vector<double> sup_err(reps, 0.0);
    parallel_for(reps, [&](std::size_t rep) {
      double s = norm(x0 - ubar.states[0]);
      run_coupled(x0, y0, slow_spectrum, r, cfg, ns.for_replica(rep),
                  [&](std::uint64_t n, const Field& u, const Field&, const Field&) {
                    s = std::max(s, norm(u - ubar.states[n + 1]));
                  });
      sup_err[rep] = s;
    });
    const auto exceed = static_cast<std::size_t>(
        std::count_if(sup_err.begin(), sup_err.end(), [&](double e) { return e > cfg.eta; }));
    const Interval ci = wilson_interval(exceed, reps);
    ConvergenceRow row;
    row.eps = eps;
    row.replica_count = cfg.replicas;
    row.mean_sup_error = mean(sup_err);
    row.median_sup_error = median(sup_err);
    row.exceedance_prob = static_cast<double>(exceed) / static_cast<double>(reps);
    row.ci_low = ci.low;
    row.ci_high = ci.high;
    row.seed = ns.seed();
    row.config_hash = std::string(config_hash);
    rows.push_back(row);
  }
  return rows;
}

bool exceedance_nonincreasing(const std::vector<ConvergenceRow>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].ci_low > rows[i - 1].ci_high) return false;
  }
  return true;
}

bool exceedance_strictly_decreasing(const std::vector<ConvergenceRow>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].ci_high < rows[i - 1].ci_low)) return false;
  }
  return true;
}

void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows) {
  out << "eps,replica_count,mean_sup_error,median_sup_error,exceedance_prob,ci_low,ci_high,seed,"
         "config_hash\n";
  for (const auto& row : rows) {
    out << fmt::format("{},{},{},{},{},{},{},{},{}\n", row.eps, row.replica_count,
                       row.mean_sup_error, row.median_sup_error, row.exceedance_prob, row.ci_low,
                       row.ci_high, row.seed, row.config_hash);
  }
}

void write_remainder_csv(std::ostream& out, const std::vector<RemainderRow>& rows) {
  out << "eps,replica_count,sup_mean_abs_remainder,std_error,t_at_sup,seed,config_hash\n";
  for (const auto& row : rows) {
    out << fmt::format("{},{},{},{},{},{},{}\n", row.eps, row.replica_count, row.sup_mean_abs,
                       row.std_error, row.t_at_sup, row.seed, row.config_hash);
  }
}

}  // namespace slowfast

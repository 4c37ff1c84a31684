#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "slowfast/invariant_measure.hpp"
#include "slowfast/noise.hpp"
#include "slowfast/reaction.hpp"
#include "slowfast/spectral.hpp"
#include "slowfast/stats.hpp"

namespace slowfast {

struct SimConfig {
  double eps = 0.1;
  double T = 1.0;
  double dt_slow = 0.01;
  double dt_fast = 0.05;  // micro step in fast time units (physical step dt_fast * eps)
  int n_modes = 8;
  int replicas = 200;
  std::uint64_t seed = 1;
  double eta = 0.1;

  /// Throws std::invalid_argument on nonpositive or non-finite values.
  void validate() const;
  /// Number of macro steps (T split into whole steps no longer than dt_slow).
  std::uint64_t macro_steps() const;
  double macro_step() const;
  /// Micro steps per macro step: ceil(macro_step / (dt_fast eps)), at least 1.
  std::uint64_t micro_steps() const;

  bool operator==(const SimConfig&) const = default;
};

/// Slow and fast states on the macro grid. slow_drift[n] is the slow drift
/// F(u_n, v) averaged over the micro steps of macro interval n.
struct CoupledPath {
  std::vector<double> times;
  std::vector<Field> u_states;
  std::vector<Field> v_states;
  std::vector<Field> slow_drift;
  SimConfig config;
  std::uint64_t replica_id = 0;
};

/// Called after each macro step n (states at times[n + 1]); `drift` is the
/// averaged slow drift used over the interval.
using CoupledObserver =
    std::function<void(std::uint64_t n, const Field& u, const Field& v, const Field& drift)>;

/// Coupled slow-fast system
///   du = [A u + F(u, v)] dt,
///   dv = (1/eps)[B v + G(u, v)] dt + eps^{-1/2} dw.
/// Per macro step of length h the fast component takes micro steps of the
/// exact-OU stepper with u frozen; the slow component takes one exponential
/// Euler step with the micro-averaged drift. The part of f linear in the slow
/// argument is integrated exactly with A. When f does not depend on the fast
/// argument the drift is F(u, 0) and the slow path is noise-free.
///
/// A and B must share eigenfunctions (equal BasisId).
CoupledPath simulate_coupled(const Field& x0, const Field& y0, const OperatorSpectrum& slow_spectrum,
                             const ReactionSystem& r, const SimConfig& cfg, const NoiseStream& ns);

/// Same stepping without storing the path.
void run_coupled(const Field& x0, const Field& y0, const OperatorSpectrum& slow_spectrum,
                 const ReactionSystem& r, const SimConfig& cfg, const NoiseStream& ns,
                 const CoupledObserver& observer);

// ---------------------------------------------------------------------------

/// Averaged-drift evaluator x -> Fbar(x) with standard errors.
class DriftEvaluator {
 public:
  virtual ~DriftEvaluator() = default;
  virtual AveragedDrift evaluate(const Field& x) const = 0;
  /// True when evaluate() is deterministic and error-free.
  virtual bool exact() const = 0;
  /// Measure samples spent per evaluation (0 for closed forms).
  virtual std::size_t budget() const = 0;
  virtual std::string name() const = 0;
};

/// Fbar without sampling. Available when f does not depend on the fast
/// argument (Fbar(x) = F(x, 0)), or when g is affine and f is affine in the
/// fast argument: then mu^x is Gaussian with mean
///   m_k(x) = (c0 <1, e_k> + c_slow x_k) / (alpha_k - c_fast)
/// and Fbar(x) = F(x, m(x)).
class ClosedFormDrift : public DriftEvaluator {
 public:
  explicit ClosedFormDrift(const ReactionSystem& r);
  static bool supports(const ReactionSystem& r);

  /// Mean of the Gaussian invariant measure (affine g only).
  Field gaussian_mean(const Field& x) const;
  /// Per-mode variance 1 / (2 (alpha_k - c_fast)) (affine g only).
  std::vector<double> gaussian_variance() const;

  AveragedDrift evaluate(const Field& x) const override;
  bool exact() const override { return true; }
  std::size_t budget() const override { return 0; }
  std::string name() const override { return "closed_form"; }

 private:
  const ReactionSystem* r_;
  bool fast_free_;
};

/// Nested Monte Carlo: a fresh measure estimate at every x, always from the
/// same stream (common random numbers across x).
class MonteCarloDrift : public DriftEvaluator {
 public:
  MonteCarloDrift(const ReactionSystem& r, MeasureConfig cfg, NoiseStream ns);

  AveragedDrift evaluate(const Field& x) const override;
  bool exact() const override { return false; }
  std::size_t budget() const override;
  std::string name() const override { return "monte_carlo"; }

 private:
  const ReactionSystem* r_;
  MeasureConfig cfg_;
  NoiseStream ns_;
};

/// Reuses a cached estimate while |x - x_cached| <= rel_tol (1 + |x|).
/// Not thread-safe; use one instance per path.
class CachedDrift : public DriftEvaluator {
 public:
  explicit CachedDrift(const DriftEvaluator& inner, double rel_tol = 0.01);

  AveragedDrift evaluate(const Field& x) const override;
  bool exact() const override { return inner_->exact(); }
  std::size_t budget() const override { return inner_->budget(); }
  std::string name() const override { return "cached_" + inner_->name(); }
  std::size_t evaluations() const { return evaluations_; }

 private:
  const DriftEvaluator* inner_;
  double rel_tol_;
  mutable std::vector<AveragedDrift> cache_;
  mutable std::size_t evaluations_ = 0;
};

std::unique_ptr<DriftEvaluator> make_drift_evaluator(const ReactionSystem& r,
                                                      const MeasureConfig& cfg,
                                                      const NoiseStream& ns);

struct AveragedPath {
  std::vector<double> times;
  std::vector<Field> states;
  std::vector<double> drift_std_error;  // |SE of Fbar| per macro step
  std::size_t samples_per_step = 0;
  std::vector<std::string> warnings;
};

/// Exponential Euler for du = [A u + Fbar(u)] dt on the macro grid of
/// (T, dt), with the slow-linear part of f treated as in simulate_coupled.
/// Warns when the Fbar standard error exceeds 10% of |Fbar|.
AveragedPath solve_averaged(const Field& x0, const OperatorSpectrum& slow_spectrum,
                            const ReactionSystem& r, const DriftEvaluator& fbar, double T,
                            double dt);

// ---------------------------------------------------------------------------

struct AprioriRow {
  double eps = 0.0;
  Estimate sup_u_sq;     // E sup_t |u^eps(t)|^2
  Estimate sup_mean_v_sq;  // sup_t E |v^eps(t)|^2 (SE at the maximising time)
};

struct AprioriReport {
  std::vector<AprioriRow> rows;
  LinearFit u_trend;  // log statistic against log eps
  LinearFit v_trend;
  bool no_growth = false;  // neither statistic grows significantly as eps decreases
};

/// Moment statistics of u^eps and v^eps for each eps of the grid from
/// `replicas` paths, and a slope test on log eps.
AprioriReport apriori_bounds_check(const Field& x0, const Field& y0,
                                   const OperatorSpectrum& slow_spectrum, const ReactionSystem& r,
                                   const SimConfig& base, const std::vector<double>& eps_grid,
                                   const NoiseStream& ns);

/// R_h(t_n) = sum_{j < n} h_macro <drift_j - Fbar(u_j), h>, with R_h(0) = 0.
std::vector<double> remainder_series(const CoupledPath& path, const Field& h,
                                     const DriftEvaluator& fbar);

struct RemainderRow {
  double eps = 0.0;
  int replica_count = 0;
  double sup_mean_abs = 0.0;  // sup_t E|R_h(t)|
  double std_error = 0.0;     // at the maximising time
  double t_at_sup = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// sup_t E|R_h^eps(t)| over cfg.replicas paths for each eps of the grid.
/// Inexact evaluators are cached per path.
std::vector<RemainderRow> remainder_study(const Field& x0, const Field& y0, const Field& h,
                                          const OperatorSpectrum& slow_spectrum,
                                          const ReactionSystem& r, const DriftEvaluator& fbar,
                                          const SimConfig& base,
                                          const std::vector<double>& eps_grid,
                                          const NoiseStream& ns, std::string_view config_hash);

/// Each row's value lies below the previous one by more than the sum of
/// `n_sigma` standard errors.
bool remainder_strictly_decreasing(const std::vector<RemainderRow>& rows, double n_sigma = 1.96);

struct CorrectionEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double truncation_bound = 0.0;
  bool truncation_dominated = false;
};

/// Phi_h(x, y) = int_0^inf e^{-c t} P^x_t[<F(x, .), h> - <Fbar(x), h>](y) dt,
/// trapezoidal in time along fast trajectories cut at T_cut, with the Fbar
/// part integrated exactly. The tail beyond T_cut is bounded by
///   L_f |h| (1 + |x| + |y| + |Fbar(x)|) e^{-(c + delta) T_cut} / (c + delta)
/// and the estimate is flagged when that bound exceeds the standard error.
CorrectionEstimate correction_estimate(const Field& x, const Field& y, const Field& h, double c_eps,
                                       const ReactionSystem& r, const DriftEvaluator& fbar,
                                       double T_cut, double dt, int replicas,
                                       const NoiseStream& ns);

/// Smallest c with |Phi| <= (c / delta)(1 + |x| + |y|)|h| over the samples.
double fit_correction_constant(const std::vector<CorrectionEstimate>& values,
                               const std::vector<double>& x_norms,
                               const std::vector<double>& y_norms, double h_norm, double delta);

struct ConvergenceRow {
  double eps = 0.0;
  int replica_count = 0;
  double mean_sup_error = 0.0;
  double median_sup_error = 0.0;
  double exceedance_prob = 0.0;  // P(sup_t |u^eps - ubar| > eta)
  double ci_low = 0.0;           // Wilson 95%
  double ci_high = 0.0;
  std::uint64_t seed = 0;
  std::string config_hash;
};

/// For each eps (strictly decreasing grid), cfg.replicas coupled paths are
/// compared with the averaged path ubar on the same macro grid.
std::vector<ConvergenceRow> convergence_study(const Field& x0, const Field& y0,
                                              const OperatorSpectrum& slow_spectrum,
                                              const ReactionSystem& r, const AveragedPath& ubar,
                                              const SimConfig& base,
                                              const std::vector<double>& eps_grid,
                                              const NoiseStream& ns, std::string_view config_hash);

/// No row's exceedance CI lies entirely above the previous row's CI.
bool exceedance_nonincreasing(const std::vector<ConvergenceRow>& rows);
/// Every row's CI lies entirely below the previous row's CI.
bool exceedance_strictly_decreasing(const std::vector<ConvergenceRow>& rows);

void write_convergence_csv(std::ostream& out, const std::vector<ConvergenceRow>& rows);
void write_remainder_csv(std::ostream& out, const std::vector<RemainderRow>& rows);

}  // namespace slowfast

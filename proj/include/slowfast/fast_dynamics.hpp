#pragma once

#include <cstdint>
#include <vector>

#include "slowfast/noise.hpp"
#include "slowfast/reaction.hpp"
#include "slowfast/stats.hpp"

namespace slowfast {

/// Exponential-Euler stepper for the fast equation with frozen slow state x,
///   dv = (1/eps) [B v + G(x, v)] dt + eps^{-1/2} dw,
/// in physical time. The part of g that is linear in the fast argument is
/// moved into the exactly integrated OU operator; only the remainder of G is
/// frozen over a step.
class FastStepper {
 public:
  /// Throws std::invalid_argument when dt / eps exceeds 0.1 / L_nl, where
  /// L_nl bounds the fast derivative of the non-absorbed part of g.
  FastStepper(const ReactionSystem& r, double dt, double eps = 1.0);

  /// G(x, v) minus its absorbed linear part.
  Field residual_drift(const Field& x, const Field& v) const;
  /// False when the residual drift depends on x only (cacheable per x).
  bool residual_depends_on_v() const { return residual_depends_on_v_; }

  void step(Field& v, const Field& x, const NoiseStream& ns, std::uint64_t step_index,
            bool with_noise = true) const;
  void step_with_drift(Field& v, const Field& drift, const NoiseStream& ns,
                       std::uint64_t step_index, bool with_noise = true) const;

  const OperatorSpectrum& effective_spectrum() const { return effective_; }
  double dt() const { return dt_; }
  double eps() const { return eps_; }

 private:
  const ReactionSystem* r_;
  OperatorSpectrum effective_;
  OuPropagator propagator_;
  ReactionFunction residual_;
  double dt_;
  double eps_;
  bool residual_depends_on_v_;
};

/// Largest admissible fast step (in fast time units) for the stepper.
double max_fast_step(const ReactionSystem& r);

struct TrajectorySample {
  std::vector<double> times;
  std::vector<Field> states;
  std::uint64_t seed = 0;
  std::uint64_t replica_id = 0;
};

enum class NoiseSwitch { On, Off };

/// Fast equation with frozen slow component (eps = 1), recording every
/// `record_every` steps (times[0] = 0, states[0] = y0).
TrajectorySample simulate_fast(const Field& x_frozen, const Field& y0, const ReactionSystem& r,
                               double T, double dt, const NoiseStream& ns,
                               NoiseSwitch noise = NoiseSwitch::On, int record_every = 1);

/// Deterministic fixed point of B v + G(x, v) = 0 by Picard
/// iteration on the resolvent (contraction since L_g < lambda).
Field fast_fixed_point(const Field& x, const ReactionSystem& r, double tol = 1e-14,
                       int max_iter = 10000);

struct ContractionFit {
  double rate = 0.0;          // fitted decay rate of |v^{x,y} - v^{x,z}|
  double intercept = 0.0;     // log-amplitude at t = 0
  double window_start = 0.0;
  double window_end = 0.0;
};

/// Synchronous coupling of v^{x,y} and v^{x,z}; log-linear least squares on
/// [0.2 T, 0.8 T]. Throws DegenerateFit if the two paths coincide.
ContractionFit contraction_estimate(const Field& x, const Field& y, const Field& z,
                                    const ReactionSystem& r, double T, double dt,
                                    const NoiseStream& ns);

/// sup_t |v^{x1,y}(t) - v^{x2,y}(t)| / |x1 - x2| under synchronous coupling.
double slow_sensitivity(const Field& x1, const Field& x2, const Field& y, const ReactionSystem& r,
                        double T, double dt, const NoiseStream& ns);

struct MomentRow {
  double t = 0.0;
  double moment = 0.0;  // E |v(t)|_H^p
  double std_error = 0.0;
};

/// Empirical E|v^{x,y0}(t)|^p over independent replicas, p in {1, 2, 4}.
std::vector<MomentRow> moment_profile(const Field& x, const Field& y0, const ReactionSystem& r,
                                      int p, double T, double dt, int replicas,
                                      const NoiseStream& ns, int record_every = 1);

/// e^{-delta p t} |y|^p + |x|^p + 1.
double moment_envelope(double t, int p, double delta, double x_norm, double y_norm);

/// Smallest c with moment(t) <= c * envelope(t) on the given profile.
double fit_moment_constant(const std::vector<MomentRow>& rows, int p, double delta, double x_norm,
                           double y_norm);

/// True when moment(t) <= (1 + slack) c envelope(t) for every row.
bool moment_envelope_holds(const std::vector<MomentRow>& rows, int p, double delta, double x_norm,
                           double y_norm, double c, double slack);

/// Lipschitz functionals on H with certified constants.
struct Functional {
  enum class Kind { Linear, Norm, ClippedLinear };

  Kind kind = Kind::Linear;
  Field h;           // direction for the linear kinds
  double clip = 1.0; // bound for ClippedLinear

  static Functional linear(Field h);
  static Functional norm_of();
  static Functional clipped_linear(Field h, double clip);

  double operator()(const Field& y) const;
  double lipschitz() const;
};

/// Monte Carlo estimate of P^x_t phi(y) = E phi(v^{x,y}(t)).
Estimate semigroup_expectation(const Functional& phi, const Field& x, const Field& y, double t,
                               double dt, int replicas, const ReactionSystem& r,
                               const NoiseStream& ns);

/// Coupled estimate of P^x_t phi(y) - P^x_t phi(z) using synchronous noise.
Estimate semigroup_difference(const Functional& phi, const Field& x, const Field& y,
                              const Field& z, double t, double dt, int replicas,
                              const ReactionSystem& r, const NoiseStream& ns);

}  // namespace slowfast

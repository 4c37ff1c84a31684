#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "slowfast/fast_dynamics.hpp"
#include "slowfast/noise.hpp"
#include "slowfast/reaction.hpp"
#include "slowfast/stats.hpp"

namespace slowfast {

enum class Provenance { ErgodicAverage, PcnGibbs };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& name);

struct MeasureDiagnostics {
  double effective_sample_size = 0.0;  // smallest over the mode series
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();
  double beta = std::numeric_limits<double>::quiet_NaN();
  double burn_in = 0.0;  // time units (ergodic) or iterations (pCN)
  std::vector<std::string> warnings;
};

/// Equally weighted samples approximating the fast invariant measure mu^x.
struct MeasureEstimate {
  std::vector<Field> samples;
  Provenance provenance = Provenance::ErgodicAverage;
  Field x_frozen;
  MeasureDiagnostics diagnostics;
  std::uint64_t seed = 0;
};

struct ErgodicConfig {
  double T_burn = 0.0;  // 0 selects 5 / delta; smaller positive values are rejected
  double T_sample = 1000.0;
  double dt = 0.01;
  int thin = 10;

  bool operator==(const ErgodicConfig&) const = default;
};

struct PcnConfig {
  int n_samples = 100000;
  double beta = 0.5;  // initial step; adapted during burn-in when `adapt`
  int burn_in = 5000;
  int thin = 1;
  bool adapt = true;
  double target_acceptance = 0.25;

  bool operator==(const PcnConfig&) const = default;
};

struct MeasureConfig {
  Provenance estimator = Provenance::PcnGibbs;
  ErgodicConfig ergodic;
  PcnConfig pcn;

  bool operator==(const MeasureConfig&) const = default;
};

/// Thinned post-burn-in states of one long fast trajectory started at y0.
MeasureEstimate ergodic_measure(const Field& x, const Field& y0, const ReactionSystem& r,
                                const ErgodicConfig& cfg, const NoiseStream& ns);

/// Preconditioned Crank-Nicolson chain targeting exp(2U(x, y)) N(0, (-B)^{-1}/2).
/// Proposal y' = sqrt(1 - beta^2) y + beta xi with xi from the Gaussian
/// reference; accept with probability min(1, exp(2U(x,y') - 2U(x,y))).
/// beta is adapted toward the target acceptance during burn-in, then frozen;
/// a further 10 integrated autocorrelation times are discarded before sampling.
MeasureEstimate pcn_measure(const Field& x, const ReactionSystem& r, const PcnConfig& cfg,
                            const NoiseStream& ns);

MeasureEstimate estimate_measure(const Field& x, const ReactionSystem& r, const MeasureConfig& cfg,
                                 const NoiseStream& ns);

struct ModeMoments {
  std::vector<Estimate> mean;
  std::vector<Estimate> variance;
};

/// Per-mode mean and variance with autocorrelation-aware standard errors.
ModeMoments mode_moments(const MeasureEstimate& mu);

/// Chain mean of phi over the samples.
Estimate measure_expectation(const MeasureEstimate& mu,
                             const std::function<double(const Field&)>& phi);

struct AveragedDrift {
  Field x;
  Field value;
  std::vector<double> std_error;
  Provenance estimator = Provenance::PcnGibbs;
};

/// Monte Carlo mean of F(x, y_i) over the samples.
AveragedDrift averaged_drift(const Field& x, const ReactionSystem& r, const MeasureEstimate& mu);
AveragedDrift averaged_drift(const Field& x, const ReactionSystem& r, const MeasureConfig& cfg,
                             const NoiseStream& ns);

struct GradientEstimate {
  double value = 0.0;
  double std_error = 0.0;
  double direct_term = 0.0;      // int <D_x F k, h> dmu
  double covariance_term = 0.0;  // 2 Cov_mu(<U_x, k>, <F, h>)
};

/// <D Fbar(x) k, h> = int <D_xF k, h> dmu + 2 int <U_x,k><F,h> dmu
///                    - 2 int <U_x,k> dmu int <F,h> dmu.
GradientEstimate averaged_drift_gradient(const Field& x, const Field& k, const Field& h,
                                         const ReactionSystem& r, const MeasureEstimate& mu);

struct MixingFit {
  double rate = std::numeric_limits<double>::quiet_NaN();
  double log_amplitude = 0.0;
  bool below_noise_floor = false;
  std::vector<double> t;
  std::vector<double> gap;        // |P_t phi(y) - mu(phi)|
  std::vector<double> gap_error;  // standard error of the gap
  std::vector<bool> used;         // point entered the fit
};

/// Fits |P^x_t phi(y) - mu^x(phi)| ~ C e^{-rate t}. Points whose gap is below
/// three standard errors are reported but excluded from the fit.
MixingFit mixing_rate(const Field& x, const Field& y, const Functional& phi,
                      const ReactionSystem& r, const std::vector<double>& t_grid, double dt,
                      int replicas, const Estimate& mu_phi, const NoiseStream& ns);

struct MomentGrowthRow {
  double x_norm = 0.0;
  Estimate moment;  // int |z|^p mu^x(dz)
};

std::vector<MomentGrowthRow> measure_moment_growth(const ReactionSystem& r,
                                                   const std::vector<Field>& x_grid, int p,
                                                   const MeasureConfig& cfg,
                                                   const NoiseStream& ns);

/// Smallest c with moment <= c (1 + |x|^p) over the rows.
double fit_growth_constant(const std::vector<MomentGrowthRow>& rows, int p);
bool growth_envelope_holds(const std::vector<MomentGrowthRow>& rows, int p, double c,
                           double slack);

/// FNV-1a over the coefficient bytes.
std::uint64_t field_hash(const Field& x);

/// One row per sample, one column per mode; '#' header lines carry
/// provenance, x hash, seed and spec hash.
void write_measure_csv(std::ostream& out, const MeasureEstimate& mu, std::string_view spec_hash);

}  // namespace slowfast

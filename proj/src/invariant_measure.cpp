#include "slowfast/invariant_measure.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fmt/format.h>
#include <ostream>
#include <stdexcept>

#include "slowfast/parallel.hpp"

namespace slowfast {

std::string to_string(Provenance p) {
  return p == Provenance::ErgodicAverage ? "ergodic" : "pcn";
}

Provenance provenance_from_string(const std::string& name) {
  if (name == "ergodic") return Provenance::ErgodicAverage;
  if (name == "pcn") return Provenance::PcnGibbs;
  throw std::invalid_argument("unknown estimator '" + name + "' (expected ergodic or pcn)");
}

namespace {

std::vector<double> mode_series(const MeasureEstimate& mu, int k) {
  std::vector<double> s(mu.samples.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = mu.samples[i][k];
  return s;
}

double min_mode_ess(const MeasureEstimate& mu) {
  if (mu.samples.empty()) return 0.0;
  double ess = static_cast<double>(mu.samples.size());
  for (int k = 0; k < mu.samples.front().size(); ++k) {
    ess = std::min(ess, effective_sample_size(mode_series(mu, k)));
  }
  return ess;
}

void check_ess(MeasureEstimate& mu) {
  mu.diagnostics.effective_sample_size = min_mode_ess(mu);
  if (mu.diagnostics.effective_sample_size < 100.0) {
    mu.diagnostics.warnings.push_back(
        fmt::format("effective sample size {:.1f} is below 100", mu.diagnostics.effective_sample_size));
  }
}

}  // namespace

// ---------------------------------------------------------------------------

MeasureEstimate ergodic_measure(const Field& x, const Field& y0, const ReactionSystem& r,
                                const ErgodicConfig& cfg, const NoiseStream& ns) {
  const double min_burn = 5.0 / r.dissipativity_gap();
  double T_burn = cfg.T_burn;
  if (T_burn == 0.0) T_burn = min_burn;
  if (T_burn < min_burn * (1.0 - 1e-12)) {
    throw std::invalid_argument(fmt::format("burn-in {} is shorter than 5 / delta = {}", T_burn,
                                            min_burn));
  }
  if (!(cfg.T_sample > 0.0) || !(cfg.dt > 0.0) || cfg.thin < 1) {
    throw std::invalid_argument("ergodic sampling needs T_sample > 0, dt > 0 and thin >= 1");
  }
  const FastStepper stepper(r, cfg.dt);
  const auto n_burn = static_cast<std::uint64_t>(std::ceil(T_burn / cfg.dt - 1e-9));
  const auto n_sample = static_cast<std::uint64_t>(std::llround(cfg.T_sample / cfg.dt));

  MeasureEstimate mu;
  mu.provenance = Provenance::ErgodicAverage;
  mu.x_frozen = x;
  mu.seed = ns.seed();
  mu.diagnostics.burn_in = static_cast<double>(n_burn) * cfg.dt;
  mu.samples.reserve(n_sample / cfg.thin + 1);

  Field v = y0;
  const bool cache = !stepper.residual_depends_on_v();
  const Field fixed_drift = cache ? stepper.residual_drift(x, v) : Field();
  const auto thin = static_cast<std::uint64_t>(cfg.thin);
  for (std::uint64_t n = 0; n < n_burn + n_sample; ++n) {
    if (cache) {
      stepper.step_with_drift(v, fixed_drift, ns, n);
    } else {
      stepper.step(v, x, ns, n);
    }
    if (n >= n_burn && (n + 1 - n_burn) % thin == 0) mu.samples.push_back(v);
  }
  check_ess(mu);
  return mu;
}

MeasureEstimate pcn_measure(const Field& x, const ReactionSystem& r, const PcnConfig& cfg,
                            const NoiseStream& ns) {
  if (!(cfg.beta > 0.0 && cfg.beta < 1.0)) throw std::invalid_argument("pCN beta must lie in (0, 1)");
  if (cfg.n_samples < 1 || cfg.burn_in < 0 || cfg.thin < 1) {
    throw std::invalid_argument("pCN needs n_samples >= 1, burn_in >= 0, thin >= 1");
  }
  const OperatorSpectrum& S = r.spectrum();
  const int N = S.n_modes();
  std::vector<double> prior_sd(N);
  for (int k = 0; k < N; ++k) prior_sd[k] = 1.0 / std::sqrt(2.0 * S.eigenvalue(k));

  const NoiseStream proposals = ns.for_channel(1);
  const NoiseStream accepts = ns.for_channel(2);
  std::uint64_t iteration = 0;

  Field y = S.zeros();
  for (int k = 0; k < N; ++k) y[k] = prior_sd[k] * ns.for_channel(3).normal(k, 0);
  double two_u = 2.0 * potential_U(r, x, y);
  double beta = cfg.beta;

  Field proposal = y;
  auto advance = [&]() -> bool {
    const double rho = std::sqrt(std::max(0.0, 1.0 - beta * beta));
    for (int k = 0; k < N; ++k) {
      proposal[k] = rho * y[k] + beta * prior_sd[k] * proposals.normal(k, iteration);
    }
    const double two_u_new = 2.0 * potential_U(r, x, proposal);
    const double log_u = std::log(accepts.uniform(0, iteration));
    ++iteration;
    if (log_u < two_u_new - two_u) {
      std::swap(y, proposal);
      two_u = two_u_new;
      return true;
    }
    return false;
  };

  // Adaptive burn-in: Robbins-Monro on log beta over windows of 50 steps.
  constexpr int kWindow = 50;
  int window_accepts = 0;
  for (int i = 0; i < cfg.burn_in; ++i) {
    window_accepts += advance() ? 1 : 0;
    if (cfg.adapt && (i + 1) % kWindow == 0) {
      const double rate = static_cast<double>(window_accepts) / kWindow;
      const double gain = 1.0 / std::sqrt(1.0 + (i + 1) / kWindow);
      beta = std::clamp(beta * std::exp(gain * (rate - cfg.target_acceptance)), 1e-4, 0.9999);
      window_accepts = 0;
    }
  }

  // Frozen-beta pilot to estimate the integrated autocorrelation time.
  const int pilot = std::max(500, cfg.burn_in / 2);
  std::vector<std::vector<double>> pilot_series(N + 1, std::vector<double>(pilot));
  for (int i = 0; i < pilot; ++i) {
    advance();
    for (int k = 0; k < N; ++k) pilot_series[k][i] = y[k];
    pilot_series[N][i] = two_u;
  }
  double tau = 1.0;
  for (const auto& s : pilot_series) tau = std::max(tau, integrated_autocorr_time(s));
  const auto extra = static_cast<std::uint64_t>(std::max(0.0, std::ceil(10.0 * tau) - pilot));
  for (std::uint64_t i = 0; i < extra; ++i) advance();

  MeasureEstimate mu;
  mu.provenance = Provenance::PcnGibbs;
  mu.x_frozen = x;
  mu.seed = ns.seed();
  mu.diagnostics.beta = beta;
  mu.diagnostics.burn_in = static_cast<double>(iteration);
  mu.samples.reserve(cfg.n_samples);
  std::uint64_t accepted = 0, proposed = 0;
  while (static_cast<int>(mu.samples.size()) < cfg.n_samples) {
    for (int t = 0; t < cfg.thin; ++t) {
      accepted += advance() ? 1 : 0;
      ++proposed;
    }
    mu.samples.push_back(y);
  }
  mu.diagnostics.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(proposed);
  const double acc = mu.diagnostics.acceptance_rate;
  if (acc < 0.1 || acc > 0.6) {
    // Acceptance of 1 is expected when the potential is constant.
    if (!(acc == 1.0 && r.g().terms().empty())) {
      const double suggested = std::clamp(beta * std::exp(acc - cfg.target_acceptance), 1e-4, 0.9999);
      mu.diagnostics.warnings.push_back(fmt::format(
          "acceptance rate {:.3f} outside [0.1, 0.6]; try beta = {:.4f}", acc, suggested));
    }
  }
  check_ess(mu);
  return mu;
}

MeasureEstimate estimate_measure(const Field& x, const ReactionSystem& r, const MeasureConfig& cfg,
                                 const NoiseStream& ns) {
  if (cfg.estimator == Provenance::PcnGibbs) return pcn_measure(x, r, cfg.pcn, ns);
  return ergodic_measure(x, r.spectrum().zeros(), r, cfg.ergodic, ns);
}

// ---------------------------------------------------------------------------

ModeMoments mode_moments(const MeasureEstimate& mu) {
  if (mu.samples.size() < 4) throw std::invalid_argument("need at least four samples");
  ModeMoments out;
  const int N = mu.samples.front().size();
  for (int k = 0; k < N; ++k) {
    const std::vector<double> s = mode_series(mu, k);
    const Estimate m = chain_mean(s);
    std::vector<double> sq(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) sq[i] = (s[i] - m.value) * (s[i] - m.value);
    Estimate v = chain_mean(sq);
    v.value *= static_cast<double>(s.size()) / static_cast<double>(s.size() - 1);
    out.mean.push_back(m);
    out.variance.push_back(v);
  }
  return out;
}

Estimate measure_expectation(const MeasureEstimate& mu,
                             const std::function<double(const Field&)>& phi) {
  std::vector<double> s(mu.samples.size());
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = phi(mu.samples[i]);
  return chain_mean(s);
}

AveragedDrift averaged_drift(const Field& x, const ReactionSystem& r, const MeasureEstimate& mu) {
  if (mu.samples.empty()) throw std::invalid_argument("empty measure estimate");
  const int N = x.size();
  AveragedDrift out;
  out.x = x;
  out.estimator = mu.provenance;
  out.value = Field::zeros(x.basis());
  out.std_error.assign(N, 0.0);
  if (!r.f().depends_on_fast()) {
    // The measure has unit mass, so the average is exact.
    out.value = eval_F(r, x, mu.samples.front());
    return out;
  }
  std::vector<std::vector<double>> series(N, std::vector<double>(mu.samples.size()));
  for (std::size_t i = 0; i < mu.samples.size(); ++i) {
    const Field Fi = eval_F(r, x, mu.samples[i]);
    for (int k = 0; k < N; ++k) series[k][i] = Fi[k];
  }
  for (int k = 0; k < N; ++k) {
    const Estimate e = chain_mean(series[k]);
    out.value[k] = e.value;
    out.std_error[k] = e.std_error;
  }
  return out;
}

AveragedDrift averaged_drift(const Field& x, const ReactionSystem& r, const MeasureConfig& cfg,
                             const NoiseStream& ns) {
  if (!r.f().depends_on_fast()) {
    AveragedDrift out;
    out.x = x;
    out.estimator = cfg.estimator;
    out.value = eval_F(r, x, r.spectrum().zeros());
    out.std_error.assign(x.size(), 0.0);
    return out;
  }
  return averaged_drift(x, r, estimate_measure(x, r, cfg, ns));
}

GradientEstimate averaged_drift_gradient(const Field& x, const Field& k, const Field& h,
                                         const ReactionSystem& r, const MeasureEstimate& mu) {
  const std::size_t n = mu.samples.size();
  if (n < 4) throw std::invalid_argument("need at least four samples");
  std::vector<double> direct(n), ux(n), fh(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Field& y = mu.samples[i];
    direct[i] = r.f().slow_derivative_pairing(r.spectrum(), x, y, k, h);
    ux[i] = potential_x_derivative(r, x, y, k);
    fh[i] = inner(eval_F(r, x, y), h);
  }
  const double mean_ux = mean(ux), mean_fh = mean(fh);
  std::vector<double> cross(n), influence(n);
  for (std::size_t i = 0; i < n; ++i) cross[i] = (ux[i] - mean_ux) * (fh[i] - mean_fh);
  const double cov = mean(cross);
  for (std::size_t i = 0; i < n; ++i) influence[i] = direct[i] + 2.0 * cross[i];

  GradientEstimate out;
  out.direct_term = mean(direct);
  out.covariance_term = 2.0 * cov;
  out.value = out.direct_term + out.covariance_term;
  out.std_error = chain_mean(influence).std_error;
  return out;
}

// ---------------------------------------------------------------------------

MixingFit mixing_rate(const Field& x, const Field& y, const Functional& phi,
                      const ReactionSystem& r, const std::vector<double>& t_grid, double dt,
                      int replicas, const Estimate& mu_phi, const NoiseStream& ns) {
  if (t_grid.empty() || replicas < 2) throw std::invalid_argument("mixing fit needs times and replicas");
  if (!std::is_sorted(t_grid.begin(), t_grid.end()) || t_grid.front() < 0.0) {
    throw std::invalid_argument("mixing time grid must be sorted and nonnegative");
  }
  std::vector<std::uint64_t> step_at(t_grid.size());
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    step_at[i] = static_cast<std::uint64_t>(std::llround(t_grid[i] / dt));
  }
  const FastStepper stepper(r, dt);
  std::vector<std::vector<double>> values(t_grid.size(), std::vector<double>(replicas));
  parallel_for(static_cast<std::size_t>(replicas), [&](std::size_t rep) {
    const NoiseStream stream = ns.for_replica(rep);
    Field v = y;
    std::uint64_t n = 0;
    for (std::size_t i = 0; i < t_grid.size(); ++i) {
      for (; n < step_at[i]; ++n) stepper.step(v, x, stream, n);
      values[i][rep] = phi(v);
    }
  });

  MixingFit fit;
  std::vector<double> ts, logs, sig;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    Estimate p = t_grid[i] == 0.0 ? Estimate{phi(y), 0.0} : iid_mean(values[i]);
    const double gap = std::abs(p.value - mu_phi.value);
    const double err = std::sqrt(p.std_error * p.std_error + mu_phi.std_error * mu_phi.std_error);
    const bool use = gap > 3.0 * err && gap > 0.0;
    fit.t.push_back(t_grid[i]);
    fit.gap.push_back(gap);
    fit.gap_error.push_back(err);
    fit.used.push_back(use);
    if (use) {
      ts.push_back(t_grid[i]);
      logs.push_back(std::log(gap));
      sig.push_back(std::max(err / gap, 1e-3));
    }
  }
  if (ts.size() < 2) {
    fit.below_noise_floor = true;
    return fit;
  }
  const LinearFit lf = weighted_least_squares(ts, logs, sig);
  fit.rate = -lf.slope;
  fit.log_amplitude = lf.intercept;
  return fit;
}

std::vector<MomentGrowthRow> measure_moment_growth(const ReactionSystem& r,
                                                   const std::vector<Field>& x_grid, int p,
                                                   const MeasureConfig& cfg,
                                                   const NoiseStream& ns) {
  if (p != 1 && p != 2 && p != 4) throw std::invalid_argument("moment order must be 1, 2 or 4");
  std::vector<MomentGrowthRow> rows(x_grid.size());
  parallel_for(x_grid.size(), [&](std::size_t i) {
    const MeasureEstimate mu = estimate_measure(x_grid[i], r, cfg, ns.for_replica(i));
    rows[i].x_norm = norm(x_grid[i]);
    rows[i].moment =
        measure_expectation(mu, [p](const Field& z) { return std::pow(norm(z), p); });
  });
  return rows;
}

double fit_growth_constant(const std::vector<MomentGrowthRow>& rows, int p) {
  double c = 0.0;
  for (const auto& row : rows) c = std::max(c, row.moment.value / (1.0 + std::pow(row.x_norm, p)));
  return c;
}

bool growth_envelope_holds(const std::vector<MomentGrowthRow>& rows, int p, double c,
                           double slack) {
  for (const auto& row : rows) {
    if (row.moment.value > (1.0 + slack) * c * (1.0 + std::pow(row.x_norm, p))) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

std::uint64_t field_hash(const Field& x) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double c : x.coeffs()) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &c, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

void write_measure_csv(std::ostream& out, const MeasureEstimate& mu, std::string_view spec_hash) {
  out << "# provenance=" << to_string(mu.provenance) << '\n';
  out << fmt::format("# x_hash={:016x}\n", field_hash(mu.x_frozen));
  out << "# seed=" << mu.seed << '\n';
  out << "# spec_hash=" << spec_hash << '\n';
  const int N = mu.samples.empty() ? mu.x_frozen.size() : mu.samples.front().size();
  for (int k = 0; k < N; ++k) out << (k ? "," : "") << "mode_" << (k + 1);
  out << '\n';
  for (const Field& y : mu.samples) {
    for (int k = 0; k < N; ++k) out << (k ? "," : "") << fmt::format("{:.17g}", y[k]);
    out << '\n';
  }
}

}  // namespace slowfast

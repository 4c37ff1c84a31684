#include "slowfast/runner.hpp"

#include <fmt/format.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "slowfast/errors.hpp"
#include "slowfast/fast_dynamics.hpp"
#include "slowfast/invariant_measure.hpp"
#include "slowfast/multiscale.hpp"
#include "slowfast/parallel.hpp"

namespace slowfast {

ExperimentSpec apply_options(ExperimentSpec spec, const RunOptions& options) {
  if (options.seed) spec.sim.seed = *options.seed;
  if (options.out) spec.output = *options.out;
  if (options.replicas) {
    if (*options.replicas < 1) throw ConfigError("--replicas must be >= 1");
    spec.sim.replicas = *options.replicas;
  }
  if (options.threads) {
    if (*options.threads < 1) throw ConfigError("--threads must be >= 1");
    set_worker_threads(*options.threads);
  }
  return spec;
}

namespace {

struct Setup {
  OperatorSpectrum A;
  ReactionSystem r;
  Field x0;
  Field y0;
  Field h;
  NoiseStream ns;
};

Setup build_setup(const ExperimentSpec& spec) {
  const int N = spec.sim.n_modes;
  const SystemSpec& s = spec.system;
  const OperatorSpectrum B = OperatorSpectrum::build(s.length, s.fast_operator, N, s.grid_points);
  OperatorSpectrum A = OperatorSpectrum::build(s.length, s.slow_operator, N, s.grid_points);
  if (!(A.basis() == B.basis())) {
    throw std::invalid_argument("slow and fast operators must use the same boundary condition");
  }
  ReactionSystem r = ReactionSystem::make(s.f, s.g, B);
  return Setup{std::move(A),
               std::move(r),
               B.make_field(spec.initial.x0),
               B.make_field(spec.initial.y0),
               B.make_field(spec.probe.h),
               NoiseStream(spec.sim.seed, 0, N)};
}

// Stream for nested averaged-drift estimates, disjoint from the path replicas.
NoiseStream drift_stream(const Setup& s) { return s.ns.for_replica(std::uint64_t{1} << 40); }

class Artifacts {
 public:
  Artifacts(const ExperimentSpec& spec, std::string hash, RunReport& report)
      : dir_(spec.output), hash_(std::move(hash)), seed_(spec.sim.seed), report_(report) {
    std::filesystem::create_directories(dir_);
  }

  std::ofstream open(const std::string& file) {
    const std::filesystem::path path = dir_ / file;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    report_.files.push_back(path.string());
    return out;
  }

  // Provenance lines for tables whose schema has no hash column.
  void provenance(std::ostream& out) const {
    out << "# spec_hash=" << hash_ << '\n' << "# seed=" << seed_ << '\n';
  }

  const std::string& hash() const { return hash_; }

 private:
  std::filesystem::path dir_;
  std::string hash_;
  std::uint64_t seed_;
  RunReport& report_;
};

std::string mode_columns(const char* prefix, int n) {
  std::string out;
  for (int k = 1; k <= n; ++k) out += fmt::format(",{}_{}", prefix, k);
  return out;
}

std::string values(const Field& x) {
  std::string out;
  for (double c : x.coeffs()) out += fmt::format(",{}", c);
  return out;
}

// ---------------------------------------------------------------------------

void run_fast(const ExperimentSpec& spec, const Setup& s, Artifacts& art,
              std::vector<std::string>& summary) {
  const auto rows = moment_profile(s.x0, s.y0, s.r, 2, spec.fast.T, spec.fast.dt,
                                   std::max(2, spec.sim.replicas), s.ns, spec.fast.record_every);
  auto out = art.open("fast.csv");
  art.provenance(out);
  out << "t,mean_sq_norm,std_error\n";
  for (const auto& row : rows) out << fmt::format("{},{},{}\n", row.t, row.moment, row.std_error);
  const double delta = s.r.dissipativity_gap();
  const double c = fit_moment_constant(rows, 2, delta, norm(s.x0), norm(s.y0));
  summary.push_back(fmt::format("delta = {}", delta));
  summary.push_back(fmt::format("E|v(T)|^2 = {} +/- {}", rows.back().moment, rows.back().std_error));
  summary.push_back(fmt::format("stationary OU reference sum 1/(2 alpha_k) = {}",
                                stationary_convolution_moment(s.r.spectrum())));
  summary.push_back(fmt::format("fitted second-moment envelope constant = {}", c));
}

void run_invariant(const ExperimentSpec& spec, const Setup& s, Artifacts& art,
                   std::vector<std::string>& summary) {
  const MeasureEstimate mu = estimate_measure(s.x0, s.r, spec.measure, s.ns);
  {
    auto out = art.open("invariant_samples.csv");
    write_measure_csv(out, mu, art.hash());
  }
  const ModeMoments mm = mode_moments(mu);
  auto out = art.open("invariant_moments.csv");
  art.provenance(out);
  out << "mode,mean,mean_std_error,variance,variance_std_error\n";
  for (std::size_t k = 0; k < mm.mean.size(); ++k) {
    out << fmt::format("{},{},{},{},{}\n", k + 1, mm.mean[k].value, mm.mean[k].std_error,
                       mm.variance[k].value, mm.variance[k].std_error);
  }
  const AveragedDrift F = averaged_drift(s.x0, s.r, mu);
  summary.push_back("estimator = " + to_string(mu.provenance));
  summary.push_back(fmt::format("samples = {}", mu.samples.size()));
  summary.push_back(fmt::format("effective sample size = {:.1f}", mu.diagnostics.effective_sample_size));
  if (!std::isnan(mu.diagnostics.acceptance_rate)) {
    summary.push_back(fmt::format("acceptance rate = {:.4f}, beta = {:.4f}",
                                  mu.diagnostics.acceptance_rate, mu.diagnostics.beta));
  }
  summary.push_back(fmt::format("|Fbar(x0)| = {}", norm(F.value)));
  for (const auto& w : mu.diagnostics.warnings) summary.push_back("warning: " + w);
}

void run_coupled_paths(const ExperimentSpec& spec, const Setup& s, Artifacts& art,
                       std::vector<std::string>& summary) {
  const auto reps = static_cast<std::size_t>(spec.sim.replicas);
  std::vector<CoupledPath> paths(reps);
  parallel_for(reps, [&](std::size_t rep) {
    paths[rep] = simulate_coupled(s.x0, s.y0, s.A, s.r, spec.sim, s.ns.for_replica(rep));
  });
  const int N = spec.sim.n_modes;
  auto out = art.open("coupled.csv");
  art.provenance(out);
  out << "replica,t,u_norm,v_norm" << mode_columns("u", N) << mode_columns("v", N) << '\n';
  double sup_u = 0.0;
  for (std::size_t rep = 0; rep < reps; ++rep) {
    const CoupledPath& p = paths[rep];
    for (std::size_t i = 0; i < p.times.size(); ++i) {
      sup_u = std::max(sup_u, norm(p.u_states[i]));
      out << fmt::format("{},{},{},{}", rep, p.times[i], norm(p.u_states[i]), norm(p.v_states[i]))
          << values(p.u_states[i]) << values(p.v_states[i]) << '\n';
    }
  }
  summary.push_back(fmt::format("replicas = {}, macro steps = {}, micro steps per macro step = {}",
                                reps, spec.sim.macro_steps(), spec.sim.micro_steps()));
  summary.push_back(fmt::format("max_t,replica |u| = {}", sup_u));
}

void run_average(const ExperimentSpec& spec, const Setup& s, Artifacts& art,
                 std::vector<std::string>& summary) {
  const auto fbar = make_drift_evaluator(s.r, spec.measure, drift_stream(s));
  const AveragedPath ubar = solve_averaged(s.x0, s.A, s.r, *fbar, spec.sim.T, spec.sim.dt_slow);
  auto out = art.open("average.csv");
  art.provenance(out);
  out << "t,drift_std_error,u_norm" << mode_columns("u", spec.sim.n_modes) << '\n';
  for (std::size_t i = 0; i < ubar.times.size(); ++i) {
    const std::string se = i < ubar.drift_std_error.size() ? fmt::format("{}", ubar.drift_std_error[i]) : "";
    out << fmt::format("{},{},{}", ubar.times[i], se, norm(ubar.states[i])) << values(ubar.states[i])
        << '\n';
  }
  summary.push_back("averaged drift = " + fbar->name());
  summary.push_back(fmt::format("measure samples per step = {}", ubar.samples_per_step));
  summary.push_back(fmt::format("|ubar(T)| = {}", norm(ubar.states.back())));
  for (const auto& w : ubar.warnings) summary.push_back("warning: " + w);
}

void run_converge(const ExperimentSpec& spec, const Setup& s, Artifacts& art,
                  std::vector<std::string>& summary) {
  const auto fbar = make_drift_evaluator(s.r, spec.measure, drift_stream(s));
  const AveragedPath ubar = solve_averaged(s.x0, s.A, s.r, *fbar, spec.sim.T, spec.sim.dt_slow);
  const auto rows = convergence_study(s.x0, s.y0, s.A, s.r, ubar, spec.sim, spec.study.eps_grid,
                                      s.ns, art.hash());
  auto out = art.open("convergence.csv");
  write_convergence_csv(out, rows);
  for (const auto& row : rows) {
    summary.push_back(fmt::format("eps = {}: P(sup|u - ubar| > {}) = {} [{}, {}], mean sup error {}",
                                  row.eps, spec.sim.eta, row.exceedance_prob, row.ci_low,
                                  row.ci_high, row.mean_sup_error));
  }
  summary.push_back(fmt::format("exceedance nonincreasing across the grid: {}",
                                exceedance_nonincreasing(rows) ? "yes" : "no"));
  for (const auto& w : ubar.warnings) summary.push_back("warning: " + w);
}

void run_remainder(const ExperimentSpec& spec, const Setup& s, Artifacts& art,
                   std::vector<std::string>& summary) {
  const auto fbar = make_drift_evaluator(s.r, spec.measure, drift_stream(s));
  const auto rows = remainder_study(s.x0, s.y0, s.h, s.A, s.r, *fbar, spec.sim,
                                    spec.study.eps_grid, s.ns, art.hash());
  auto out = art.open("remainder.csv");
  write_remainder_csv(out, rows);
  for (const auto& row : rows) {
    summary.push_back(fmt::format("eps = {}: sup_t E|R_h(t)| = {} +/- {} at t = {}", row.eps,
                                  row.sup_mean_abs, row.std_error, row.t_at_sup));
  }
  summary.push_back(fmt::format("strictly decreasing with separated 95% intervals: {}",
                                remainder_strictly_decreasing(rows) ? "yes" : "no"));
  const CorrectionEstimate phi =
      correction_estimate(s.x0, s.y0, s.h, spec.study.c_eps, s.r, *fbar, spec.study.T_cut,
                          spec.study.dt, spec.sim.replicas, s.ns.for_replica(std::uint64_t{1} << 41));
  summary.push_back(fmt::format("corrector Phi_h(x0, y0) at c = {}: {} +/- {} (tail bound {}{})",
                                spec.study.c_eps, phi.value, phi.std_error, phi.truncation_bound,
                                phi.truncation_dominated ? ", tail dominates: raise T_cut" : ""));
}

// ---------------------------------------------------------------------------

std::vector<ValidationCheck> validation_checks(const ExperimentSpec& spec, const Setup& s) {
  std::vector<ValidationCheck> checks;
  const ReactionSystem& r = s.r;
  const OperatorSpectrum& B = r.spectrum();
  const double lambda = B.spectral_gap();

  checks.push_back({"fast dissipativity L_g < lambda", r.lipschitz_g() < lambda, r.lipschitz_g(),
                    lambda, "hypothesis gate"});

  {
    Field y = s.y0;
    for (int k = 0; k < y.size(); ++k) y[k] += 0.3 / (k + 1);
    const auto [analytic, numeric] = potential_gradient_check(r, s.x0, y, Field::unit(B.basis(), 0));
    const double err = std::abs(analytic - numeric);
    checks.push_back({"gradient structure <G, e_1> = dU/dy", err <= 1e-6 * (1.0 + std::abs(analytic)),
                      analytic, numeric, "central difference, tau = 1e-4"});
  }

  {
    const Field z = s.y0 + Field::unit(B.basis(), 0);
    const double dt = std::min(spec.fast.dt, max_fast_step(r));
    const double T = std::min(spec.fast.T, 10.0);
    const ContractionFit fit = contraction_estimate(s.x0, s.y0, z, r, T, dt, s.ns);
    const double bound = lambda - r.lipschitz_g();
    checks.push_back({"synchronous contraction rate >= lambda - L_g",
                      fit.rate >= bound * (1.0 - 1e-3), fit.rate, bound, "log-linear fit"});
  }

  {
    const MeasureEstimate pcn = pcn_measure(s.x0, r, spec.measure.pcn, s.ns.for_replica(1));
    const ModeMoments a = mode_moments(pcn);
    if (ClosedFormDrift::supports(r) && r.g().is_affine()) {
      const ClosedFormDrift cf(r);
      const Field m = cf.gaussian_mean(s.x0);
      const auto var = cf.gaussian_variance();
      double worst = 0.0;
      for (int k = 0; k < m.size(); ++k) {
        worst = std::max(worst, std::abs(a.mean[k].value - m[k]) / a.mean[k].std_error);
        worst = std::max(worst, std::abs(a.variance[k].value - var[k]) / a.variance[k].std_error);
      }
      checks.push_back({"pCN moments match the Gaussian invariant measure", worst <= 4.0, worst, 4.0,
                        "largest standardized deviation over modes"});
    } else {
      ErgodicConfig ecfg = spec.measure.ergodic;
      const MeasureEstimate erg = ergodic_measure(s.x0, s.y0, r, ecfg, s.ns.for_replica(2));
      const ModeMoments b = mode_moments(erg);
      double worst = 0.0;
      for (std::size_t k = 0; k < a.mean.size(); ++k) {
        const double se = std::hypot(a.mean[k].std_error, b.mean[k].std_error);
        worst = std::max(worst, std::abs(a.mean[k].value - b.mean[k].value) / se);
      }
      checks.push_back({"pCN and ergodic mode means agree", worst <= 4.0, worst, 4.0,
                        "largest joint standardized deviation over modes"});
    }
  }

  if (!r.f().depends_on_fast()) {
    const ClosedFormDrift fbar(r);
    const AveragedPath ubar = solve_averaged(s.x0, s.A, r, fbar, spec.sim.T, spec.sim.dt_slow);
    bool identical = true;
    for (double eps : spec.study.eps_grid) {
      SimConfig cfg = spec.sim;
      cfg.eps = eps;
      const CoupledPath p = simulate_coupled(s.x0, s.y0, s.A, r, cfg, s.ns);
      identical = identical && p.u_states == ubar.states;
    }
    checks.push_back({"decoupled slow path equals the averaged path bit for bit", identical,
                      identical ? 0.0 : 1.0, 0.0, "every eps of the study grid"});
  } else if (ClosedFormDrift::supports(r)) {
    const ClosedFormDrift exact(r);
    const AveragedDrift mc = averaged_drift(s.x0, r, spec.measure, drift_stream(s));
    const Field ref = exact.evaluate(s.x0).value;
    double worst = 0.0;
    for (int k = 0; k < ref.size(); ++k) {
      if (mc.std_error[k] > 0.0) worst = std::max(worst, std::abs(mc.value[k] - ref[k]) / mc.std_error[k]);
    }
    checks.push_back({"Monte Carlo averaged drift matches the closed form", worst <= 4.0, worst, 4.0,
                      "largest standardized deviation over modes"});
  }
  return checks;
}

void run_validate(const ExperimentSpec& spec, const Setup& s, Artifacts& art,
                  std::vector<std::string>& summary, RunReport& report) {
  report.checks = validation_checks(spec, s);
  auto out = art.open("validate.csv");
  art.provenance(out);
  out << "check,passed,value,reference,detail\n";
  for (const auto& c : report.checks) {
    out << fmt::format("\"{}\",{},{},{},\"{}\"\n", c.name, c.passed ? 1 : 0, c.value, c.reference,
                       c.detail);
    summary.push_back(fmt::format("[{}] {} (value {}, reference {})", c.passed ? "PASS" : "FAIL",
                                  c.name, c.value, c.reference));
    if (!c.passed) report.exit_code = kExitValidate;
  }
}

}  // namespace

RunReport run_experiment(const ExperimentSpec& spec, std::ostream& log) {
  RunReport report;
  report.spec_hash = spec_hash(spec);
  try {
    spec.sim.validate();
    const Setup setup = build_setup(spec);
    Artifacts art(spec, report.spec_hash, report);
    std::vector<std::string> summary{
        "experiment: " + to_string(spec.experiment),
        "name: " + spec.name,
        "spec_hash: " + report.spec_hash,
        fmt::format("seed: {}", spec.sim.seed),
        fmt::format("system: f = {}; g = {}", spec.system.f.to_string(), spec.system.g.to_string()),
        fmt::format("lambda = {}, L_f = {}, L_g = {}, delta = {}", setup.r.spectrum().spectral_gap(),
                    setup.r.lipschitz_f(), setup.r.lipschitz_g(), setup.r.dissipativity_gap()),
    };
    switch (spec.experiment) {
      case ExperimentKind::Validate: run_validate(spec, setup, art, summary, report); break;
      case ExperimentKind::Fast: run_fast(spec, setup, art, summary); break;
      case ExperimentKind::Invariant: run_invariant(spec, setup, art, summary); break;
      case ExperimentKind::Coupled: run_coupled_paths(spec, setup, art, summary); break;
      case ExperimentKind::Average: run_average(spec, setup, art, summary); break;
      case ExperimentKind::Converge: run_converge(spec, setup, art, summary); break;
      case ExperimentKind::Remainder: run_remainder(spec, setup, art, summary); break;
    }
    auto out = art.open("summary.txt");
    for (const auto& line : summary) {
      out << line << '\n';
      log << line << '\n';
    }
  } catch (const HypothesisViolation& e) {
    report.exit_code = kExitHypothesis;
    report.message = std::string("hypothesis violated: ") + e.what();
  } catch (const ConfigError& e) {
    report.exit_code = kExitConfig;
    report.message = std::string("configuration error: ") + e.what();
  } catch (const std::invalid_argument& e) {
    report.exit_code = kExitConfig;
    report.message = std::string("invalid configuration: ") + e.what();
  }
  return report;
}

}  // namespace slowfast

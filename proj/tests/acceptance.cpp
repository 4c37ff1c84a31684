// Acceptance run: one PASS/FAIL line per criterion, nonzero exit on failure.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "slowfast/errors.hpp"
#include "slowfast/fast_dynamics.hpp"
#include "slowfast/invariant_measure.hpp"
#include "slowfast/multiscale.hpp"
#include "slowfast/parallel.hpp"
#include "slowfast/runner.hpp"

using namespace slowfast;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

OperatorSpectrum dirichlet_pi(int N) {
  return OperatorSpectrum::build(std::numbers::pi, {BoundaryKind::Dirichlet, 1.0, 0.0}, N);
}

ReactionSystem system(const std::string& f, const std::string& g, const OperatorSpectrum& S) {
  return ReactionSystem::make(ReactionFunction::parse(f), ReactionFunction::parse(g), S);
}

constexpr const char* kLinearG = "linear_damped(a=0.5) + constant(c=1)";
constexpr const char* kNonlinearG =
    "linear_damped(a=0.2) + tanh_fast(b=0.3) + tanh_slow(b=0.5) + constant(c=1)";

PcnConfig pcn(int samples, int burn_in = 5000) {
  PcnConfig c;
  c.n_samples = samples;
  c.burn_in = burn_in;
  return c;
}

// Largest |a - b| / sqrt(se_a^2 + se_b^2); reference values carry zero error.
struct Deviation {
  double worst = 0.0;
  void add(const Estimate& a, const Estimate& b) {
    worst = std::max(worst, std::abs(a.value - b.value) / std::hypot(a.std_error, b.std_error));
  }
};

Outcome hypothesis_gate() {
  const auto S = dirichlet_pi(8);
  bool rejected = false;
  std::string named;
  try {
    system("zero", "linear_fast(b=-1)", S);
  } catch (const HypothesisViolation& e) {
    rejected = true;
    named = e.hypothesis();
  }
  const auto ok = system("zero", "linear_damped(a=0.5)", S);
  const double delta = ok.dissipativity_gap();
  const bool passed = rejected && named.find("L_g < lambda") != std::string::npos &&
                      std::abs(S.spectral_gap() - 1.0) < 1e-12 && std::abs(delta - 0.25) < 1e-12;
  return {passed, fmt::format("L_g = lambda rejected as '{}'; g = -s2/2 gives delta = {}", named, delta)};
}

Outcome gaussian_reference() {
  const int N = 8;
  const auto S = dirichlet_pi(N);
  const auto r = system("zero", "zero", S);
  const auto mu = pcn_measure(S.zeros(), r, pcn(100000), NoiseStream(1, 0, N));
  const auto m = mode_moments(mu);
  Deviation dev;
  for (int k = 0; k < N; ++k) dev.add(m.variance[k], {1.0 / (2.0 * S.eigenvalue(k)), 0.0});
  return {dev.worst <= 4.0 && mu.samples.size() >= 100000,
          fmt::format("{} samples, largest variance deviation {:.2f} SE (limit 4)", mu.samples.size(),
                      dev.worst)};
}

Outcome gibbs_vs_ergodic() {
  const int N = 8;
  const auto S = dirichlet_pi(N);
  ErgodicConfig ec;
  ec.T_sample = 5000.0;
  ec.dt = 0.01;
  ec.thin = 20;

  const auto lin = system("zero", kLinearG, S);
  const auto erg = ergodic_measure(S.zeros(), S.zeros(), lin, ec, NoiseStream(2, 0, N));
  const auto pc = pcn_measure(S.zeros(), lin, pcn(100000), NoiseStream(3, 0, N));
  Deviation oracle;
  for (const auto* mu : {&erg, &pc}) {
    const auto m = mode_moments(*mu);
    for (int k = 0; k < N; ++k) {
      const double a = S.eigenvalue(k) + 0.5;
      oracle.add(m.mean[k], {S.unit_coefficient(k) / a, 0.0});
      oracle.add(m.variance[k], {1.0 / (2.0 * a), 0.0});
    }
  }

  const auto nl = system("zero", kNonlinearG, S);
  const Field x = S.make_field({0.7, -0.4});
  const auto a = mode_moments(ergodic_measure(x, S.zeros(), nl, ec, NoiseStream(4, 0, N)));
  const auto b = mode_moments(pcn_measure(x, nl, pcn(100000), NoiseStream(5, 0, N)));
  Deviation mutual;
  for (int k = 0; k < N; ++k) {
    mutual.add(a.mean[k], b.mean[k]);
    mutual.add(a.variance[k], b.variance[k]);
  }
  return {oracle.worst <= 3.0 && mutual.worst <= 3.0,
          fmt::format("linear vs closed form {:.2f} sigma, nonlinear ergodic vs pCN {:.2f} sigma (limit 3)",
                      oracle.worst, mutual.worst)};
}

Outcome contraction_and_mixing() {
  const int N = 8;
  const auto S = dirichlet_pi(N);
  const Field y = S.make_field({2.0, -1.0, 0.5}), z = S.make_field({-1.0, 0.5});

  const auto lin = system("zero", "linear_damped(a=0.5)", S);
  const auto lin_fit = contraction_estimate(S.zeros(), y, z, lin, 10.0, 0.05, NoiseStream(6, 0, N));
  const bool lin_ok = std::abs(lin_fit.rate - (S.eigenvalue(0) + 0.5)) < 1e-6;

  const auto nl = system("zero", kNonlinearG, S);
  const double bound = S.spectral_gap() - nl.lipschitz_g();
  const Field x = S.make_field({0.7, -0.4});
  const auto nl_fit = contraction_estimate(x, y, z, nl, 10.0, 0.02, NoiseStream(7, 0, N));

  const Functional phi = Functional::linear(Field::unit(S.basis(), 0));
  const auto mu = pcn_measure(x, nl, pcn(100000), NoiseStream(8, 0, N));
  const Estimate mu_phi = measure_expectation(mu, [&](const Field& v) { return phi(v); });
  const std::vector<double> t_grid{0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5, 3.0};
  const auto mix = mixing_rate(x, S.make_field({6.0}), phi, nl, t_grid, 0.02, 4000, mu_phi,
                               NoiseStream(9, 0, N));
  const double delta = nl.dissipativity_gap();
  const bool mix_ok = !mix.below_noise_floor && mix.rate >= 0.9 * delta;
  return {lin_ok && nl_fit.rate >= bound && mix_ok,
          fmt::format("linear rate {:.9f} (exact 1.5); nonlinear rate {:.4f} >= lambda - L_g = {:.4f}; "
                      "mixing rate {:.4f} >= 0.9 delta = {:.4f}",
                      lin_fit.rate, nl_fit.rate, bound, mix.rate, 0.9 * delta)};
}

Outcome moment_envelopes() {
  const int N = 8;
  const auto S = dirichlet_pi(N);
  const auto r = system("zero", kNonlinearG, S);
  const double delta = r.dissipativity_gap();
  std::string detail;
  bool passed = true;
  for (int p : {1, 2, 4}) {
    const Field x1 = S.make_field({0.5}), y1 = S.make_field({4.0, 1.0});
    const auto fit = moment_profile(x1, y1, r, p, 10.0, 0.05, 1000, NoiseStream(10, 0, N), 10);
    const double c = fit_moment_constant(fit, p, delta, norm(x1), norm(y1));
    const Field x2 = S.make_field({2.0, 1.0}), y2 = S.make_field({-8.0, 0.0, 3.0});
    const auto held = moment_profile(x2, y2, r, p, 10.0, 0.05, 1000, NoiseStream(11, 0, N), 10);
    const bool ok = moment_envelope_holds(held, p, delta, norm(x2), norm(y2), c, 0.05);
    passed = passed && ok;
    detail += fmt::format("fast p={} c={:.3f} {}; ", p, c, ok ? "holds" : "violated");
  }

  const auto rs = system("zero", "linear_damped(a=0.3) + linear_slow(b=0.5) + tanh_fast(b=0.2)", S);
  MeasureConfig mc;
  mc.pcn = pcn(20000);
  auto grid = [&](std::initializer_list<double> scales) {
    std::vector<Field> xs;
    for (double s : scales) xs.push_back(S.make_field({s, 0.5 * s, -0.25 * s}));
    return xs;
  };
  for (int p : {1, 2, 4}) {
    const auto fit = measure_moment_growth(rs, grid({0.0, 1.0, 2.0, 4.0, 8.0}), p, mc, NoiseStream(12, 0, N));
    const double c = fit_growth_constant(fit, p);
    const auto held = measure_moment_growth(rs, grid({0.5, 3.0, 6.0}), p, mc, NoiseStream(13, 0, N));
    const bool ok = growth_envelope_holds(held, p, c, 0.05);
    passed = passed && ok;
    detail += fmt::format("measure p={} c={:.3f} {}; ", p, c, ok ? "holds" : "violated");
  }
  detail.resize(detail.size() - 2);
  return {passed, detail};
}

Outcome drift_gradient() {
  const int N = 8;
  const auto S = dirichlet_pi(N);
  const auto r = system("sin_sum(b=1) + linear_fast(b=0.5)", kNonlinearG, S);
  const Field x = S.make_field({0.6, -0.3, 0.2});
  Field k = S.make_field({1.0, 0.5, 0.0, -0.25});
  k *= 1.0 / norm(k);
  const Field h = S.make_field({1.0, 0.5, 0.25});

  // Adapt beta once, then freeze it so the finite-difference chains share every draw.
  PcnConfig cfg = pcn(1000000, 10000);
  const auto pilot = pcn_measure(x, r, pcn(1000, 10000), NoiseStream(14, 0, N));
  cfg.adapt = false;
  cfg.beta = pilot.diagnostics.beta;
  const NoiseStream ns(15, 0, N);
  const auto mu = pcn_measure(x, r, cfg, ns);
  const auto grad = averaged_drift_gradient(x, k, h, r, mu);

  const double tau = 1e-2;
  const auto plus = averaged_drift(x + tau * k, r, pcn_measure(x + tau * k, r, cfg, ns));
  const auto minus = averaged_drift(x - tau * k, r, pcn_measure(x - tau * k, r, cfg, ns));
  const double fd = (inner(plus.value, h) - inner(minus.value, h)) / (2.0 * tau);
  const double rel = std::abs(grad.value - fd) / std::abs(fd);
  return {rel < 0.03 && mu.samples.size() >= 100000,
          fmt::format("formula {:.5f} +- {:.5f}, CRN finite difference {:.5f}, relative error {:.4f} (limit 0.03)",
                      grad.value, grad.std_error, fd, rel)};
}

// Coupled system with an exactly known averaged drift: g affine, f linear in
// the fast argument.
constexpr const char* kCoupledF = "linear_fast(b=1) + sin_slow(b=0.5)";
constexpr const char* kCoupledG = "linear_damped(a=0.5) + linear_slow(b=0.5) + constant(c=1)";

SimConfig study_config() {
  SimConfig c;
  c.T = 1.0;
  c.dt_slow = 0.01;
  c.dt_fast = 0.05;
  c.n_modes = 8;
  c.replicas = 200;
  c.eta = 0.1;
  return c;
}

Outcome remainder_decay() {
  const int N = 8;
  const auto S = dirichlet_pi(N);
  const auto r = system(kCoupledF, kCoupledG, S);
  const ClosedFormDrift fbar(r);
  const auto rows = remainder_study(S.make_field({1.0, 0.5}), S.zeros(), S.make_field({1.0, 0.5}), S, r,
                                    fbar, study_config(), {1.0, 0.1, 0.01}, NoiseStream(16, 0, N), "acceptance");
  std::string detail;
  for (const auto& row : rows) {
    detail += fmt::format("eps={}: {:.4f} +- {:.4f}; ", row.eps, row.sup_mean_abs, 1.96 * row.std_error);
  }
  detail.resize(detail.size() - 2);
  return {rows.size() == 3 && rows[0].replica_count >= 200 && remainder_strictly_decreasing(rows, 1.96),
          detail};
}

Outcome averaging_convergence() {
  const int N = 8;
  const auto S = dirichlet_pi(N);
  const Field x0 = S.make_field({1.0, 0.5});
  const SimConfig base = study_config();
  const std::vector<double> eps_grid{1.0, 0.1, 0.01};

  const auto r = system(kCoupledF, kCoupledG, S);
  const auto ubar = solve_averaged(x0, S, r, ClosedFormDrift(r), base.T, base.dt_slow);
  const auto rows = convergence_study(x0, S.zeros(), S, r, ubar, base, eps_grid, NoiseStream(17, 0, N), "acceptance");
  std::string detail;
  for (const auto& row : rows) {
    detail += fmt::format("eps={}: P={:.3f} [{:.3f}, {:.3f}]; ", row.eps, row.exceedance_prob, row.ci_low,
                          row.ci_high);
  }

  const auto d = system("sin_slow(b=1) + constant(c=0.5)", kNonlinearG, S);
  const auto dbar = solve_averaged(x0, S, d, ClosedFormDrift(d), base.T, base.dt_slow);
  bool exact = true;
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    SimConfig c = base;
    c.eps = eps_grid[i];
    for (int rep = 0; rep < 20; ++rep) {
      const auto path = simulate_coupled(x0, S.make_field({1.0}), S, d, c, NoiseStream(18, 0, N).for_replica(rep));
      exact = exact && path.u_states == dbar.states;
    }
  }
  const auto drows = convergence_study(x0, S.zeros(), S, d, dbar, base, eps_grid, NoiseStream(19, 0, N), "acceptance");
  for (const auto& row : drows) exact = exact && row.mean_sup_error == 0.0 && row.exceedance_prob == 0.0;
  detail += fmt::format("decoupled error identically zero: {}", exact ? "yes" : "no");
  return {rows.size() == 3 && rows[0].replica_count >= 200 && exceedance_strictly_decreasing(rows) && exact,
          detail};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome reproducibility() {
  const char* base = R"yaml(
sim: {n_modes: 4, replicas: 12, T: 0.2, seed: 77}
system:
  f: "tanh_product(b=1) + sin_slow(b=0.5)"
  g: "linear_damped(a=0.2) + tanh_fast(b=0.3) + tanh_slow(b=0.5) + constant(c=1)"
initial: {x0: [1, 0.5], y0: [0.5]}
study: {eps_grid: [0.5, 0.1], T_cut: 2, dt: 0.05}
measure:
  pcn: {samples: 500, burn_in: 500}
  ergodic: {T_sample: 50, dt: 0.05}
fast: {T: 2, dt: 0.05}
)yaml";
  const fs::path root = fs::temp_directory_path() / "slowfast_acceptance_repro";
  fs::remove_all(root);
  int compared = 0;
  std::string failures;
  for (const auto kind : {ExperimentKind::Fast, ExperimentKind::Invariant, ExperimentKind::Coupled,
                          ExperimentKind::Average, ExperimentKind::Converge, ExperimentKind::Remainder}) {
    ExperimentSpec spec = parse_config(base);
    spec.experiment = kind;
    std::ostringstream log;
    std::vector<fs::path> dirs;
    for (int threads : {1, 3}) {
      set_worker_threads(threads);
      spec.output = (root / fmt::format("{}_{}", to_string(kind), threads)).string();
      const RunReport rep = run_experiment(spec, log);
      if (rep.exit_code != kExitOk) failures += fmt::format("{} exited {} ({}); ", to_string(kind), rep.exit_code, rep.message);
      dirs.emplace_back(spec.output);
    }
    set_worker_threads(1);
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      if (entry.path().extension() != ".csv") continue;
      ++compared;
      if (slurp(entry.path()) != slurp(dirs[1] / entry.path().filename())) {
        failures += fmt::format("{} differs; ", entry.path().filename().string());
      }
    }
  }
  fs::remove_all(root);
  return {failures.empty() && compared >= 6,
          failures.empty() ? fmt::format("{} CSV files byte-identical across reruns and thread counts", compared)
                           : failures};
}

struct Criterion {
  int id;
  const char* title;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "hypothesis gate", 1.0, hypothesis_gate},
      {2, "Gaussian reference measure under pCN", 60.0, gaussian_reference},
      {3, "Gibbs and ergodic estimators agree", 300.0, gibbs_vs_ergodic},
      {4, "contraction and mixing rates", 120.0, contraction_and_mixing},
      {5, "moment envelopes on held-out configurations", 300.0, moment_envelopes},
      {6, "averaged-drift gradient vs finite difference", 300.0, drift_gradient},
      {7, "remainder decays with eps", 600.0, remainder_decay},
      {8, "averaging: exceedance probability decreases with eps", 900.0, averaging_convergence},
      {9, "byte-identical reruns", 60.0, reproducibility},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = seconds < c.budget_seconds;
    const bool passed = out.passed && in_time;
    failed += passed ? 0 : 1;
    fmt::print("criterion {}: {}  {} | {} | {:.2f} s (budget {} s)\n", c.id, passed ? "PASS" : "FAIL", c.title,
               out.detail, seconds, c.budget_seconds);
    std::fflush(stdout);
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}

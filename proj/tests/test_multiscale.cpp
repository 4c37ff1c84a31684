#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "slowfast/multiscale.hpp"

using namespace slowfast;

namespace {

OperatorSpectrum dirichlet_pi(int N) {
  return OperatorSpectrum::build(std::numbers::pi, {BoundaryKind::Dirichlet, 1.0, 0.0}, N);
}

ReactionSystem system(const std::string& f, const std::string& g, const OperatorSpectrum& S) {
  return ReactionSystem::make(ReactionFunction::parse(f), ReactionFunction::parse(g), S);
}

SimConfig sim(double eps, double T, int replicas = 1) {
  SimConfig c;
  c.eps = eps;
  c.T = T;
  c.dt_slow = 0.01;
  c.dt_fast = 0.05;
  c.replicas = replicas;
  return c;
}

constexpr const char* kLinearG = "linear_damped(a=0.5) + constant(c=1)";

}  // namespace

TEST(SimConfig, StepCounts) {
  SimConfig c = sim(0.1, 1.0);
  EXPECT_EQ(c.macro_steps(), 100u);
  EXPECT_DOUBLE_EQ(c.macro_step(), 0.01);
  EXPECT_EQ(c.micro_steps(), 2u);
  c.dt_slow = 0.3;
  EXPECT_EQ(c.macro_steps(), 4u);
  EXPECT_DOUBLE_EQ(c.macro_step(), 0.25);
  c.eps = 100.0;
  EXPECT_EQ(c.micro_steps(), 1u);
  c.eps = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c = sim(0.1, 1.0);
  c.replicas = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(Coupled, RejectsMismatchedEigenbases) {
  const auto A = OperatorSpectrum::build(std::numbers::pi, {BoundaryKind::ShiftedNeumann, 1.0, 1.0}, 4);
  const auto B = dirichlet_pi(4);
  const auto r = system("zero", kLinearG, B);
  EXPECT_THROW(simulate_coupled(A.zeros(), B.zeros(), A, r, sim(0.1, 0.1), NoiseStream(1, 0, 4)),
               std::invalid_argument);
}

TEST(Coupled, ZeroReactionFollowsSemigroup) {
  const auto S = dirichlet_pi(6);
  const auto r = system("zero", kLinearG, S);
  const Field x0 = S.make_field({1.0, -2.0, 0.5, 0.25});
  const auto path = simulate_coupled(x0, S.zeros(), S, r, sim(0.1, 1.0), NoiseStream(1, 0, 6));
  ASSERT_EQ(path.times.size(), 101u);
  ASSERT_EQ(path.slow_drift.size(), 100u);
  for (std::size_t n = 0; n < path.times.size(); ++n) {
    const Field ref = apply_semigroup(S, x0, path.times[n]);
    for (int k = 0; k < 6; ++k) EXPECT_NEAR(path.u_states[n][k], ref[k], 1e-12);
  }
}

TEST(Coupled, SlowLinearReactionIsExact) {
  const auto S = dirichlet_pi(4);
  const auto r = system("linear_slow(b=1)", kLinearG, S);
  const Field x0 = S.make_field({1.0, 1.0, 1.0, 1.0});
  const auto path = simulate_coupled(x0, S.zeros(), S, r, sim(0.1, 0.5), NoiseStream(2, 0, 4));
  for (std::size_t n = 0; n < path.times.size(); ++n) {
    for (int k = 0; k < 4; ++k) {
      const double ref = std::exp((1.0 - S.eigenvalue(k)) * path.times[n]);
      EXPECT_NEAR(path.u_states[n][k], ref, 1e-12 * (1.0 + ref));
    }
  }
}

TEST(Coupled, DecoupledSlowPathIsEpsIndependentAndMatchesAveraged) {
  const auto S = dirichlet_pi(6);
  const auto r = system("sin_slow(b=1) + constant(c=0.5)",
                        "linear_damped(a=0.2) + tanh_slow(b=0.5) + tanh_fast(b=0.3)", S);
  const Field x0 = S.make_field({1.0, 0.3});
  const ClosedFormDrift fbar(r);
  const auto avg = solve_averaged(x0, S, r, fbar, 1.0, 0.01);
  for (double eps : {1.0, 0.1, 0.01}) {
    const auto path = simulate_coupled(x0, S.make_field({2.0}), S, r, sim(eps, 1.0), NoiseStream(3, 0, 6));
    ASSERT_EQ(path.u_states.size(), avg.states.size());
    for (std::size_t n = 0; n < path.u_states.size(); ++n) ASSERT_EQ(path.u_states[n], avg.states[n]);
  }
}

TEST(Coupled, ReproducibleAndObserverSeesSamePath) {
  const auto S = dirichlet_pi(4);
  const auto r = system("tanh_product(b=1)", kLinearG, S);
  const Field x0 = S.make_field({0.5});
  const auto a = simulate_coupled(x0, S.zeros(), S, r, sim(0.1, 0.2), NoiseStream(4, 2, 4));
  const auto b = simulate_coupled(x0, S.zeros(), S, r, sim(0.1, 0.2), NoiseStream(4, 2, 4));
  std::vector<Field> seen;
  run_coupled(x0, S.zeros(), S, r, sim(0.1, 0.2), NoiseStream(4, 2, 4),
              [&](std::uint64_t n, const Field& u, const Field& v, const Field&) {
                EXPECT_EQ(n, seen.size());
                seen.push_back(u);
                EXPECT_EQ(v, a.v_states[n + 1]);
              });
  ASSERT_EQ(seen.size() + 1, a.u_states.size());
  for (std::size_t n = 0; n < a.u_states.size(); ++n) {
    EXPECT_EQ(a.u_states[n], b.u_states[n]);
    EXPECT_EQ(a.v_states[n], b.v_states[n]);
    if (n > 0) {
      EXPECT_EQ(seen[n - 1], a.u_states[n]);
    }
  }
}

TEST(Coupled, FastComponentHasStationaryVariance) {
  const int N = 4;
  const auto S = dirichlet_pi(N);
  const auto r = system("zero", "linear_damped(a=0.5)", S);
  const int reps = 3000;
  std::vector<std::vector<double>> sq(N, std::vector<double>(reps));
  const NoiseStream ns(5, 0, N);
  for (int rep = 0; rep < reps; ++rep) {
    const auto path = simulate_coupled(S.zeros(), S.zeros(), S, r, sim(0.05, 0.5), ns.for_replica(rep));
    for (int k = 0; k < N; ++k) sq[k][rep] = path.v_states.back()[k] * path.v_states.back()[k];
  }
  for (int k = 0; k < N; ++k) {
    const Estimate e = iid_mean(sq[k]);
    EXPECT_LT(std::abs(e.value - 1.0 / (2.0 * (S.eigenvalue(k) + 0.5))), 4.0 * e.std_error) << k;
  }
}

TEST(ClosedForm, SupportAndGaussianMoments) {
  const auto S = dirichlet_pi(4);
  EXPECT_TRUE(ClosedFormDrift::supports(system("sin_slow(b=1)", "linear_damped(a=0.2) + tanh_fast(b=0.3)", S)));
  EXPECT_TRUE(ClosedFormDrift::supports(system("linear_fast(b=1) + sin_slow(b=1)", kLinearG, S)));
  EXPECT_FALSE(ClosedFormDrift::supports(system("tanh_fast(b=1)", kLinearG, S)));
  EXPECT_FALSE(ClosedFormDrift::supports(system("linear_fast(b=1)", "linear_damped(a=0.2) + tanh_fast(b=0.3)", S)));

  const auto r = system("linear_fast(b=1)", "linear_damped(a=0.5) + linear_slow(b=0.3) + constant(c=1)", S);
  const ClosedFormDrift d(r);
  const Field x = S.make_field({1.0, 2.0});
  const Field m = d.gaussian_mean(x);
  const auto var = d.gaussian_variance();
  for (int k = 0; k < 4; ++k) {
    const double a = S.eigenvalue(k) + 0.5;
    EXPECT_NEAR(m[k], (S.unit_coefficient(k) + 0.3 * x[k]) / a, 1e-14);
    EXPECT_NEAR(var[k], 1.0 / (2.0 * a), 1e-15);
  }
  const auto out = d.evaluate(x);
  for (int k = 0; k < 4; ++k) {
    EXPECT_NEAR(out.value[k], m[k], 1e-14);
    EXPECT_EQ(out.std_error[k], 0.0);
  }
}

TEST(Averaged, ConstantDriftHasClosedFormSolution) {
  const int N = 5;
  const auto S = dirichlet_pi(N);
  const auto r = system("linear_fast(b=1)", kLinearG, S);
  const Field x0 = S.make_field({1.0, -1.0});
  const auto path = solve_averaged(x0, S, r, ClosedFormDrift(r), 2.0, 0.1);
  ASSERT_EQ(path.times.size(), 21u);
  for (std::size_t n = 0; n < path.times.size(); ++n) {
    const double t = path.times[n];
    for (int k = 0; k < N; ++k) {
      const double a = S.eigenvalue(k), m = S.unit_coefficient(k) / (a + 0.5);
      const double ref = std::exp(-a * t) * x0[k] - std::expm1(-a * t) / a * m;
      EXPECT_NEAR(path.states[n][k], ref, 1e-13);
    }
  }
  EXPECT_TRUE(path.warnings.empty());
}

TEST(Averaged, MonteCarloDriftAgreesWithClosedForm) {
  const int N = 4;
  const auto S = dirichlet_pi(N);
  const auto r = system("linear_fast(b=1)", "linear_damped(a=0.5) + linear_slow(b=0.3) + constant(c=1)", S);
  MeasureConfig mc;
  mc.pcn.n_samples = 20000;
  mc.pcn.burn_in = 2000;
  const MonteCarloDrift mcd(r, mc, NoiseStream(6, 0, N));
  const ClosedFormDrift cf(r);
  const Field x = S.make_field({0.5, 0.5});
  const auto a = mcd.evaluate(x), b = cf.evaluate(x);
  for (int k = 0; k < N; ++k) EXPECT_LT(std::abs(a.value[k] - b.value[k]), 4.0 * a.std_error[k]) << k;
  EXPECT_EQ(mcd.budget(), 20000u);
  const auto again = mcd.evaluate(x);
  EXPECT_EQ(again.value, a.value);  // same stream at every x
}

TEST(Averaged, CachedDriftReusesNearbyEstimates) {
  const auto S = dirichlet_pi(4);
  const auto r = system("linear_fast(b=1)", kLinearG, S);
  const ClosedFormDrift cf(r);
  const CachedDrift cache(cf, 0.01);
  const Field x = S.make_field({1.0});
  const auto a = cache.evaluate(x);
  const auto b = cache.evaluate(x + S.make_field({0.001}));
  EXPECT_EQ(cache.evaluations(), 1u);
  EXPECT_EQ(a.value, b.value);
  cache.evaluate(x + S.make_field({1.0}));
  EXPECT_EQ(cache.evaluations(), 2u);
}

TEST(Remainder, VanishesForFastFreeReaction) {
  const auto S = dirichlet_pi(4);
  const auto r = system("sin_slow(b=1)", kLinearG, S);
  const auto path = simulate_coupled(S.make_field({1.0}), S.zeros(), S, r, sim(0.1, 0.5), NoiseStream(7, 0, 4));
  const auto R = remainder_series(path, S.make_field({1.0, 1.0}), ClosedFormDrift(r));
  ASSERT_EQ(R.size(), path.times.size());
  for (double v : R) EXPECT_EQ(v, 0.0);
}

TEST(Remainder, ShrinksWithEps) {
  const int N = 4;
  const auto S = dirichlet_pi(N);
  const auto r = system("linear_fast(b=1)", kLinearG, S);
  SimConfig base = sim(1.0, 0.5, 200);
  const auto rows = remainder_study(S.make_field({1.0}), S.zeros(), S.make_field({1.0}), S, r,
                                    ClosedFormDrift(r), base, {0.5, 0.05}, NoiseStream(8, 0, N), "h");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].replica_count, 200);
  EXPECT_EQ(rows[0].config_hash, "h");
  EXPECT_TRUE(remainder_strictly_decreasing(rows));
  // The remainder scales like sqrt(eps) for a linear fast dependence.
  EXPECT_NEAR(rows[0].sup_mean_abs / rows[1].sup_mean_abs, std::sqrt(10.0), 1.0);
}

TEST(Remainder, DecreaseCheckUsesStandardErrors) {
  std::vector<RemainderRow> rows(2);
  rows[0].sup_mean_abs = 1.0;
  rows[0].std_error = 0.1;
  rows[1].sup_mean_abs = 0.5;
  rows[1].std_error = 0.1;
  EXPECT_TRUE(remainder_strictly_decreasing(rows));
  rows[1].std_error = 0.2;
  EXPECT_FALSE(remainder_strictly_decreasing(rows));
}

TEST(Correction, LinearCaseMatchesResolvent) {
  const int N = 4;
  const auto S = dirichlet_pi(N);
  const auto r = system("linear_fast(b=1)", kLinearG, S);
  const Field x = S.zeros(), y = S.make_field({2.0, -1.0, 0.5});
  const Field h = S.make_field({1.0, 0.5, 0.25, 0.125});
  const double c = 1.0;
  const auto est = correction_estimate(x, y, h, c, r, ClosedFormDrift(r), 20.0, 0.01, 2000, NoiseStream(9, 0, N));
  double ref = 0.0;
  for (int k = 0; k < N; ++k) {
    const double a = S.eigenvalue(k) + 0.5;
    ref += h[k] * (y[k] - S.unit_coefficient(k) / a) / (c + a);
  }
  EXPECT_LT(std::abs(est.value - ref), 4.0 * est.std_error + est.truncation_bound + 1e-3)
      << est.value << " vs " << ref;
  EXPECT_FALSE(est.truncation_dominated);
}

TEST(Correction, ZeroForFastFreeReaction) {
  const auto S = dirichlet_pi(4);
  const auto r = system("sin_slow(b=1)", kLinearG, S);
  const auto est = correction_estimate(S.make_field({1.0}), S.make_field({1.0}), S.make_field({1.0}), 1.0, r,
                                       ClosedFormDrift(r), 10.0, 0.01, 10, NoiseStream(1, 0, 4));
  EXPECT_EQ(est.value, 0.0);
  EXPECT_EQ(est.std_error, 0.0);
}

TEST(Correction, ConstantFitIsTight) {
  std::vector<CorrectionEstimate> v(2);
  v[0].value = 2.0;
  v[1].value = -6.0;
  const double c = fit_correction_constant(v, {1.0, 2.0}, {0.0, 1.0}, 2.0, 0.5);
  // |Phi| <= (c / delta)(1 + |x| + |y|)|h|: 2 <= 8c, 6 <= 16c.
  EXPECT_NEAR(c, 6.0 / 16.0, 1e-15);
}

TEST(Apriori, LinearSystemShowsNoGrowth) {
  const int N = 4;
  const auto S = dirichlet_pi(N);
  const auto r = system("linear_fast(b=1)", kLinearG, S);
  const auto rep = apriori_bounds_check(S.make_field({1.0}), S.make_field({1.0}), S, r, sim(1.0, 0.5, 200),
                                        {0.5, 0.1, 0.02}, NoiseStream(10, 0, N));
  ASSERT_EQ(rep.rows.size(), 3u);
  EXPECT_TRUE(rep.no_growth) << rep.u_trend.slope << " " << rep.v_trend.slope;
  for (const auto& row : rep.rows) {
    EXPECT_GT(row.sup_u_sq.value, 0.0);
    EXPECT_GT(row.sup_mean_v_sq.value, 0.0);
  }
}

TEST(Convergence, StudyRowsAndCsv) {
  const int N = 4;
  const auto S = dirichlet_pi(N);
  const auto r = system("linear_fast(b=1)", kLinearG, S);
  const Field x0 = S.make_field({1.0});
  SimConfig base = sim(1.0, 0.5, 100);
  base.eta = 0.05;
  const auto ubar = solve_averaged(x0, S, r, ClosedFormDrift(r), base.T, base.dt_slow);
  const auto rows = convergence_study(x0, S.zeros(), S, r, ubar, base, {0.5, 0.01}, NoiseStream(11, 0, N), "abc");
  ASSERT_EQ(rows.size(), 2u);
  for (const auto& row : rows) {
    EXPECT_EQ(row.replica_count, 100);
    EXPECT_LE(row.ci_low, row.exceedance_prob);
    EXPECT_GE(row.ci_high, row.exceedance_prob);
    EXPECT_LE(row.median_sup_error, 5.0 * row.mean_sup_error);
  }
  EXPECT_LT(rows[1].mean_sup_error, rows[0].mean_sup_error);
  EXPECT_TRUE(exceedance_nonincreasing(rows));

  std::ostringstream out;
  write_convergence_csv(out, rows);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "eps,replica_count,mean_sup_error,median_sup_error,exceedance_prob,ci_low,ci_high,seed,config_hash");
  int n = 0;
  while (std::getline(in, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 8);
    EXPECT_EQ(line.substr(line.size() - 4), ",abc");
    ++n;
  }
  EXPECT_EQ(n, 2);

  EXPECT_THROW(convergence_study(x0, S.zeros(), S, r, ubar, base, {0.01, 0.5}, NoiseStream(11, 0, N), "abc"),
               std::invalid_argument);
  const auto coarse = solve_averaged(x0, S, r, ClosedFormDrift(r), base.T, 0.05);
  EXPECT_THROW(convergence_study(x0, S.zeros(), S, r, coarse, base, {0.5}, NoiseStream(11, 0, N), "abc"),
               std::invalid_argument);
}

TEST(Convergence, ExceedanceOrdering) {
  std::vector<ConvergenceRow> rows(2);
  rows[0].ci_low = 0.5;
  rows[0].ci_high = 0.7;
  rows[1].ci_low = 0.1;
  rows[1].ci_high = 0.3;
  EXPECT_TRUE(exceedance_strictly_decreasing(rows));
  EXPECT_TRUE(exceedance_nonincreasing(rows));
  rows[1].ci_high = 0.6;
  EXPECT_FALSE(exceedance_strictly_decreasing(rows));
  EXPECT_TRUE(exceedance_nonincreasing(rows));
  rows[1].ci_low = 0.75;
  rows[1].ci_high = 0.9;
  EXPECT_FALSE(exceedance_nonincreasing(rows));
}

TEST(RemainderCsv, Header) {
  std::vector<RemainderRow> rows(1);
  rows[0].eps = 0.1;
  rows[0].replica_count = 3;
  rows[0].seed = 5;
  rows[0].config_hash = "x";
  std::ostringstream out;
  write_remainder_csv(out, rows);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "eps,replica_count,sup_mean_abs_remainder,std_error,t_at_sup,seed,config_hash");
  std::getline(in, line);
  EXPECT_EQ(line.rfind("0.1,3,", 0), 0u);
  EXPECT_EQ(line.substr(line.size() - 4), ",5,x");
}

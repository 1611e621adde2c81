#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "helpers.hpp"
#include "mscea/bootstrap.hpp"
#include "mscea/harness.hpp"
#include "mscea/quadrature.hpp"
#include "mscea/rng.hpp"
#include "mscea/simgen.hpp"

using namespace mscea;
using namespace mscea::testing;

TEST_CASE("inverse-transform draws reproduce the Weibull cumulative hazard") {
  // 10^6 uncensored latent draws, no screening switch
  const WeibullHazard wb{5.2, 56.3};
  const int n = 1000000;
  std::vector<double> draws(n);
  SplitMix64 rng(2024);
  for (int i = 0; i < n; ++i) draws[i] = wb.invert_cumhaz(rng.exp1());
  std::sort(draws.begin(), draws.end());
  // sup over the central 98% of |empirical cumulative hazard - (t/b)^k|
  const int lo = n / 100, hi = n - n / 100;
  double sup = 0.0;
  for (int i = lo; i < hi; i += 97) {
    const double t = draws[i];
    const double emp = -std::log1p(-(static_cast<double>(i) + 0.5) / n);
    sup = std::max(sup, std::abs(emp - wb.cumhaz(t)));
  }
  CHECK(sup < 0.01);
}

TEST_CASE("piecewise screening switch leaves no atom at s") {
  GeneratorSpec g =
      GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::independent_uniform);
  const double s = 50.0;
  const int n = 400000;
  SplitMix64 rng(5150);
  int just_below = 0, just_above = 0;
  const double eps = 0.75;
  for (int i = 0; i < n; ++i) {
    // latent disease age with the switch at a fixed s, x = 0
    const double e = rng.exp1();
    const double at_s = g.h01.base.cumhaz(s);
    const double t = e <= at_s
                         ? g.h01.base.invert_cumhaz(e)
                         : g.h01.base.invert_cumhaz(at_s + (e - at_s) / std::exp(-1.4));
    if (t >= s - eps && t < s) ++just_below;
    if (t >= s && t < s + eps) ++just_above;
  }
  // continuity at s: the density just above is the density just below times
  // exp(beta_screen) = 0.2466; an atom would inflate just_above far beyond that
  const double expected_above = just_below * std::exp(-1.4);
  CHECK(just_above < expected_above + 5.0 * std::sqrt(expected_above) + 10.0);
  CHECK(just_above > expected_above - 5.0 * std::sqrt(expected_above) - 10.0);
}

TEST_CASE("null screening hazard ratios leave the observed law unchanged") {
  GeneratorSpec g =
      GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::independent_uniform);
  g.n = 100000;
  g.h01.log_hr_screen = 0.0;
  g.h02.log_hr_screen = 0.0;
  GeneratorSpec never = g;
  never.screening.base_mean = 1e12;  // effectively no screening before any event
  Cohort with = generate(g, 11);
  Cohort without = generate(never, 12);
  std::vector<double> u1, u2;
  for (const auto& s : with.subjects) u1.push_back(s.u_time);
  for (const auto& s : without.subjects) u2.push_back(s.u_time);
  auto [d, p] = ks_two_sample(u1, u2);
  CHECK(p > 0.01);
  EventRates r1 = empirical_rates(with);
  EventRates r2 = empirical_rates(without);
  const double se =
      std::sqrt(0.25 / with.size() + 0.25 / without.size());  // conservative binomial
  CHECK(std::abs(r1.disease - r2.disease) < 4 * se);
  CHECK(std::abs(r1.death_before - r2.death_before) < 4 * se);
  CHECK(std::abs(r1.death_after - r2.death_after) < 4 * se);
}

TEST_CASE("seeded generation is byte-reproducible") {
  GeneratorSpec g = GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::cox_population);
  g.n = 500;
  Cohort a = generate(g, 987654321);
  Cohort b = generate(g, 987654321);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.subjects[i].u_time == b.subjects[i].u_time);
    CHECK(a.subjects[i].v_time == b.subjects[i].v_time);
    CHECK(a.subjects[i].covariates == b.subjects[i].covariates);
    CHECK(a.subjects[i].screen_age == b.subjects[i].screen_age);
  }
  Cohort c = generate(g, 123);
  bool any_diff = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.subjects[i].u_time != c.subjects[i].u_time) any_diff = true;
  }
  CHECK(any_diff);
}

TEST_CASE("generated observed-data law matches its own closed-form prediction") {
  // with screening pushed beyond reach and uniform censoring, the observed
  // disease fraction has a 1-D integral form; validates the latent draws,
  // the competing assembly, and the censoring wiring together
  GeneratorSpec g =
      GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::independent_uniform);
  g.n = 200000;
  g.screening.base_mean = 1e12;
  Cohort c = generate(g, 31415);
  EventRates r = empirical_rates(c);
  GaussHermite gh(48);
  const double predicted = gh.normal_expectation([&](double x) {
    const double c1 = std::exp(0.5 * x), c2 = std::exp(0.4 * x);
    return adaptive_simpson(
        [&](double t) {
          const double surv =
              std::exp(-c1 * g.h01.base.cumhaz(t) - c2 * g.h02.base.cumhaz(t));
          const double censor_surv = t <= 40.0 ? 1.0 : (100.0 - t) / 60.0;
          return surv * c1 * g.h01.base.hazard(t) * censor_surv;
        },
        0.0, 100.0, std::vector<double>{40.0}, 1e-8);
  });
  CHECK(r.disease == doctest::Approx(predicted).epsilon(0.02));
}

TEST_CASE("setting II defaults hit the published event-rate targets") {
  GeneratorSpec g = GeneratorSpec::setting_two();
  g.n = 60000;
  Cohort c = generate(g, 777);
  EventRates r = empirical_rates(c);
  CHECK(std::abs(r.disease - 0.020) < 0.005);
  CHECK(std::abs(r.death_before - 0.150) < 0.005);
  CHECK(std::abs(r.death_after - 0.014) < 0.005);
}

TEST_CASE("truth: single-state exponential closed form") {
  GeneratorSpec g;
  g.h01.base = {5.2, 1e9};  // effectively no disease
  g.h01.log_hr_x = 0.0;
  g.h02.base = {1.0, 20.0};  // exponential death, mean 20
  g.h02.log_hr_x = 0.0;
  g.h02.log_hr_screen = 0.0;
  g.sojourn.scale = 45.0;
  g.screening.base_mean = 50.0;
  g.n = 10;
  TruthRequest r;
  r.kind = TruthKind::rmst_total;
  r.s = kNeverScreen;
  r.t = 30.0;
  r.t0 = 0.0;
  r.tol = 1e-8;
  const double expected = 20.0 * (1.0 - std::exp(-30.0 / 20.0));
  CHECK(truth(r, g) == doctest::Approx(expected).epsilon(1e-6));
  r.t0 = 10.0;
  const double expected2 = 20.0 * (std::exp(-0.5) - std::exp(-1.5));
  CHECK(truth(r, g) == doctest::Approx(expected2).epsilon(1e-6));
  // disease-free equals total here, disease state is zero
  r.kind = TruthKind::rmst_disease_state;
  CHECK(truth(r, g) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("truth is stable under quadrature refinement") {
  GeneratorSpec g =
      GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::independent_uniform);
  for (TruthKind k : {TruthKind::rmst_disease_free, TruthKind::rmst_disease_state,
                      TruthKind::lost_disease_path}) {
    TruthRequest coarse;
    coarse.kind = k;
    coarse.s = 50.0;
    coarse.t = 70.0;
    coarse.t0 = 40.0;
    coarse.tol = 1e-5;
    TruthRequest fine = coarse;
    fine.tol = 5e-7;
    fine.gh_nodes = 120;
    CHECK(std::abs(truth(coarse, g) - truth(fine, g)) < 1e-4);
  }
}

TEST_CASE("truth agrees with the independent Monte Carlo path oracle") {
  GeneratorSpec g =
      GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::independent_uniform);
  for (TruthKind k : {TruthKind::rmst_disease_free, TruthKind::rmst_disease_state,
                      TruthKind::lost_other_causes, TruthKind::screenings}) {
    for (double s : {kNeverScreen, 50.0}) {
      TruthRequest r;
      r.kind = k;
      r.s = s;
      r.t = 70.0;
      r.t0 = 40.0;
      const double exact = truth(r, g);
      MonteCarloValue mc = mc_truth(r, g, 1000000, 31337);
      CHECK(std::abs(exact - mc.mean) <= 3.0 * mc.se + 1e-9);
    }
  }
}

TEST_CASE("generator spec JSON round trip") {
  GeneratorSpec g = GeneratorSpec::setting_two();
  const std::string text = g.to_json_string();
  GeneratorSpec back = GeneratorSpec::from_json_string(text);
  CHECK(back.h01.base.shape == g.h01.base.shape);
  CHECK(back.h01.base.scale == g.h01.base.scale);
  CHECK(back.h02.log_hr_screen == g.h02.log_hr_screen);
  CHECK(back.sojourn.coef_t == g.sojourn.coef_t);
  CHECK(back.censoring.kind == g.censoring.kind);
  CHECK(back.censoring.table.rates == g.censoring.table.rates);
  CHECK(back.entry.kind == g.entry.kind);
  CHECK(back.n == g.n);
  CHECK_THROWS_AS(GeneratorSpec::from_json_string("{ not json"), ConfigError);
}

TEST_CASE("overall-mortality comparator equals the multistate total when disease is absent") {
  GeneratorSpec g =
      GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::independent_uniform);
  g.h01.base.scale = 1e9;  // disease hazard effectively zero
  g.n = 3000;
  Cohort c = generate(g, 4444);
  // drop the handful of disease events if any slipped through
  REQUIRE(empirical_rates(c).disease == 0.0);
  CoxFit cmp = fit_overall_mortality(c);
  const double r_cmp = overall_mortality_rmst(cmp, c, kNeverScreen, 70.0, 40.0);
  // multistate with no 0->1 events cannot fit; the comparator must equal the
  // single-transition 0->2 pathway computed through the estimand engine
  MultiStateFit fit;
  fit.covariate_names = c.covariate_names;
  fit.fit02 = fit_transition(c, TransitionSpec::standard(Transition::healthy_to_death));
  CoxFit zero01;
  zero01.coefficient_names = {"screening", "x"};
  zero01.coefficients = {0.0, 0.0};
  zero01.covariance = Matrix(2, 2);
  fit.fit01 = zero01;
  CoxFit zero13;
  zero13.coefficient_names = {"onset_age", "screening", "x"};
  zero13.coefficients = {0.0, 0.0, 0.0};
  zero13.covariance = Matrix(3, 3);
  fit.fit13 = zero13;
  EstimandResult r = rmst(fit, c, kNeverScreen, 70.0, 40.0);
  CHECK(r_cmp == doctest::Approx(r.estimate).epsilon(1e-6));
}

TEST_CASE("null screening effect: fitted arms coincide within noise across replicates") {
  GeneratorSpec g =
      GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::independent_uniform);
  g.h01.log_hr_screen = 0.0;
  g.h02.log_hr_screen = 0.0;
  g.n = 600;
  const int R = 12;
  int within = 0;
  for (int rep = 0; rep < R; ++rep) {
    const Cohort c = generate(g, derive_stream_seed(88, rep));
    const MultiStateProblem prob = MultiStateProblem::build(c);
    std::vector<EstimandRequest> reqs{EstimandRequest{Measure::rmst, kNeverScreen, 70, 40},
                                      EstimandRequest{Measure::rmst, 50.0, 70, 40}};
    BootstrapPlan plan;
    plan.B = 12;
    plan.seed = derive_stream_seed(89, rep);
    BootstrapOutcome out = bootstrap(prob, c, reqs, plan);
    const double diff = std::abs(out.results[0].estimate - out.results[1].estimate);
    const double se = std::sqrt(*out.results[0].se * *out.results[0].se +
                                *out.results[1].se * *out.results[1].se);
    if (diff < 2.0 * se) ++within;
  }
  CHECK(within >= (9 * R) / 10);  // arms differ only through the fitted noise
}

TEST_CASE("small harness smoke run: structure and determinism") {
  GeneratorSpec g =
      GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::independent_uniform);
  HarnessConfig cfg;
  cfg.t = 70.0;
  cfg.t0_rmst = 40.0;
  cfg.t0_lost = 0.0;
  cfg.workers = 2;
  cfg.truth_gh_nodes = 40;
  HarnessReport rep = run_harness(g, 4, 250, 6, 2025, cfg);
  CHECK(rep.replicates == 4);
  CHECK(rep.cells.size() == 12);  // (3 rmst + 2 lost + comparator) x 2 s values
  const HarnessCell& cell = rep.cell("rmst_total", "multistate", kNeverScreen);
  CHECK(cell.truth > 10.0);
  CHECK(cell.mean > 10.0);
  CHECK(cell.esd > 0.0);
  CHECK(cell.cp >= 0.0);
  CHECK(cell.cp <= 1.0);
  HarnessConfig cfg1 = cfg;
  cfg1.workers = 1;
  HarnessReport rep1 = run_harness(g, 4, 250, 6, 2025, cfg1);
  for (std::size_t i = 0; i < rep.cells.size(); ++i) {
    CHECK(rep.cells[i].mean == rep1.cells[i].mean);
    CHECK(rep.cells[i].mean_se == rep1.cells[i].mean_se);
  }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "mscea/bootstrap.hpp"
#include "mscea/errors.hpp"
#include "mscea/simgen.hpp"

using namespace mscea;
using namespace mscea::testing;

namespace {

Cohort sim_cohort(int n, std::uint64_t seed) {
  GeneratorSpec g =
      GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::independent_uniform);
  g.n = n;
  return generate(g, seed);
}

std::vector<EstimandRequest> rmst_requests() {
  EstimandRequest never{Measure::rmst, kNeverScreen, 70.0, 40.0};
  EstimandRequest scr{Measure::rmst, 50.0, 70.0, 40.0};
  return {never, scr};
}

}  // namespace

TEST_CASE("resample weights form a multinomial draw of size n") {
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const std::vector<double> w = resample_weights(250, seed);
    double total = 0.0;
    for (double v : w) {
      CHECK(v >= 0.0);
      CHECK(v == std::floor(v));
      total += v;
    }
    CHECK(total == 250.0);
  }
}

TEST_CASE("identical duplicated resamples give zero standard error") {
  Cohort c = sim_cohort(300, 11);
  BootstrapPlan plan;
  plan.B = 2;
  plan.seed_override = std::vector<std::uint64_t>{42, 42};  // same resample twice
  auto requests = rmst_requests();
  BootstrapOutcome out = bootstrap(c, requests, plan);
  for (const auto& r : out.results) {
    REQUIRE(r.se.has_value());
    CHECK(*r.se == 0.0);
    for (double cse : r.component_se) CHECK(cse == 0.0);
  }
}

TEST_CASE("same seed, different worker counts: byte-identical output") {
  Cohort c = sim_cohort(400, 13);
  auto requests = rmst_requests();
  BootstrapPlan p1;
  p1.B = 16;
  p1.seed = 905;
  p1.workers = 1;
  BootstrapPlan p4 = p1;
  p4.workers = 4;
  BootstrapOutcome o1 = bootstrap(c, requests, p1);
  BootstrapOutcome o4 = bootstrap(c, requests, p4);
  REQUIRE(o1.results.size() == o4.results.size());
  for (std::size_t r = 0; r < o1.results.size(); ++r) {
    CHECK(o1.results[r].estimate == o4.results[r].estimate);
    CHECK(*o1.results[r].se == *o4.results[r].se);
    CHECK(o1.results[r].ci->first == o4.results[r].ci->first);
    CHECK(o1.results[r].ci->second == o4.results[r].ci->second);
    CHECK(o1.results[r].component_se == o4.results[r].component_se);
  }
  CHECK(o1.replicates_failed == o4.replicates_failed);
}

TEST_CASE("normal and percentile intervals") {
  Cohort c = sim_cohort(350, 17);
  auto requests = rmst_requests();
  BootstrapPlan plan;
  plan.B = 24;
  plan.seed = 31;
  BootstrapOutcome normal = bootstrap(c, requests, plan);
  plan.ci_method = CiMethod::percentile;
  BootstrapOutcome pct = bootstrap(c, requests, plan);
  for (std::size_t r = 0; r < normal.results.size(); ++r) {
    const auto& nr = normal.results[r];
    CHECK(nr.ci->first ==
          doctest::Approx(nr.estimate - 1.959963984540054 * *nr.se).epsilon(1e-12));
    CHECK(nr.ci->second ==
          doctest::Approx(nr.estimate + 1.959963984540054 * *nr.se).epsilon(1e-12));
    const auto& pr = pct.results[r];
    CHECK(pr.ci->first <= pr.ci->second);
    // same replicates, same se either way
    CHECK(*pr.se == *nr.se);
  }
}

TEST_CASE("failed replicates are dropped and counted; too many is a hard error") {
  // two sojourn events; a resample without subject "a" leaves the 1->3
  // design unidentifiable (screening constant on the remaining risk sets)
  Cohort c = make_cohort({subject("a", 0, 5, 1, 0, 2.0, 1, 3.0, {0.2}),
                          subject("b", 0, 6, 1, 0, 1.0, 0, {}, {-0.1}),
                          subject("c", 0, 7, 0, 1, 0, 0, 2.0, {0.4}),
                          subject("d", 0, 8, 0, 1, 0, 0, {}, {0.1}),
                          subject("e", 0, 9, 1, 0, 3.0, 1, {}, {-0.3}),
                          subject("f", 0, 4, 0, 1, 0, 0, {}, {0.6}),
                          subject("g", 0, 7.5, 1, 0, 2.5, 0, 2.0, {0.9}),
                          subject("h", 0, 4.5, 1, 0, 4.0, 0, {}, {-0.8})});
  fit_illness_death(c);  // the full cohort is fittable
  // find a replicate seed whose resample drops subject "a" (index 0)
  std::uint64_t failing = 0;
  for (std::uint64_t s = 1;; ++s) {
    if (resample_weights(c.size(), s)[0] == 0.0) {
      failing = s;
      break;
    }
  }
  BootstrapPlan plan;
  plan.B = 4;
  plan.seed_override = std::vector<std::uint64_t>{failing, failing, failing, failing};
  EstimandRequest rq{Measure::rmst, kNeverScreen, 8.0, 0.0};
  CHECK_THROWS_AS(bootstrap(c, std::vector<EstimandRequest>{rq}, plan), InferenceError);

  // a single failing replicate among full-support resamples is dropped and
  // reported; every other replicate keeps all six subjects, so it fits
  std::vector<std::uint64_t> seeds;
  seeds.push_back(failing);
  for (std::uint64_t s = 1; seeds.size() < 12; ++s) {
    const std::vector<double> w = resample_weights(c.size(), s);
    bool full_support = true;
    for (double v : w) full_support = full_support && v > 0.0;
    if (full_support) seeds.push_back(s);
  }
  plan.B = static_cast<int>(seeds.size());
  plan.seed_override = seeds;
  BootstrapOutcome out = bootstrap(c, std::vector<EstimandRequest>{rq}, plan);
  CHECK(out.replicates_failed == 1);
  CHECK(out.replicates_run == plan.B);
  CHECK(!out.failure_messages.empty());
}

TEST_CASE("bootstrap leaves subject records intact (weights only)") {
  Cohort c = sim_cohort(120, 23);
  const Cohort copy = c;
  BootstrapPlan plan;
  plan.B = 8;
  plan.seed = 77;
  auto requests = rmst_requests();
  bootstrap(c, requests, plan);
  REQUIRE(c.size() == copy.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(c.subjects[i].id == copy.subjects[i].id);
    CHECK(c.subjects[i].u_time == copy.subjects[i].u_time);
    CHECK(c.subjects[i].covariates == copy.subjects[i].covariates);
  }
}

TEST_CASE("B below 2 is rejected") {
  Cohort c = sim_cohort(100, 29);
  BootstrapPlan plan;
  plan.B = 1;
  CHECK_THROWS_AS(bootstrap(c, rmst_requests(), plan), InferenceError);
}

TEST_CASE("doubling B refines the standard error smoothly (smoke)") {
  Cohort c = sim_cohort(350, 37);
  auto requests = rmst_requests();
  BootstrapPlan small;
  small.B = 16;
  small.seed = 404;
  BootstrapPlan big = small;
  big.B = 64;
  const double se_small = *bootstrap(c, requests, small).results[0].se;
  const double se_big = *bootstrap(c, requests, big).results[0].se;
  // same order of magnitude; B controls the noise of se, not its level
  CHECK(se_big > 0.3 * se_small);
  CHECK(se_big < 3.0 * se_small);
}

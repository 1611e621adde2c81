#include <benchmark/benchmark.h>

#include "mscea/bootstrap.hpp"
#include "mscea/estimands.hpp"
#include "mscea/multistate.hpp"
#include "mscea/rng.hpp"
#include "mscea/simgen.hpp"

using namespace mscea;

namespace {

GeneratorSpec bench_spec() {
  return GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::independent_uniform);
}

void BM_Generate(benchmark::State& state) {
  GeneratorSpec g = bench_spec();
  g.n = static_cast<int>(state.range(0));
  std::uint64_t seed = 1;
  for (auto _ : state) {
    Cohort c = generate(g, seed++);
    benchmark::DoNotOptimize(c.subjects.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_Generate)->Arg(500)->Arg(2500)->Complexity();

void BM_FitIllnessDeath(benchmark::State& state) {
  GeneratorSpec g = bench_spec();
  g.n = static_cast<int>(state.range(0));
  const Cohort c = generate(g, 7);
  const MultiStateProblem problem = MultiStateProblem::build(c);
  for (auto _ : state) {
    MultiStateFit fit = problem.fit();
    benchmark::DoNotOptimize(fit.fit01.coefficients.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_FitIllnessDeath)->Arg(500)->Arg(2500)->Complexity();

void BM_EstimandPair(benchmark::State& state) {
  GeneratorSpec g = bench_spec();
  g.n = static_cast<int>(state.range(0));
  const Cohort c = generate(g, 7);
  const MultiStateFit fit = fit_illness_death(c);
  const EstimandEvaluator eval(fit, c);
  std::vector<EstimandRequest> reqs{
      EstimandRequest{Measure::rmst, kNeverScreen, 70.0, 40.0},
      EstimandRequest{Measure::rmst, 50.0, 70.0, 40.0},
      EstimandRequest{Measure::life_years_lost, kNeverScreen, 70.0, 0.0},
      EstimandRequest{Measure::life_years_lost, 50.0, 70.0, 0.0},
  };
  for (auto _ : state) {
    auto res = eval.evaluate(reqs);
    benchmark::DoNotOptimize(res.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_EstimandPair)->Arg(500)->Arg(1000)->Arg(2500)->Unit(benchmark::kMillisecond)->Complexity();

void BM_BootstrapReplicate(benchmark::State& state) {
  GeneratorSpec g = bench_spec();
  g.n = static_cast<int>(state.range(0));
  const Cohort c = generate(g, 7);
  const MultiStateProblem problem = MultiStateProblem::build(c);
  std::vector<EstimandRequest> reqs{
      EstimandRequest{Measure::rmst, kNeverScreen, 70.0, 40.0},
      EstimandRequest{Measure::rmst, 50.0, 70.0, 40.0},
  };
  std::uint64_t b = 0;
  for (auto _ : state) {
    const std::vector<double> w = resample_weights(c.size(), derive_stream_seed(3, b++));
    MultiStateFit fit = problem.fit({}, w);
    EstimandEvaluator eval(fit, c, w);
    auto res = eval.evaluate(reqs);
    benchmark::DoNotOptimize(res.data());
  }
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_BootstrapReplicate)->Arg(500)->Arg(2500)->Unit(benchmark::kMillisecond)->Complexity();

void BM_QualityAdjusted(benchmark::State& state) {
  GeneratorSpec g = bench_spec();
  g.n = 1000;
  const Cohort c = generate(g, 7);
  const MultiStateFit fit = fit_illness_death(c);
  const EstimandEvaluator eval(fit, c);
  QualityProfile prof{0.8, 0.9, 0.4};
  EstimandRequest rq{Measure::qaly, 50.0, 70.0, 40.0, prof};
  for (auto _ : state) {
    EstimandResult res = eval.evaluate(rq);
    benchmark::DoNotOptimize(res.estimate);
  }
}
BENCHMARK(BM_QualityAdjusted)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();

#include "mscea/bootstrap.hpp"

#include <algorithm>
#include <cmath>

#include "mscea/errors.hpp"
#include "mscea/rng.hpp"
#include "mscea/threads.hpp"

namespace mscea {

std::vector<double> resample_weights(std::size_t n, std::uint64_t replicate_seed) {
  SplitMix64 rng(replicate_seed);
  std::vector<double> w(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const std::uint64_t r = rng.next();
    const std::size_t idx = static_cast<std::size_t>(
        (static_cast<unsigned __int128>(r) * n) >> 64);
    w[idx] += 1.0;
  }
  return w;
}

namespace {

double quantile_type7(std::vector<double> sorted, double p) {
  const std::size_t n = sorted.size();
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(n) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, n - 1);
  return sorted[lo] + (h - lo) * (sorted[hi] - sorted[lo]);
}

}  // namespace

BootstrapOutcome bootstrap(const MultiStateProblem& problem, const Cohort& cohort,
                           std::span<const EstimandRequest> requests,
                           const BootstrapPlan& plan, const SolverOptions& solver) {
  if (plan.B < 2) throw InferenceError("bootstrap requires B >= 2");
  if (plan.seed_override && plan.seed_override->size() != static_cast<std::size_t>(plan.B)) {
    throw InferenceError("seed_override must supply one seed per replicate");
  }
  const std::size_t n = cohort.size();

  // Point estimates on the full sample.
  const MultiStateFit full_fit = problem.fit(solver);
  EstimandEvaluator full_eval(full_fit, cohort);
  std::vector<EstimandResult> results = full_eval.evaluate(requests);

  // Per replicate, for every request: the estimate followed by its components.
  std::vector<std::size_t> value_offset(requests.size());
  std::size_t n_values = 0;
  for (std::size_t r = 0; r < requests.size(); ++r) {
    value_offset[r] = n_values;
    n_values += 1 + results[r].components.size();
  }

  const int B = plan.B;
  std::vector<double> replicate_values(static_cast<std::size_t>(B) * n_values);
  std::vector<char> ok(B, 0);
  std::vector<std::string> messages(B);

  run_indexed(B, plan.workers, [&](std::size_t b) {
    const std::uint64_t rep_seed = plan.seed_override
                                       ? (*plan.seed_override)[b]
                                       : derive_stream_seed(plan.seed, b);
    const std::vector<double> w = resample_weights(n, rep_seed);
    try {
      const MultiStateFit fit = problem.fit(solver, w);
      EstimandEvaluator eval(fit, cohort, w);
      const std::vector<EstimandResult> res = eval.evaluate(requests);
      double* out = replicate_values.data() + b * n_values;
      for (std::size_t r = 0; r < res.size(); ++r) {
        double* slot = out + value_offset[r];
        *slot++ = res[r].estimate;
        for (const auto& [name, value] : res[r].components) *slot++ = value;
      }
      ok[b] = 1;
    } catch (const FitError& e) {
      messages[b] = e.what();
    }
  });

  BootstrapOutcome outcome;
  outcome.replicates_run = B;
  for (int b = 0; b < B; ++b) {
    if (!ok[b]) {
      ++outcome.replicates_failed;
      if (outcome.failure_messages.size() < 5 &&
          std::find(outcome.failure_messages.begin(), outcome.failure_messages.end(),
                    messages[b]) == outcome.failure_messages.end()) {
        outcome.failure_messages.push_back(messages[b]);
      }
    }
  }
  if (outcome.replicates_failed * 5 > B) {
    std::string what = "bootstrap: " + std::to_string(outcome.replicates_failed) + " of " +
                       std::to_string(B) + " replicates failed";
    for (const auto& m : outcome.failure_messages) what += "\n  " + m;
    throw InferenceError(what);
  }
  const int m = B - outcome.replicates_failed;
  if (m < 2) throw InferenceError("bootstrap: fewer than 2 successful replicates");

  // Empirical SD across successful replicates, in replicate order.
  std::vector<double> column;
  column.reserve(m);
  auto se_ci_of = [&](std::size_t offset, double point)
      -> std::pair<double, std::pair<double, double>> {
    column.clear();
    for (int b = 0; b < B; ++b) {
      if (ok[b]) column.push_back(replicate_values[b * n_values + offset]);
    }
    double mean = 0.0;
    for (double v : column) mean += v;
    mean /= m;
    double ss = 0.0;
    for (double v : column) ss += (v - mean) * (v - mean);
    const double se = std::sqrt(ss / (m - 1));
    std::pair<double, double> ci;
    if (plan.ci_method == CiMethod::normal) {
      ci = {point - 1.959963984540054 * se, point + 1.959963984540054 * se};
    } else {
      std::vector<double> sorted = column;
      std::sort(sorted.begin(), sorted.end());
      ci = {quantile_type7(sorted, 0.025), quantile_type7(sorted, 0.975)};
    }
    return {se, ci};
  };

  for (std::size_t r = 0; r < results.size(); ++r) {
    auto [se, ci] = se_ci_of(value_offset[r], results[r].estimate);
    results[r].se = se;
    results[r].ci = ci;
    results[r].component_se.clear();
    results[r].component_ci.clear();
    for (std::size_t c = 0; c < results[r].components.size(); ++c) {
      auto [cse, cci] =
          se_ci_of(value_offset[r] + 1 + c, results[r].components[c].second);
      results[r].component_se.push_back(cse);
      results[r].component_ci.push_back(cci);
    }
  }

  outcome.results = std::move(results);
  return outcome;
}

BootstrapOutcome bootstrap(const Cohort& cohort, std::span<const EstimandRequest> requests,
                           const BootstrapPlan& plan, const SolverOptions& solver) {
  return bootstrap(MultiStateProblem::build(cohort), cohort, requests, plan, solver);
}

}  // namespace mscea

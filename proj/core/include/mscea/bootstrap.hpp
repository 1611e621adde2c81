#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mscea/cohort.hpp"
#include "mscea/estimands.hpp"
#include "mscea/multistate.hpp"

namespace mscea {

enum class CiMethod { normal, percentile };

/// Nonparametric bootstrap over subjects. A fixed (seed, B, cohort, requests)
/// tuple determines every output byte regardless of the worker count.
struct BootstrapPlan {
  int B = 100;
  std::uint64_t seed = 0;
  CiMethod ci_method = CiMethod::normal;
  int workers = 1;
  /// Test hook: explicit per-replicate seeds instead of the derived streams.
  std::optional<std::vector<std::uint64_t>> seed_override;
};

struct BootstrapOutcome {
  /// Point estimates on the full sample with se / ci filled per request.
  std::vector<EstimandResult> results;
  int replicates_run = 0;
  int replicates_failed = 0;
  std::vector<std::string> failure_messages;  // deduplicated, first few
};

/// Resamples n subjects with replacement B times, refits all three
/// transitions per replicate (as multiplicity weights, which is equivalent to
/// duplicating subject records for the partial likelihood and the Breslow
/// baselines), re-evaluates every requested estimand, and attaches the
/// empirical standard deviation and confidence interval across replicates.
/// Replicates where any transition fit fails are dropped and counted; more
/// than 20% failures is a hard error.
BootstrapOutcome bootstrap(const Cohort& cohort, std::span<const EstimandRequest> requests,
                           const BootstrapPlan& plan, const SolverOptions& solver = {});

/// Same, reusing prebuilt risk-set problems (harness hot path).
BootstrapOutcome bootstrap(const MultiStateProblem& problem, const Cohort& cohort,
                           std::span<const EstimandRequest> requests,
                           const BootstrapPlan& plan, const SolverOptions& solver = {});

/// Multinomial resample counts for one replicate; exposed for determinism
/// tests and for the harness comparator.
std::vector<double> resample_weights(std::size_t n, std::uint64_t replicate_seed);

}  // namespace mscea

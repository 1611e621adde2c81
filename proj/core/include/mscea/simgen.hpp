#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mscea/cohort.hpp"
#include "mscea/cox.hpp"
#include "mscea/estimands.hpp"
#include "mscea/multistate.hpp"

namespace mscea {

/// Weibull hazard with cumulative hazard ((t - origin)+ / scale)^shape.
/// A positive origin shifts the support to late ages (hazard is zero below
/// it), the natural parameterization for a late-onset process observed in a
/// cohort enrolled at older ages.
struct WeibullHazard {
  double shape = 1.0;
  double scale = 1.0;
  double origin = 0.0;

  double cumhaz(double t) const;
  double hazard(double t) const;
  double invert_cumhaz(double h) const;  // t with cumhaz(t) = h
};

/// One 0->k transition of the generating model: Weibull baseline with
/// log hazard ratios for the screening indicator and the risk score.
struct TransitionGen {
  WeibullHazard base;
  double log_hr_screen = 0.0;
  double log_hr_x = 0.0;
};

/// Sojourn-time generator (time from disease onset to death), exponential
/// conditional on (T, X). The printed form "scale * exp(coef_x X + coef_t T)"
/// is ambiguous between a mean and a hazard parameterization; both are
/// supported and the calibration harness adjudicates which one reproduces the
/// published event rates.
struct SojournGen {
  enum class Param { hazard_scale, mean_literal };
  double scale = 45.0;  // baseline mean (years) at zero linear predictor
  double coef_x = 0.0;
  double coef_t = 0.0;
  double t_center = 0.0;  // optional centering of the onset-age covariate
  Param param = Param::hazard_scale;

  double rate(double onset_age, double x) const;
};

/// Observational screening-age generator: exponential with mean
/// base_mean * exp(coef_x X) (confounded by the risk score).
struct ScreeningGen {
  double base_mean = 50.0;
  double coef_x = 0.0;
};

/// Piecewise-constant age-specific hazard table (per-year rates by age band).
/// Shipped values are an approximate population life table, a stand-in
/// calibrated so simulated event rates land near the published targets.
struct AgeHazardTable {
  std::vector<double> age_breaks;  // ascending, first usually 0
  std::vector<double> rates;       // one per band, last band extends to +inf
  double multiplier = 1.0;

  double cumhaz(double t) const;
  double invert_cumhaz(double h) const;
  static AgeHazardTable us_population_standin();
};

struct CensoringGen {
  enum class Kind { uniform, cox_population };
  Kind kind = Kind::uniform;
  double uniform_lo = 40.0;
  double uniform_hi = 100.0;
  AgeHazardTable table;    // cox_population baseline
  double log_hr_x = 1.0;   // hazard ratio exp(log_hr_x * X)
};

struct EntryGen {
  enum class Kind { none, uniform };
  Kind kind = Kind::none;
  double lo = 50.0;
  double hi = 79.0;
};

/// Full generating model for one simulation setting.
struct GeneratorSpec {
  TransitionGen h01;
  TransitionGen h02;
  SojournGen sojourn;
  ScreeningGen screening;
  CensoringGen censoring;
  EntryGen entry;
  int n = 2500;

  void validate() const;

  enum class CensoringScenario { independent_uniform, cox_population };
  static GeneratorSpec setting_one(CensoringScenario scenario);
  static GeneratorSpec setting_two();

  std::string to_json_string() const;
  static GeneratorSpec from_json_string(const std::string& text);
  static GeneratorSpec load(const std::string& path);
  void save(const std::string& path) const;
};

/// Draws a cohort from the generating model. Latent first-event times come
/// from piecewise cumulative-hazard inversion with the screening switch at S;
/// left truncation (when configured) resamples subjects until event-free at
/// entry, and censoring ages are drawn conditional on exceeding the entry age.
/// Byte-reproducible for a fixed (spec, seed) on any worker count.
Cohort generate(const GeneratorSpec& spec, std::uint64_t seed);

struct EventRates {
  double disease = 0.0;        // fraction with delta1
  double death_before = 0.0;   // fraction with delta2
  double death_after = 0.0;    // fraction with delta3
  double death_overall = 0.0;  // delta2 or delta3
};
EventRates empirical_rates(const Cohort& cohort);

/// Ground-truth estimand kinds computed from the generating model itself.
enum class TruthKind {
  rmst_disease_free,
  rmst_disease_state,
  rmst_total,
  lost_disease_path,
  lost_other_causes,
  screenings,
};

struct TruthRequest {
  TruthKind kind = TruthKind::rmst_total;
  double s = kNeverScreen;
  double t = 70.0;
  double t0 = 40.0;
  double screening_interval = 10.0;
  double tol = 1e-6;   // absolute quadrature tolerance per component
  int gh_nodes = 80;   // Gauss-Hermite order for the risk-score marginal
};

/// Deterministic numerical integration of the generating model under the
/// intervention "screen exactly at age s": piecewise-Weibull competing risks
/// with the screening switch, exponential sojourn, Gauss-Hermite marginal
/// over X. No censoring enters the truth.
double truth(const TruthRequest& request, const GeneratorSpec& spec);

struct MonteCarloValue {
  double mean = 0.0;
  double se = 0.0;
};

/// Independent brute-force oracle: simulates potential-outcome paths of the
/// generating model under the same intervention and averages the path-level
/// measure. Used to adjudicate the quadrature truth.
MonteCarloValue mc_truth(const TruthRequest& request, const GeneratorSpec& spec,
                         std::int64_t n_paths, std::uint64_t seed);

/// Single-transition comparator: death as the only event (disease ignored),
/// same static covariates and time-dependent screening indicator.
CoxFit fit_overall_mortality(const Cohort& cohort, const SolverOptions& options = {},
                             std::span<const double> weights = {});

/// RMST over (t0, t] under the comparator: population average of the
/// product-integral survival of the single fitted death hazard.
double overall_mortality_rmst(const CoxFit& fit, const Cohort& cohort, double s, double t,
                              double t0, std::span<const double> weights = {});

}  // namespace mscea

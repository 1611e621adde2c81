#pragma once

#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mscea/cohort.hpp"
#include "mscea/multistate.hpp"
#include "mscea/step_function.hpp"

namespace mscea {

/// Screening age encoding for "never screen".
inline constexpr double kNeverScreen = std::numeric_limits<double>::infinity();

/// Quality scores for the three phases of disease care, each in [0, 1].
/// The disease-free score is fixed at 1. No defaults are shipped; profiles
/// are user-supplied.
struct QualityProfile {
  double initial_care = 1.0;     // first year after onset
  double continuing_care = 1.0;  // years between initial and terminal care
  double terminal_care = 1.0;    // last year of life

  void validate() const;
};

/// Cumulative weight function attached to a state in the unified measure
/// M(t) = sum_k int_0^t Y_k(u) dW_k(u).
struct WeightSpec {
  enum class Kind { identity, zero, screening_count, quality };
  Kind kind = Kind::identity;
  double interval = 10.0;          // screening_count: years between screenings
  QualityProfile profile;          // quality kind only

  static WeightSpec identity() { return {}; }
  static WeightSpec zero() { return {Kind::zero}; }
  static WeightSpec screening_count(double interval_years) {
    WeightSpec w{Kind::screening_count};
    w.interval = interval_years;
    return w;
  }
  static WeightSpec quality(const QualityProfile& p) {
    WeightSpec w{Kind::quality};
    w.profile = p;
    return w;
  }
};

enum class Measure {
  rmst,               // W1 = W2 = identity
  qaly,               // W1 = identity, W2 = quality-score weighted
  life_years_lost,    // complementary decomposition by path to death
  qaly_lost_disease,  // quality-weighted years lost through 0->1->3
  screenings,         // expected screening count before disease or death
};

std::string measure_label(Measure m);
Measure measure_from_label(const std::string& label);

/// One estimand evaluation request. Integrals run over the window (t0, t];
/// s is the counterfactual screening-initiation age (kNeverScreen = never).
struct EstimandRequest {
  Measure measure = Measure::rmst;
  double s = kNeverScreen;
  double t = 0.0;
  double t0 = 0.0;
  QualityProfile profile;           // qaly / qaly_lost_disease
  double screening_interval = 10.0; // screenings
};

/// Point estimate with its per-state / per-path decomposition; the bootstrap
/// layer fills se and ci.
struct EstimandResult {
  std::string measure;
  double s = kNeverScreen;
  double t = 0.0;
  double t0 = 0.0;
  double estimate = 0.0;
  std::vector<std::pair<std::string, double>> components;
  std::optional<double> se;
  std::optional<std::pair<double, double>> ci;
  /// Bootstrap uncertainty per component, aligned with `components`.
  std::vector<double> component_se;
  std::vector<std::pair<double, double>> component_ci;

  double component(const std::string& name) const;
};

/// Evaluates plug-in estimands of E{M^(s)(t)} from a fitted illness-death
/// model by exact summation over the step measures of the Breslow baselines.
///
/// All survival curves are discrete product-integrals of the fitted cumulative
/// hazards (Aalen-Johansen form), so the competing-risks identity
/// P1 + F_T + F_D02 = 1 holds to rounding error at every time point.
class EstimandEvaluator {
 public:
  /// Weights are per-subject multiplicities (empty = all ones); the population
  /// average is the weighted mean over the cohort's covariate rows.
  EstimandEvaluator(const MultiStateFit& fit, const Cohort& cohort,
                    std::span<const double> weights = {});

  EstimandResult evaluate(const EstimandRequest& request) const;
  /// Batched evaluation; requests sharing (s, t) reuse one cohort pass.
  std::vector<EstimandResult> evaluate(std::span<const EstimandRequest> requests) const;

  // Covariate-conditional building blocks (the estimator displays).
  /// P1(t | x, s) = Pr(min(T, D) >= t): product-integral of -d(L01 + L02).
  double p1(std::span<const double> x, double s, double t) const;
  /// Cumulative disease incidence up to t: jumps P1(v-) dLambda01(v).
  StepFunction cif_disease(std::span<const double> x, double s, double t) const;
  /// Sojourn survival Pr(D >= t | T = r): product-integral on the sojourn
  /// scale with multiplier exp(alpha r + beta13 Z(r;s) + gamma13' x).
  double p13(double onset_age, std::span<const double> x, double s, double t) const;
  /// P2(t | x, s) = sum over onset jumps r <= t of P13(t | r) dF_T(r).
  double p2(std::span<const double> x, double s, double t) const;

  const MultiStateFit& fit() const { return *fit_; }
  std::size_t n_subjects() const { return n_; }

 private:
  struct ScreeningGrid;
  struct SubjectPass;
  struct Slot;
  void build_screening_grid(double s, ScreeningGrid& grid) const;
  std::size_t subject_age_pass(double t, double s, const ScreeningGrid& sg, std::size_t i,
                               double w, std::span<Slot* const> p1_slots,
                               std::span<Slot* const> lost_slots,
                               std::span<Slot* const> screen_slots,
                               std::span<const double> window_starts,
                               std::span<double> p1_prefix, std::span<double> onset_mass,
                               std::span<std::size_t> epoch_counter) const;
  void evaluate_group_fast(double t, std::span<const double> arms,
                           std::span<const ScreeningGrid> grids,
                           std::vector<Slot>& slots) const;
  void evaluate_group_scalar(double t, std::span<const double> arms,
                             std::span<const ScreeningGrid> grids,
                             std::vector<Slot>& slots) const;

  const MultiStateFit* fit_;
  std::size_t n_ = 0;
  std::size_t px_ = 0;
  std::vector<double> x_;        // n x px, row major
  std::vector<double> weights_;  // empty = unit
  std::vector<double> c01_, c02_, c13_;  // exp(gamma' x) per subject

  // Union grid of the 0->1 / 0->2 baseline jump times.
  std::vector<double> grid_;
  std::vector<double> d01_, d02_;  // baseline increments on the union grid
  std::vector<int> onset_index_;   // -1 or index into onset arrays
  std::vector<double> onset_time_;
  // Sojourn baseline.
  std::vector<double> w13_, dl13_;
};

// Convenience single-request wrappers.
EstimandResult estimate_M(const MultiStateFit& fit, const Cohort& cohort,
                          const WeightSpec& w1, const WeightSpec& w2, double s, double t,
                          double t0 = 0.0);
EstimandResult rmst(const MultiStateFit& fit, const Cohort& cohort, double s, double t,
                    double t0 = 0.0);
EstimandResult life_years_lost(const MultiStateFit& fit, const Cohort& cohort, double s,
                               double t, double t0 = 0.0);
EstimandResult qaly(const MultiStateFit& fit, const Cohort& cohort, double s, double t,
                    const QualityProfile& profile, double t0 = 0.0);
EstimandResult qaly_lost_disease(const MultiStateFit& fit, const Cohort& cohort, double s,
                                 double t, const QualityProfile& profile, double t0 = 0.0);
EstimandResult n_screenings(const MultiStateFit& fit, const Cohort& cohort, double s,
                            double t, double interval_years = 10.0, double t0 = 0.0);

/// One strategy row of an incremental cost-effectiveness comparison.
struct IcerRow {
  double s = kNeverScreen;
  double cost = 0.0;
  double effect = 0.0;
  double delta_cost = 0.0;
  double delta_effect = 0.0;
  std::optional<double> icer;  // absent (flagged) when delta_effect <= 0
};

/// ICER(s) = (cost(s) - cost(baseline)) / (effect(s) - effect(baseline)).
/// All results must share the horizon t; per-1000 scaling belongs to the
/// reporting layer.
std::vector<IcerRow> icer(std::span<const std::pair<EstimandResult, EstimandResult>> results,
                          const std::pair<EstimandResult, EstimandResult>& baseline);

}  // namespace mscea

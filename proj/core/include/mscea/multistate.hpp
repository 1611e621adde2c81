#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "mscea/cohort.hpp"
#include "mscea/cox.hpp"

namespace mscea {

/// The three fitted transitions of the illness-death model. fit01 and fit02
/// share the age timescale; fit13 lives on the sojourn timescale with onset
/// age and screening-at-onset as extra covariates.
struct MultiStateFit {
  CoxFit fit01;
  CoxFit fit02;
  CoxFit fit13;
  std::vector<std::string> covariate_names;
  int n_subjects = 0;
  std::array<int, 3> event_counts = {0, 0, 0};
};

/// Prebuilt risk-set problems for all three transitions, reusable across
/// bootstrap reweightings of the same cohort.
struct MultiStateProblem {
  CoxProblem p01;
  CoxProblem p02;
  CoxProblem p13;
  std::vector<std::string> covariate_names;
  int n_subjects = 0;

  static MultiStateProblem build(const Cohort& cohort);
  MultiStateFit fit(const SolverOptions& options = {},
                    std::span<const double> weights = {}) const;
};

/// Fits all three transitions by maximum partial likelihood. Competing-risks
/// convention: 0->1 treats death-without-disease as censoring at U and vice
/// versa; the dependence between the two latent times is left unspecified.
MultiStateFit fit_illness_death(const Cohort& cohort, const SolverOptions& options = {},
                                std::span<const double> weights = {});

/// Covariate-conditional cumulative hazard evaluators under the deterministic
/// intervention "screen exactly at age s" (s = +infinity means never screen).
/// Each evaluator splits the Breslow baseline integral at s:
///   Lambda(t|s) = m0 * Lambda0(min(t,s)) + I(t>s) * m1 * (Lambda0(t) - Lambda0(s))
/// with m0/m1 the pre-/post-screening hazard multipliers exp(linear predictor).
class HazardComponents {
 public:
  HazardComponents(const MultiStateFit& fit, std::span<const double> x, double s);

  double cumhaz01(double t) const;
  double cumhaz02(double t) const;
  /// Cumulative 1->3 hazard of the sojourn time given onset age r;
  /// screening enters through the frozen indicator Z(r; S=s) = I(s < r).
  double cumhaz13_sojourn(double sojourn, double onset_age) const;

  double screening_age() const { return s_; }

 private:
  const MultiStateFit* fit_;
  double s_;
  double pre01_, post01_;  // hazard multipliers before/after s
  double pre02_, post02_;
  double base13_;  // exp(gamma13' x), onset terms applied per call
};

/// Serialization of a fitted model (JSON): coefficients, covariance, baseline
/// jump lists, and cohort metadata.
void save_fit(const std::string& path, const MultiStateFit& fit);
MultiStateFit load_fit(const std::string& path);

}  // namespace mscea

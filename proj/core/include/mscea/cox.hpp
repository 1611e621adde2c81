#pragma once

#include <span>
#include <string>
#include <vector>

#include "mscea/cohort.hpp"
#include "mscea/linalg.hpp"
#include "mscea/step_function.hpp"

namespace mscea {

enum class Transition {
  healthy_to_disease,  // 0 -> 1, age timescale
  healthy_to_death,    // 0 -> 2, age timescale
  disease_to_death,    // 1 -> 3, sojourn timescale
};

enum class Timescale { age, sojourn };

std::string transition_label(Transition t);

/// Which transition to fit and on which clock. The sojourn transition runs on
/// the time-since-onset scale and additionally adjusts for the onset age and
/// the screening status frozen at onset.
struct TransitionSpec {
  Transition transition = Transition::healthy_to_disease;
  Timescale timescale = Timescale::age;
  bool include_onset_age = false;

  static TransitionSpec standard(Transition t) {
    TransitionSpec s;
    s.transition = t;
    s.timescale = t == Transition::disease_to_death ? Timescale::sojourn : Timescale::age;
    s.include_onset_age = t == Transition::disease_to_death;
    return s;
  }
};

enum class TieMethod { breslow };

struct SolverOptions {
  double tol = 1e-8;  // sup-norm of the score at the solution
  int max_iter = 50;
  TieMethod tie_method = TieMethod::breslow;
  int verbosity = 0;
};

/// Maximum partial likelihood fit of one transition: coefficients, inverse
/// observed information, Breslow cumulative baseline hazard, and convergence
/// diagnostics.
struct CoxFit {
  std::vector<std::string> coefficient_names;
  std::vector<double> coefficients;
  Matrix covariance;
  StepFunction baseline;
  double loglik = 0.0;
  int n_events = 0;
  int iterations = 0;
  double final_gradient_norm = 0.0;

  double coefficient(const std::string& name) const;
  /// Linear-predictor pieces: index of the screening coefficient and, when
  /// present, of the onset-age coefficient; remaining entries are the static
  /// covariates in cohort order.
  int screening_index() const;
  int onset_age_index() const;
};

/// Risk-set representation: each subject contributes one or two episodes
/// (start, stop] with static covariates; the single time-dependent covariate
/// Z(t; S) = I(S < t) is folded in by splitting the episode at S.
/// Built once per cohort and reused across bootstrap reweightings.
class CoxProblem {
 public:
  static CoxProblem build(const Cohort& cohort, const TransitionSpec& spec);

  /// Death as a single terminal event on the age scale, disease ignored;
  /// used by the overall-mortality comparator.
  static CoxProblem build_overall_mortality(const Cohort& cohort);

  int n_parameters() const { return p_; }
  int n_events_unweighted() const { return n_events_; }
  const std::vector<std::string>& parameter_names() const { return names_; }

  struct Evaluation {
    double loglik = 0.0;
    std::vector<double> score;
    Matrix info;
    double weighted_events = 0.0;
  };

  /// Log partial likelihood, analytic score and observed information at the
  /// given coefficients. Weights are per-subject multiplicities (empty = 1);
  /// a subject with weight w contributes exactly like w duplicated records.
  Evaluation evaluate(std::span<const double> beta, std::span<const double> weights) const;

  /// Breslow cumulative baseline hazard at the given coefficients.
  StepFunction breslow(std::span<const double> beta, std::span<const double> weights) const;

  /// Throws FitError naming any coefficient with zero variance on every event
  /// risk set (flat partial likelihood) or when there are no events.
  void check_identifiable(std::span<const double> weights) const;

  CoxFit fit(const SolverOptions& options, std::span<const double> weights) const;

 private:
  struct Episode {
    double start;
    double stop;
    bool event;
    int subject;  // index into the cohort
    std::vector<double> z;
  };

  void finalize(const Cohort& cohort);
  template <typename Body>
  void sweep(std::span<const double> beta, std::span<const double> weights, Body&& body) const;

  int p_ = 0;
  int n_subjects_ = 0;
  int n_events_ = 0;
  std::string label_;
  std::vector<std::string> names_;
  std::vector<Episode> episodes_;
  std::vector<int> by_stop_desc_;   // episode order, deterministic tie-break
  std::vector<int> by_start_desc_;  // episode order, deterministic tie-break
  std::vector<double> event_times_;  // distinct, ascending
  std::vector<std::vector<int>> event_episodes_;  // per event time, sorted
};

/// Fits one transition of the illness-death model by Newton-Raphson with
/// monotone step-halving from a zero start. The risk set at age t for the
/// 0->1 / 0->2 transitions is {i : U_i >= t > L_i}; for 1->3 the risk set at
/// sojourn time v is {i : delta1_i = 1, V_i >= v} with covariates
/// (T_i, Z(T_i; S_i), X_i).
CoxFit fit_transition(const Cohort& cohort, const TransitionSpec& spec,
                      const SolverOptions& options = {},
                      std::span<const double> weights = {});

/// Breslow cumulative baseline hazard at fixed coefficients.
StepFunction breslow(const Cohort& cohort, const TransitionSpec& spec,
                     std::span<const double> coefficients,
                     std::span<const double> weights = {});

struct LoglikScoreInfo {
  double loglik;
  std::vector<double> score;
  Matrix info;
};

/// Log partial likelihood, analytic score, and observed information at the
/// given coefficients.
LoglikScoreInfo loglik_score_info(const Cohort& cohort, const TransitionSpec& spec,
                                  std::span<const double> coefficients,
                                  std::span<const double> weights = {});

}  // namespace mscea

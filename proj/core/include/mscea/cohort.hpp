#pragma once

#include <optional>
#include <string>
#include <vector>

namespace mscea {

/// One observational record of the illness-death process.
///
/// u_time is the age at the first event, U = min(T, D, C); v_time is the
/// sojourn time from disease onset to death-or-censoring (0 when delta1 is
/// false). delta1 flags disease observed first, delta2 death without disease,
/// delta3 death after disease. entry_age is the left-truncation age; the
/// subject is only observed conditional on being event-free at entry.
struct Subject {
  std::string id;
  double entry_age = 0.0;
  double u_time = 0.0;
  bool delta1 = false;
  bool delta2 = false;
  double v_time = 0.0;
  bool delta3 = false;
  std::optional<double> screen_age;  // absent when never screened before U
  std::vector<double> covariates;

  /// Age at disease onset; only meaningful when delta1 is true.
  double onset_age() const { return u_time; }
};

/// Validates the Subject invariants. Returns an explanation for the first
/// violated rule, or nullopt when the record is admissible.
std::optional<std::string> validate_subject(const Subject& s);

/// Immutable-by-convention collection of subjects sharing a covariate space.
struct Cohort {
  std::vector<Subject> subjects;
  std::vector<std::string> covariate_names;
  std::string time_unit = "years";

  std::size_t size() const { return subjects.size(); }
  std::size_t covariate_dim() const { return covariate_names.size(); }

  /// Checks shared covariate dimensionality and id uniqueness; throws DataError.
  void validate() const;
};

/// Counterfactual/observational screening status Z(t; S) = I(S < t),
/// with strict inequality, identically 0 when S is absent.
class ScreeningIndicatorView {
 public:
  explicit ScreeningIndicatorView(std::optional<double> screen_age)
      : screen_age_(screen_age) {}
  explicit ScreeningIndicatorView(const Subject& s) : screen_age_(s.screen_age) {}

  double operator()(double t) const {
    return (screen_age_.has_value() && *screen_age_ < t) ? 1.0 : 0.0;
  }

 private:
  std::optional<double> screen_age_;
};

/// Per-subject counting and at-risk processes on the two timescales.
/// Y0 honors left truncation: Y0(t) = I(U >= t > L).
class CountingProcessView {
 public:
  explicit CountingProcessView(const Subject& s) : s_(&s) {}

  double n01(double t) const { return (s_->delta1 && s_->u_time <= t) ? 1.0 : 0.0; }
  double n02(double t) const { return (s_->delta2 && s_->u_time <= t) ? 1.0 : 0.0; }
  double n13(double sojourn) const {
    return (s_->delta3 && s_->v_time <= sojourn) ? 1.0 : 0.0;
  }
  double y0(double t) const {
    return (s_->u_time >= t && t > s_->entry_age) ? 1.0 : 0.0;
  }
  double y1(double sojourn) const {
    return (s_->delta1 && s_->v_time >= sojourn) ? 1.0 : 0.0;
  }

 private:
  const Subject* s_;
};

}  // namespace mscea

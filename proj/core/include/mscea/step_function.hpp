#pragma once

#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

namespace mscea {

/// Nondecreasing right-continuous jump function with value(0-) = 0.
/// Houses cumulative baseline hazards and cumulative incidence curves:
/// value(t) is the sum of increments at jump times <= t.
class StepFunction {
 public:
  StepFunction() = default;

  /// Takes sorted strictly-increasing times with nonnegative increments.
  /// Throws DataError if the invariants are violated.
  StepFunction(std::vector<double> times, std::vector<double> increments);

  /// Builds from possibly unsorted (time, increment) pairs; merges duplicates.
  static StepFunction from_jumps(std::vector<std::pair<double, double>> jumps);

  double value(double t) const;

  /// Left limit value(t-): sum of increments strictly before t.
  double value_before(double t) const;

  std::size_t jump_count() const { return times_.size(); }
  const std::vector<double>& times() const { return times_; }
  const std::vector<double>& increments() const { return increments_; }
  double total_mass() const;
  bool empty() const { return times_.empty(); }

 private:
  std::vector<double> times_;       // strictly increasing
  std::vector<double> increments_;  // nonnegative, same length
};

/// Riemann-Stieltjes sum of g against the jump measure of f over (a, b]:
/// sum of g(t_j) * increment_j for jump times t_j in (a, b].
/// Exact for step integrands against step measures; empty jump set gives 0.
double step_integral(const StepFunction& f, const std::function<double(double)>& g,
                     double a, double b);

}  // namespace mscea

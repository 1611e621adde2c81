#pragma once

#include <functional>
#include <vector>

namespace mscea {

/// Adaptive Simpson integration of f over [a, b] to absolute tolerance tol.
/// Throws QuadratureError when the recursion depth limit is hit before the
/// tolerance is met.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol, int max_depth = 64);

/// Same, with mandatory split points (kink locations such as the screening
/// switch age); the tolerance is divided across the panels.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        const std::vector<double>& breakpoints, double tol,
                        int max_depth = 64);

/// Gauss-Hermite nodes/weights for integrals of the form
/// int f(x) exp(-x^2) dx; nodes ascending. Computed by Newton iteration on
/// the Hermite recurrence.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
  explicit GaussHermite(int n);

  /// E[f(X)] for X ~ Normal(0, 1).
  double normal_expectation(const std::function<double(double)>& f) const;
};

}  // namespace mscea

#include "mscea/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include "mscea/errors.hpp"

namespace mscea {

namespace {

double simpson_recurse(const std::function<double(double)>& f, double a, double fa,
                       double b, double fb, double m, double fm, double whole, double tol,
                       int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  if (depth <= 0) throw QuadratureError("adaptive quadrature: depth limit reached");
  return simpson_recurse(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_recurse(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        double tol, int max_depth) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_recurse(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

double adaptive_simpson(const std::function<double(double)>& f, double a, double b,
                        const std::vector<double>& breakpoints, double tol,
                        int max_depth) {
  if (!(b > a)) return 0.0;
  std::vector<double> pts{a, b};
  for (double c : breakpoints) {
    if (c > a && c < b) pts.push_back(c);
  }
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  const double panel_tol = tol / static_cast<double>(pts.size() - 1);
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    // Breakpoints mark jump discontinuities (the screening switch); nudge the
    // panel endpoints inward so every evaluation sees the interior branch.
    const double lo = pts[k], hi = pts[k + 1];
    const double eps = (hi - lo) * 1e-9;
    const double m = 0.5 * (lo + hi);
    const double fa = f(lo + eps), fb = f(hi - eps), fm = f(m);
    const double whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb);
    sum += simpson_recurse(f, lo, fa, hi, fb, m, fm, whole, panel_tol, max_depth);
  }
  return sum;
}

GaussHermite::GaussHermite(int n) {
  if (n < 1) throw ConfigError("Gauss-Hermite order must be >= 1");
  nodes.resize(n);
  weights.resize(n);
  const double pi_quarter_root = 0.7511255444649425;  // pi^(-1/4)
  // Newton iteration per root, largest first; standard initial guesses chain
  // off the previously found roots.
  const int half = (n + 1) / 2;
  std::vector<double> roots(half);
  for (int i = 0; i < half; ++i) {
    double x;
    if (i == 0) {
      x = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      x = roots[0] - 1.14 * std::pow(static_cast<double>(n), 0.426) / roots[0];
    } else if (i == 2) {
      x = 1.86 * roots[1] - 0.86 * roots[0];
    } else if (i == 3) {
      x = 1.91 * roots[2] - 0.91 * roots[1];
    } else {
      x = 2.0 * roots[i - 1] - roots[i - 2];
    }
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Orthonormal Hermite recurrence.
      double p1 = pi_quarter_root;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = x * std::sqrt(2.0 / (j + 1.0)) * p2 - std::sqrt(j / (j + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double dx = p1 / pp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    roots[i] = x;
    nodes[n - 1 - i] = x;
    nodes[i] = -x;
    const double w = 2.0 / (pp * pp);
    weights[n - 1 - i] = w;
    weights[i] = w;
  }
  if (n % 2 == 1) nodes[n / 2] = 0.0;
}

double GaussHermite::normal_expectation(const std::function<double(double)>& f) const {
  const double inv_sqrt_pi = 0.5641895835477563;
  const double sqrt2 = 1.4142135623730951;
  double s = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    s += weights[i] * f(sqrt2 * nodes[i]);
  }
  return s * inv_sqrt_pi;
}

}  // namespace mscea

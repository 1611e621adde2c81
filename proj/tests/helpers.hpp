#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mscea/cohort.hpp"
#include "mscea/cox.hpp"
#include "mscea/estimands.hpp"
#include "mscea/multistate.hpp"
#include "mscea/rng.hpp"

namespace mscea::testing {

inline Subject subject(std::string id, double entry, double u, int d1, int d2, double v,
                       int d3, std::optional<double> s, std::vector<double> x) {
  Subject out;
  out.id = std::move(id);
  out.entry_age = entry;
  out.u_time = u;
  out.delta1 = d1 != 0;
  out.delta2 = d2 != 0;
  out.v_time = v;
  out.delta3 = d3 != 0;
  out.screen_age = s;
  out.covariates = std::move(x);
  return out;
}

inline Cohort make_cohort(std::vector<Subject> subjects,
                          std::vector<std::string> names = {"x"}) {
  Cohort c;
  c.subjects = std::move(subjects);
  c.covariate_names = std::move(names);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// Independent oracle: Breslow log partial likelihood by direct risk-set
// enumeration over subjects (no episode machinery, no shared code paths).
// ---------------------------------------------------------------------------

inline double enumerated_log_partial_likelihood(const Cohort& cohort, Transition tr,
                                                std::span<const double> beta) {
  auto z_screen = [](const Subject& s, double t) {
    return (s.screen_age.has_value() && *s.screen_age < t) ? 1.0 : 0.0;
  };
  double ll = 0.0;
  if (tr == Transition::disease_to_death) {
    for (const Subject& ev : cohort.subjects) {
      if (!(ev.delta1 && ev.delta3)) continue;
      const double tt = ev.v_time;
      auto lp = [&](const Subject& s) {
        double v = beta[0] * s.u_time + beta[1] * z_screen(s, s.u_time);
        for (std::size_t k = 0; k < s.covariates.size(); ++k) {
          v += beta[2 + k] * s.covariates[k];
        }
        return v;
      };
      double denom = 0.0;
      for (const Subject& s : cohort.subjects) {
        if (s.delta1 && s.v_time >= tt) denom += std::exp(lp(s));
      }
      ll += lp(ev) - std::log(denom);
    }
  } else {
    const bool disease = tr == Transition::healthy_to_disease;
    for (const Subject& ev : cohort.subjects) {
      if (!(disease ? ev.delta1 : ev.delta2)) continue;
      const double t = ev.u_time;
      auto lp = [&](const Subject& s) {
        double v = beta[0] * z_screen(s, t);
        for (std::size_t k = 0; k < s.covariates.size(); ++k) {
          v += beta[1 + k] * s.covariates[k];
        }
        return v;
      };
      double denom = 0.0;
      for (const Subject& s : cohort.subjects) {
        if (s.u_time >= t && t > s.entry_age) denom += std::exp(lp(s));
      }
      ll += lp(ev) - std::log(denom);
    }
  }
  return ll;
}

/// 1-D maximizer: coarse grid then bisection on the derivative sign via
/// golden-section refinement. Assumes a unimodal objective on [lo, hi].
inline double maximize_1d(const std::function<double(double)>& f, double lo, double hi) {
  double best_x = lo, best_v = f(lo);
  const int grid = 400;
  for (int i = 1; i <= grid; ++i) {
    const double x = lo + (hi - lo) * i / grid;
    const double v = f(x);
    if (v > best_v) {
      best_v = v;
      best_x = x;
    }
  }
  double a = std::max(lo, best_x - (hi - lo) / grid);
  double b = std::min(hi, best_x + (hi - lo) / grid);
  const double gr = 0.6180339887498949;
  double c = b - gr * (b - a), d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  for (int it = 0; it < 200 && (b - a) > 1e-12; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

// ---------------------------------------------------------------------------
// Monte Carlo oracle over the fitted discrete transition distributions:
// simulates trajectories (first transition from the product-integral masses
// on the age grid, then the sojourn distribution) and averages the path-level
// measure. Independent of the analytic integration path in the evaluator.
// ---------------------------------------------------------------------------

struct FittedPathOracle {
  const MultiStateFit* fit;
  const Cohort* cohort;
  double s;
  double t;
  double t0;

  struct SubjectTable {
    std::vector<double> times;   // first-event grid
    std::vector<double> mass01;  // onset masses
    std::vector<double> mass02;  // death-without-disease masses
  };
  std::vector<SubjectTable> tables;
  std::vector<double> soj_times;  // sojourn baseline jumps
  std::vector<double> soj_incr;

  FittedPathOracle(const MultiStateFit& f, const Cohort& c, double s_, double t_, double t0_)
      : fit(&f), cohort(&c), s(s_), t(t_), t0(t0_) {
    const double b01 = f.fit01.coefficients[f.fit01.screening_index()];
    const double b02 = f.fit02.coefficients[f.fit02.screening_index()];
    auto static_lp = [](const CoxFit& cf, const std::vector<double>& x, int skip1,
                        int skip2) {
      double lp = 0.0;
      std::size_t ix = 0;
      for (std::size_t k = 0; k < cf.coefficients.size(); ++k) {
        if (static_cast<int>(k) == skip1 || static_cast<int>(k) == skip2) continue;
        lp += cf.coefficients[k] * x[ix++];
      }
      return lp;
    };
    // merged grid of both baselines
    std::vector<std::pair<double, std::pair<double, double>>> merged;
    for (std::size_t j = 0; j < f.fit01.baseline.times().size(); ++j) {
      merged.push_back({f.fit01.baseline.times()[j], {f.fit01.baseline.increments()[j], 0.0}});
    }
    for (std::size_t j = 0; j < f.fit02.baseline.times().size(); ++j) {
      merged.push_back({f.fit02.baseline.times()[j], {0.0, f.fit02.baseline.increments()[j]}});
    }
    std::sort(merged.begin(), merged.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    // collapse equal times
    std::vector<std::pair<double, std::pair<double, double>>> grid;
    for (const auto& e : merged) {
      if (!grid.empty() && grid.back().first == e.first) {
        grid.back().second.first += e.second.first;
        grid.back().second.second += e.second.second;
      } else {
        grid.push_back(e);
      }
    }
    tables.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      const auto& x = c.subjects[i].covariates;
      const double c01 = std::exp(static_lp(f.fit01, x, f.fit01.screening_index(), -1));
      const double c02 = std::exp(static_lp(f.fit02, x, f.fit02.screening_index(), -1));
      SubjectTable tab;
      double p = 1.0;
      for (const auto& [g, dd] : grid) {
        if (g > t) break;
        const double h1 = c01 * (s < g ? std::exp(b01) : 1.0) * dd.first;
        const double h2 = c02 * (s < g ? std::exp(b02) : 1.0) * dd.second;
        const double tot = h1 + h2;
        if (tot <= 0.0) continue;
        double d1, d2;
        if (tot < 1.0) {
          d1 = p * h1;
          d2 = p * h2;
        } else {
          d1 = p * h1 / tot;
          d2 = p * h2 / tot;
        }
        p = std::max(0.0, p - d1 - d2);
        tab.times.push_back(g);
        tab.mass01.push_back(d1);
        tab.mass02.push_back(d2);
      }
      tables[i] = std::move(tab);
    }
    soj_times = f.fit13.baseline.times();
    soj_incr = f.fit13.baseline.increments();
  }

  /// One sampled path; returns the measure value.
  template <typename MeasureFn>
  double sample(SplitMix64& rng, MeasureFn&& measure) const {
    const std::size_t i = static_cast<std::size_t>(rng.uniform01() * cohort->size());
    const SubjectTable& tab = tables[std::min(i, cohort->size() - 1)];
    double u = rng.uniform01();
    double onset = std::numeric_limits<double>::infinity();
    double death = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < tab.times.size(); ++j) {
      if (u < tab.mass01[j]) {
        onset = tab.times[j];
        break;
      }
      u -= tab.mass01[j];
      if (u < tab.mass02[j]) {
        death = tab.times[j];
        break;
      }
      u -= tab.mass02[j];
    }
    if (std::isfinite(onset)) {
      // sojourn survival for this onset
      const CoxFit& f13 = fit->fit13;
      const auto& x = cohort->subjects[std::min(i, cohort->size() - 1)].covariates;
      double lp = f13.coefficients[f13.onset_age_index()] * onset +
                  f13.coefficients[f13.screening_index()] * (s < onset ? 1.0 : 0.0);
      std::size_t ix = 0;
      for (std::size_t k = 0; k < f13.coefficients.size(); ++k) {
        if (static_cast<int>(k) == f13.screening_index() ||
            static_cast<int>(k) == f13.onset_age_index()) {
          continue;
        }
        lp += f13.coefficients[k] * x[ix++];
      }
      const double mu = std::exp(lp);
      double q = 1.0;
      double u2 = rng.uniform01();
      death = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < soj_times.size(); ++k) {
        const double h = mu * soj_incr[k];
        const double dm = h >= 1.0 ? q : q * h;
        if (u2 < dm) {
          death = onset + soj_times[k];
          break;
        }
        u2 -= dm;
        q -= dm;
        if (q <= 0.0) break;
      }
    }
    return measure(onset, death);
  }
};

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
inline std::pair<double, double> ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const std::size_t n = a.size(), m = b.size();
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < n && j < m) {
    const double x = std::min(a[i], b[j]);
    while (i < n && a[i] <= x) ++i;
    while (j < m && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / n - static_cast<double>(j) / m));
  }
  const double ne = std::sqrt(static_cast<double>(n) * m / (n + m));
  const double lambda = (ne + 0.12 + 0.11 / ne) * d;
  double p = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    p += sign * 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
    sign = -sign;
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

}  // namespace mscea::testing

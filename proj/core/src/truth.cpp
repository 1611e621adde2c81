#include <cmath>
#include <limits>

#include "mscea/errors.hpp"
#include "mscea/quadrature.hpp"
#include "mscea/rng.hpp"
#include "mscea/simgen.hpp"

namespace mscea {

namespace {

// Conditional-on-X machinery of the generating model under the deterministic
// intervention "screen exactly at age s" (Z(u; s) = I(s < u), strict).
struct ConditionalModel {
  const GeneratorSpec* spec;
  double s;
  double x;
  double c01, c01_post;  // hazard multipliers for 0->1 before/after s
  double c02, c02_post;

  ConditionalModel(const GeneratorSpec& g, double s_, double x_) : spec(&g), s(s_), x(x_) {
    c01 = std::exp(g.h01.log_hr_x * x);
    c01_post = c01 * std::exp(g.h01.log_hr_screen);
    c02 = std::exp(g.h02.log_hr_x * x);
    c02_post = c02 * std::exp(g.h02.log_hr_screen);
  }

  double cumhaz01(double t) const {
    const double base_s = std::isinf(s) ? 0.0 : spec->h01.base.cumhaz(std::min(t, s));
    if (!(t > s)) return c01 * spec->h01.base.cumhaz(t);
    return c01 * base_s + c01_post * (spec->h01.base.cumhaz(t) - base_s);
  }
  double cumhaz02(double t) const {
    const double base_s = std::isinf(s) ? 0.0 : spec->h02.base.cumhaz(std::min(t, s));
    if (!(t > s)) return c02 * spec->h02.base.cumhaz(t);
    return c02 * base_s + c02_post * (spec->h02.base.cumhaz(t) - base_s);
  }
  double hazard01(double t) const {
    return (t > s ? c01_post : c01) * spec->h01.base.hazard(t);
  }
  double hazard02(double t) const {
    return (t > s ? c02_post : c02) * spec->h02.base.hazard(t);
  }
  double p1(double t) const { return std::exp(-cumhaz01(t) - cumhaz02(t)); }
  double sojourn_rate(double onset) const { return spec->sojourn.rate(onset, x); }
};

double conditional_truth(const TruthRequest& req, const ConditionalModel& m) {
  const double t = req.t;
  const double t0 = req.t0;
  // Panel boundaries: the screening switch, the window origin, and the
  // hazard support origins. Shifted Weibulls with shape < 2 have an algebraic
  // endpoint singularity at the origin, so a few geometric micro-panels keep
  // the adaptive recursion shallow there.
  std::vector<double> breaks = {std::isinf(m.s) ? -1.0 : m.s, t0};
  for (double origin : {m.spec->h01.base.origin, m.spec->h02.base.origin}) {
    breaks.push_back(origin);
    if (origin > 0.0) {
      breaks.push_back(origin + 0.01);
      breaks.push_back(origin + 0.1);
      breaks.push_back(origin + 1.0);
    }
  }
  switch (req.kind) {
    case TruthKind::rmst_disease_free:
      return adaptive_simpson([&](double u) { return m.p1(u); }, t0, t, breaks, req.tol);
    case TruthKind::rmst_disease_state: {
      // E time in state 1 within (t0, t]: onset at v, exponential residual
      // survival integrated in closed form.
      auto f = [&](double v) {
        const double rho = m.sojourn_rate(v);
        const double a = std::max(v, t0);
        const double inner = (std::exp(-(a - v) * rho) - std::exp(-(t - v) * rho)) / rho;
        return m.p1(v) * m.hazard01(v) * inner;
      };
      return adaptive_simpson(f, 0.0, t, breaks, req.tol);
    }
    case TruthKind::rmst_total: {
      TruthRequest r1 = req;
      r1.kind = TruthKind::rmst_disease_free;
      TruthRequest r2 = req;
      r2.kind = TruthKind::rmst_disease_state;
      return conditional_truth(r1, m) + conditional_truth(r2, m);
    }
    case TruthKind::lost_disease_path: {
      auto f = [&](double v) {
        const double rho = m.sojourn_rate(v);
        const double a = std::max(v, t0);
        const double inner =
            (t - a) - (std::exp(-(a - v) * rho) - std::exp(-(t - v) * rho)) / rho;
        return m.p1(v) * m.hazard01(v) * inner;
      };
      return adaptive_simpson(f, 0.0, t, breaks, req.tol);
    }
    case TruthKind::lost_other_causes: {
      auto f = [&](double v) { return m.p1(v) * m.hazard02(v) * (t - std::max(v, t0)); };
      return adaptive_simpson(f, 0.0, t, breaks, req.tol);
    }
    case TruthKind::screenings: {
      if (std::isinf(m.s)) return 0.0;
      double sum = 0.0;
      for (double epoch = m.s; epoch <= t; epoch += req.screening_interval) {
        sum += m.p1(epoch);
      }
      return sum;
    }
  }
  throw ConfigError("unknown truth kind");
}

}  // namespace

double truth(const TruthRequest& req, const GeneratorSpec& spec) {
  spec.validate();
  if (!(req.t >= req.t0)) throw ConfigError("truth: t must be >= t0");
  GaussHermite gh(req.gh_nodes);
  return gh.normal_expectation([&](double x) {
    ConditionalModel m(spec, req.s, x);
    return conditional_truth(req, m);
  });
}

MonteCarloValue mc_truth(const TruthRequest& req, const GeneratorSpec& spec,
                         std::int64_t n_paths, std::uint64_t seed) {
  spec.validate();
  double sum = 0.0, sumsq = 0.0;
  const double t = req.t, t0 = req.t0;
  for (std::int64_t i = 0; i < n_paths; ++i) {
    SplitMix64 rng(derive_stream_seed(seed, static_cast<std::uint64_t>(i)));
    const double x = rng.normal();
    ConditionalModel m(spec, req.s, x);

    // Latent first-event pair via cumulative-hazard inversion with the
    // screening switch; no censoring in the potential-outcome world.
    auto invert = [&](bool disease, double e) {
      const TransitionGen& gen = disease ? spec.h01 : spec.h02;
      const double cx = std::exp(gen.log_hr_x * x);
      double h = e / cx;
      const double at_s =
          std::isinf(req.s) ? std::numeric_limits<double>::infinity()
                            : gen.base.cumhaz(req.s);
      if (h <= at_s) return gen.base.invert_cumhaz(h);
      return gen.base.invert_cumhaz(at_s + (h - at_s) / std::exp(gen.log_hr_screen));
    };
    const double t_lat = invert(true, rng.exp1());
    const double d_lat = invert(false, rng.exp1());
    const bool disease_first = t_lat <= d_lat;
    double death_age;
    double onset_age = std::numeric_limits<double>::infinity();
    if (disease_first) {
      onset_age = t_lat;
      death_age = t_lat + rng.exp1() / m.sojourn_rate(t_lat);
    } else {
      death_age = d_lat;
    }

    double value = 0.0;
    auto span_len = [&](double lo, double hi) { return std::max(0.0, hi - lo); };
    switch (req.kind) {
      case TruthKind::rmst_disease_free:
        value = span_len(t0, std::min({onset_age, death_age, t}));
        break;
      case TruthKind::rmst_disease_state:
        value = disease_first
                    ? span_len(std::max(onset_age, t0), std::min(death_age, t))
                    : 0.0;
        break;
      case TruthKind::rmst_total:
        value = span_len(t0, std::min(death_age, t));
        break;
      case TruthKind::lost_disease_path:
        value = disease_first ? span_len(std::max(death_age, t0), t) : 0.0;
        break;
      case TruthKind::lost_other_causes:
        value = disease_first ? 0.0 : span_len(std::max(death_age, t0), t);
        break;
      case TruthKind::screenings: {
        if (!std::isinf(req.s)) {
          const double alive_until = std::min({onset_age, death_age, t});
          for (double epoch = req.s; epoch <= t; epoch += req.screening_interval) {
            if (alive_until >= epoch) value += 1.0;
          }
        }
        break;
      }
    }
    sum += value;
    sumsq += value * value;
  }
  MonteCarloValue out;
  const double n = static_cast<double>(n_paths);
  out.mean = sum / n;
  const double var = std::max(0.0, (sumsq - sum * sum / n) / (n - 1.0));
  out.se = std::sqrt(var / n);
  return out;
}

}  // namespace mscea

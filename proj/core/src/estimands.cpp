#include "mscea/estimands.hpp"

#include <algorithm>
#include <cmath>

#include "mscea/errors.hpp"

namespace mscea {

void QualityProfile::validate() const {
  auto ok = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!ok(initial_care) || !ok(continuing_care) || !ok(terminal_care)) {
    throw ConfigError("quality scores must lie in [0, 1]");
  }
}

std::string measure_label(Measure m) {
  switch (m) {
    case Measure::rmst: return "rmst";
    case Measure::qaly: return "qaly";
    case Measure::life_years_lost: return "life_years_lost";
    case Measure::qaly_lost_disease: return "qaly_lost_disease";
    case Measure::screenings: return "screenings";
  }
  return "?";
}

Measure measure_from_label(const std::string& label) {
  if (label == "rmst") return Measure::rmst;
  if (label == "qaly") return Measure::qaly;
  if (label == "life_years_lost" || label == "lost") return Measure::life_years_lost;
  if (label == "qaly_lost_disease" || label == "qaly-lost") return Measure::qaly_lost_disease;
  if (label == "screenings") return Measure::screenings;
  throw ConfigError("unknown measure '" + label + "'");
}

double EstimandResult::component(const std::string& name) const {
  for (const auto& [k, v] : components) {
    if (k == name) return v;
  }
  throw ConfigError("estimand result has no component '" + name + "'");
}

namespace {

// One competing-risks step of the discrete product-integral. h1 and h2 are
// the covariate-conditional hazard increments at this jump; fills the state
// masses and returns the survival after the jump. When h1 + h2 >= 1 (extreme
// multipliers on a sparse risk set) the remaining mass is allocated
// proportionally so the three curves stay a proper subdistribution system.
inline double survival_step(double p, double h1, double h2, double& df1, double& df2) {
  const double tot = h1 + h2;
  if (tot <= 0.0) {
    df1 = df2 = 0.0;
    return p;
  }
  if (tot < 1.0) {
    df1 = p * h1;
    df2 = p * h2;
    double pn = p - df1 - df2;
    return pn > 0.0 ? pn : 0.0;
  }
  df1 = p * (h1 / tot);
  df2 = p * (h2 / tot);
  return 0.0;
}

// Single-hazard version for the sojourn survival.
inline double survival_step1(double p, double h, double& dm) {
  if (h <= 0.0) {
    dm = 0.0;
    return p;
  }
  if (h < 1.0) {
    dm = p * h;
    double pn = p - dm;
    return pn > 0.0 ? pn : 0.0;
  }
  dm = p;
  return 0.0;
}

inline double overlap(double lo, double hi, double a, double b) {
  const double l = std::max(lo, a), h = std::min(hi, b);
  return h > l ? h - l : 0.0;
}

// Integral over [lo, hi] of the piecewise quality score Q(u; onset, death):
// initial care in the first year after onset, terminal care in the last year
// of life, continuing care in between; short survivors lose the continuing
// (and then the initial) phase, terminal care taking precedence. death may be
// +infinity (no death within the fitted support or horizon).
double quality_integral(const QualityProfile& q, double onset, double death, double lo,
                        double hi) {
  if (hi <= lo) return 0.0;
  if (std::isinf(death)) {
    return q.initial_care * overlap(lo, hi, onset, onset + 1.0) +
           q.continuing_care * overlap(lo, hi, onset + 1.0, hi);
  }
  const double dur = death - onset;
  if (dur > 2.0) {
    return q.initial_care * overlap(lo, hi, onset, onset + 1.0) +
           q.continuing_care * overlap(lo, hi, onset + 1.0, death - 1.0) +
           q.terminal_care * overlap(lo, hi, death - 1.0, death);
  }
  if (dur > 1.0) {
    return q.initial_care * overlap(lo, hi, onset, death - 1.0) +
           q.terminal_care * overlap(lo, hi, death - 1.0, death);
  }
  return q.terminal_care * overlap(lo, hi, onset, death);
}

// Counterfactual quality weight for years lost through the disease path:
// the forgone years are valued at the disease-state score the subject would
// have carried (initial care in the first year after onset, continuing care
// afterwards; terminal care applies only to lived years).
double quality_lost_integral(const QualityProfile& q, double onset, double lo, double hi) {
  if (hi <= lo) return 0.0;
  return q.initial_care * overlap(lo, hi, onset, onset + 1.0) +
         q.continuing_care * overlap(lo, hi, onset + 1.0, hi);
}

double pairwise_sum(const double* v, std::size_t n) {
  if (n <= 8) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i];
    return s;
  }
  const std::size_t half = n / 2;
  return pairwise_sum(v, half) + pairwise_sum(v + half, n - half);
}

double static_linear_predictor(const CoxFit& f, std::span<const double> x) {
  double lp = 0.0;
  const int skip1 = f.screening_index();
  const int skip2 = f.onset_age_index();
  std::size_t ix = 0;
  for (std::size_t k = 0; k < f.coefficients.size(); ++k) {
    if (static_cast<int>(k) == skip1 || static_cast<int>(k) == skip2) continue;
    lp += f.coefficients[k] * x[ix++];
  }
  return lp;
}

}  // namespace

struct EstimandEvaluator::Slot {
  Measure measure;
  double s;
  double t0;
  QualityProfile profile;
  double interval;
  int request_index;
  int arm;  // index into the group's distinct screening ages
  // per-subject weighted component accumulators
  std::vector<double> comp1, comp2;
};

struct EstimandEvaluator::ScreeningGrid {
  double s = kNeverScreen;
  std::vector<double> d01s, d02s;   // screening factor folded into increments
  std::vector<double> onset_mult;   // exp(alpha v + beta13 Z(v;s)) per onset
};

EstimandEvaluator::EstimandEvaluator(const MultiStateFit& fit, const Cohort& cohort,
                                     std::span<const double> weights)
    : fit_(&fit) {
  if (cohort.covariate_names.size() != fit.covariate_names.size()) {
    throw ConfigError("cohort covariate dimension does not match the fit");
  }
  if (!weights.empty() && weights.size() != cohort.size()) {
    throw ConfigError("weights length does not match the cohort");
  }
  n_ = cohort.size();
  px_ = cohort.covariate_names.size();
  x_.resize(n_ * px_);
  for (std::size_t i = 0; i < n_; ++i) {
    const auto& cov = cohort.subjects[i].covariates;
    std::copy(cov.begin(), cov.end(), x_.begin() + i * px_);
  }
  weights_.assign(weights.begin(), weights.end());

  c01_.resize(n_);
  c02_.resize(n_);
  c13_.resize(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    std::span<const double> xi(x_.data() + i * px_, px_);
    c01_[i] = std::exp(static_linear_predictor(fit.fit01, xi));
    c02_[i] = std::exp(static_linear_predictor(fit.fit02, xi));
    c13_[i] = std::exp(static_linear_predictor(fit.fit13, xi));
  }

  // Union grid of the two age-scale baselines.
  const auto& t1 = fit.fit01.baseline.times();
  const auto& i1 = fit.fit01.baseline.increments();
  const auto& t2 = fit.fit02.baseline.times();
  const auto& i2 = fit.fit02.baseline.increments();
  std::size_t a = 0, b = 0;
  while (a < t1.size() || b < t2.size()) {
    double ta = a < t1.size() ? t1[a] : std::numeric_limits<double>::infinity();
    double tb = b < t2.size() ? t2[b] : std::numeric_limits<double>::infinity();
    double t = std::min(ta, tb);
    grid_.push_back(t);
    d01_.push_back(ta == t ? i1[a] : 0.0);
    d02_.push_back(tb == t ? i2[b] : 0.0);
    if (ta == t) ++a;
    if (tb == t) ++b;
  }
  onset_index_.assign(grid_.size(), -1);
  for (std::size_t m = 0; m < grid_.size(); ++m) {
    if (d01_[m] > 0.0) {
      onset_index_[m] = static_cast<int>(onset_time_.size());
      onset_time_.push_back(grid_[m]);
    }
  }
  w13_ = fit.fit13.baseline.times();
  dl13_ = fit.fit13.baseline.increments();
}

void EstimandEvaluator::build_screening_grid(double s, ScreeningGrid& grid) const {
  grid.s = s;
  const double e01 = std::exp(fit_->fit01.coefficients[fit_->fit01.screening_index()]);
  const double e02 = std::exp(fit_->fit02.coefficients[fit_->fit02.screening_index()]);
  const double alpha = fit_->fit13.coefficients[fit_->fit13.onset_age_index()];
  const double b13 = fit_->fit13.coefficients[fit_->fit13.screening_index()];
  grid.d01s.resize(grid_.size());
  grid.d02s.resize(grid_.size());
  for (std::size_t m = 0; m < grid_.size(); ++m) {
    const bool post = s < grid_[m];  // Z(t; s) = I(s < t)
    grid.d01s[m] = post ? d01_[m] * e01 : d01_[m];
    grid.d02s[m] = post ? d02_[m] * e02 : d02_[m];
  }
  grid.onset_mult.resize(onset_time_.size());
  for (std::size_t j = 0; j < onset_time_.size(); ++j) {
    const double v = onset_time_[j];
    grid.onset_mult[j] = std::exp(alpha * v + (s < v ? b13 : 0.0));
  }
}

// ---------------------------------------------------------------------------
// Covariate-conditional building blocks.
// ---------------------------------------------------------------------------

double EstimandEvaluator::p1(std::span<const double> x, double s, double t) const {
  if (x.size() != px_) throw ConfigError("covariate dimension mismatch");
  if (t < 0.0) throw ConfigError("p1 requires t >= 0");
  ScreeningGrid sg;
  build_screening_grid(s, sg);
  const double c01 = std::exp(static_linear_predictor(fit_->fit01, x));
  const double c02 = std::exp(static_linear_predictor(fit_->fit02, x));
  double p = 1.0, df1, df2;
  for (std::size_t m = 0; m < grid_.size() && grid_[m] <= t; ++m) {
    p = survival_step(p, c01 * sg.d01s[m], c02 * sg.d02s[m], df1, df2);
  }
  return p;
}

StepFunction EstimandEvaluator::cif_disease(std::span<const double> x, double s,
                                            double t) const {
  if (x.size() != px_) throw ConfigError("covariate dimension mismatch");
  ScreeningGrid sg;
  build_screening_grid(s, sg);
  const double c01 = std::exp(static_linear_predictor(fit_->fit01, x));
  const double c02 = std::exp(static_linear_predictor(fit_->fit02, x));
  std::vector<double> times, inc;
  double p = 1.0, df1, df2;
  for (std::size_t m = 0; m < grid_.size() && grid_[m] <= t; ++m) {
    p = survival_step(p, c01 * sg.d01s[m], c02 * sg.d02s[m], df1, df2);
    if (d01_[m] > 0.0) {
      times.push_back(grid_[m]);
      inc.push_back(df1);
    }
  }
  return StepFunction(std::move(times), std::move(inc));
}

double EstimandEvaluator::p13(double onset_age, std::span<const double> x, double s,
                              double t) const {
  if (x.size() != px_) throw ConfigError("covariate dimension mismatch");
  if (t < onset_age) throw ConfigError("p13 requires t >= onset age");
  const CoxFit& f = fit_->fit13;
  const double alpha = f.coefficients[f.onset_age_index()];
  const double b13 = f.coefficients[f.screening_index()];
  const double mu = std::exp(static_linear_predictor(f, x) + alpha * onset_age +
                             (s < onset_age ? b13 : 0.0));
  const double sojourn = t - onset_age;
  double q = 1.0, dm;
  for (std::size_t k = 0; k < w13_.size() && w13_[k] <= sojourn; ++k) {
    q = survival_step1(q, mu * dl13_[k], dm);
  }
  return q;
}

double EstimandEvaluator::p2(std::span<const double> x, double s, double t) const {
  StepFunction ft = cif_disease(x, s, t);
  double out = 0.0;
  for (std::size_t j = 0; j < ft.jump_count(); ++j) {
    out += p13(ft.times()[j], x, s, t) * ft.increments()[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Population-averaged batched evaluation.
//
// Requests are grouped by horizon t; all screening arms of a group share one
// cohort pass. Pass 1 walks the union grid of the age-scale baselines per
// arm (survival integrals, incidence masses, screening epochs); pass 2 walks
// the sojourn baseline once per subject with one lane per onset jump.
//
// The lane schedule (segment lengths, window crossings, horizon clippings) is
// identical for every subject, so it is precomputed per group and the inner
// loop is a pair of elementwise updates over the active lanes:
//   acc[j] += q[j] * seg;  q[j] *= 1 - mu[j] * dL[k]
// Groups containing quality-weighted measures take a scalar fallback that
// additionally mixes the care-phase weights over the death-time atoms.
// ---------------------------------------------------------------------------

namespace {

struct LaneEvent {
  enum class Kind { capture, close };
  Kind kind;
  int lane;
  int window;   // capture only
  double len;   // age offset from the segment start
};

// Per-t-group lane schedule, shared by all subjects and arms.
struct LaneSchedule {
  std::size_t n_lanes = 0;
  std::vector<double> seg;              // K segment lengths (w13 diffs)
  std::vector<std::size_t> active_n;    // lanes taking the full segment k
  std::vector<std::vector<LaneEvent>> events;  // per k in [0, K]
};

}  // namespace

struct EstimandEvaluator::SubjectPass {};  // legacy placeholder

std::vector<EstimandResult> EstimandEvaluator::evaluate(
    std::span<const EstimandRequest> requests) const {
  std::vector<EstimandResult> results(requests.size());

  std::vector<int> order;
  for (std::size_t r = 0; r < requests.size(); ++r) {
    const EstimandRequest& rq = requests[r];
    if (!(rq.t >= 0.0) || !std::isfinite(rq.t)) {
      throw ConfigError("horizon t must be finite and >= 0");
    }
    if (!(rq.t >= rq.t0)) throw ConfigError("horizon t must be >= t0");
    if (rq.measure == Measure::qaly || rq.measure == Measure::qaly_lost_disease) {
      rq.profile.validate();
    }
    if (rq.measure == Measure::screenings) {
      if (!(rq.screening_interval > 0.0)) throw ConfigError("screening interval must be > 0");
      if (!(rq.s > 0.0)) throw ConfigError("screenings requires s > 0");
    }
    order.push_back(static_cast<int>(r));
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (requests[a].t != requests[b].t) return requests[a].t < requests[b].t;
    return requests[a].s < requests[b].s;
  });

  const double wsum = weights_.empty()
                          ? static_cast<double>(n_)
                          : pairwise_sum(weights_.data(), weights_.size());
  if (!(wsum > 0.0)) throw ConfigError("total subject weight must be positive");

  std::size_t g0 = 0;
  while (g0 < order.size()) {
    std::size_t g1 = g0;
    const double t = requests[order[g0]].t;
    while (g1 < order.size() && requests[order[g1]].t == t) ++g1;

    // Distinct screening arms in this horizon group.
    std::vector<double> arms;
    for (std::size_t g = g0; g < g1; ++g) {
      const double s = requests[order[g]].s;
      if (std::find(arms.begin(), arms.end(), s) == arms.end()) arms.push_back(s);
    }
    std::vector<ScreeningGrid> grids(arms.size());
    for (std::size_t a = 0; a < arms.size(); ++a) build_screening_grid(arms[a], grids[a]);

    std::vector<Slot> slots;
    bool has_quality = false;
    for (std::size_t g = g0; g < g1; ++g) {
      const EstimandRequest& rq = requests[order[g]];
      Slot sl;
      sl.measure = rq.measure;
      sl.s = rq.s;
      sl.t0 = rq.t0;
      sl.profile = rq.profile;
      sl.interval = rq.screening_interval;
      sl.request_index = order[g];
      sl.arm = static_cast<int>(std::find(arms.begin(), arms.end(), rq.s) - arms.begin());
      sl.comp1.assign(n_, 0.0);
      sl.comp2.assign(n_, 0.0);
      if (rq.measure == Measure::qaly || rq.measure == Measure::qaly_lost_disease) {
        has_quality = true;
      }
      slots.push_back(std::move(sl));
    }

    if (has_quality) {
      evaluate_group_scalar(t, arms, grids, slots);
    } else {
      evaluate_group_fast(t, arms, grids, slots);
    }

    // Reduce and assemble.
    for (Slot& sl : slots) {
      const double m1 = pairwise_sum(sl.comp1.data(), n_) / wsum;
      const double m2 = pairwise_sum(sl.comp2.data(), n_) / wsum;
      EstimandResult res;
      res.measure = measure_label(sl.measure);
      res.s = sl.s;
      res.t = t;
      res.t0 = sl.t0;
      switch (sl.measure) {
        case Measure::rmst:
        case Measure::qaly:
          res.components = {{"disease_free", m1}, {"disease_state", m2}};
          res.estimate = m1 + m2;
          break;
        case Measure::life_years_lost:
          res.components = {{"disease_path", m1}, {"other_causes", m2}};
          res.estimate = m1 + m2;
          break;
        case Measure::qaly_lost_disease:
          res.components = {{"disease_path", m1}};
          res.estimate = m1;
          break;
        case Measure::screenings:
          res.estimate = m1;
          break;
      }
      results[sl.request_index] = std::move(res);
    }
    g0 = g1;
  }

  return results;
}

// Pass 1 for one subject and one arm: competing-risks walk over the age grid.
// P1 is constant between jumps; segment integrals and screening epochs use
// the value carried into the segment. Returns the number of onsets seen.
std::size_t EstimandEvaluator::subject_age_pass(
    double t, double s, const ScreeningGrid& sg, std::size_t i, double w,
    std::span<Slot* const> p1_slots, std::span<Slot* const> lost_slots,
    std::span<Slot* const> screen_slots, std::span<const double> window_starts,
    std::span<double> p1_prefix, std::span<double> onset_mass,
    std::span<std::size_t> epoch_counter) const {
  const double c01 = c01_[i], c02 = c02_[i];
  const std::size_t grid_end =
      std::upper_bound(grid_.begin(), grid_.end(), t) - grid_.begin();
  const std::size_t n_windows = window_starts.size();

  double p = 1.0;
  double prev = 0.0;
  double p1_int_full = 0.0;
  std::fill(p1_prefix.begin(), p1_prefix.end(), 0.0);
  std::fill(epoch_counter.begin(), epoch_counter.end(), 0);
  std::size_t next_w = 0;
  std::size_t n_onsets = 0;

  auto integrate_p1 = [&](double seg_a, double seg_b) {
    if (seg_b <= seg_a) return;
    while (next_w < n_windows && window_starts[next_w] <= seg_b) {
      const double cut = window_starts[next_w];
      if (cut > seg_a) {
        p1_int_full += p * (cut - seg_a);
        seg_a = cut;
      }
      p1_prefix[next_w] = p1_int_full;
      ++next_w;
    }
    p1_int_full += p * (seg_b - seg_a);
  };
  while (next_w < n_windows && window_starts[next_w] <= 0.0) ++next_w;

  auto flush_epochs = [&](double up_to, bool inclusive) {
    for (std::size_t si = 0; si < screen_slots.size(); ++si) {
      Slot& sl = *screen_slots[si];
      for (;;) {
        const double epoch = s + static_cast<double>(epoch_counter[si]) * sl.interval;
        if (epoch > t) break;
        if (inclusive ? epoch > up_to : epoch >= up_to) break;
        sl.comp1[i] += w * p;
        ++epoch_counter[si];
      }
    }
  };
  const bool do_epochs = !screen_slots.empty() && !std::isinf(s);

  for (std::size_t m = 0; m < grid_end; ++m) {
    const double g = grid_[m];
    integrate_p1(prev, g);
    if (do_epochs) flush_epochs(g, false);
    double df1, df2;
    p = survival_step(p, c01 * sg.d01s[m], c02 * sg.d02s[m], df1, df2);
    if (do_epochs) flush_epochs(g, true);
    if (onset_index_[m] >= 0) {
      onset_mass[onset_index_[m]] = df1;
      n_onsets = onset_index_[m] + 1;
    }
    if (df2 > 0.0) {
      for (Slot* sl : lost_slots) sl->comp2[i] += w * df2 * (t - std::max(g, sl->t0));
    }
    prev = g;
  }
  integrate_p1(prev, t);
  if (do_epochs) flush_epochs(t, true);
  while (next_w < n_windows) p1_prefix[next_w++] = p1_int_full;

  for (Slot* sl : p1_slots) {
    const double pre =
        sl->t0 <= 0.0
            ? 0.0
            : p1_prefix[std::lower_bound(window_starts.begin(), window_starts.end(), sl->t0) -
                        window_starts.begin()];
    sl->comp1[i] += w * (p1_int_full - pre);  // int_{t0}^{t} P1 du
  }
  return n_onsets;
}

void EstimandEvaluator::evaluate_group_fast(double t, std::span<const double> arms,
                                            std::span<const ScreeningGrid> grids,
                                            std::vector<Slot>& slots) const {
  const std::size_t n_arms = arms.size();
  std::vector<std::vector<Slot*>> p1_slots(n_arms), lost_slots(n_arms), screen_slots(n_arms);
  std::vector<double> window_starts;
  bool need_disease = false;
  for (Slot& sl : slots) {
    switch (sl.measure) {
      case Measure::rmst:
        p1_slots[sl.arm].push_back(&sl);
        window_starts.push_back(sl.t0);
        need_disease = true;
        break;
      case Measure::life_years_lost:
        lost_slots[sl.arm].push_back(&sl);
        window_starts.push_back(sl.t0);
        need_disease = true;
        break;
      case Measure::screenings:
        screen_slots[sl.arm].push_back(&sl);
        break;
      default:
        throw ConfigError("internal: quality measure in the fast path");
    }
  }
  std::sort(window_starts.begin(), window_starts.end());
  window_starts.erase(std::unique(window_starts.begin(), window_starts.end()),
                      window_starts.end());
  const std::size_t n_windows = window_starts.size();

  // Lanes: one per onset jump at or before t, ascending onset age.
  const std::size_t n_lanes =
      std::upper_bound(onset_time_.begin(), onset_time_.end(), t) - onset_time_.begin();
  const std::size_t K = w13_.size();

  // Shared schedule: full-segment lane counts, window crossings, closings.
  LaneSchedule sched;
  sched.n_lanes = n_lanes;
  sched.seg.resize(K);
  sched.active_n.assign(K, 0);
  sched.events.assign(K + 1, {});
  for (std::size_t k = 0; k < K; ++k) {
    sched.seg[k] = k == 0 ? w13_[0] : w13_[k] - w13_[k - 1];
  }
  for (std::size_t j = 0; j < n_lanes; ++j) {
    const double v = onset_time_[j];
    // last iteration whose jump age stays within the horizon
    const std::size_t close_k =
        std::upper_bound(w13_.begin(), w13_.end(), t - v) - w13_.begin();
    // window crossings strictly above the onset age
    for (std::size_t wdx = 0; wdx < n_windows; ++wdx) {
      const double cut = window_starts[wdx];
      if (cut <= v || cut > t) continue;
      const std::size_t cross_k =
          std::upper_bound(w13_.begin(), w13_.end(), cut - v) - w13_.begin();
      const std::size_t at = std::min(cross_k, close_k);
      const double seg_start_age = at == 0 ? v : v + w13_[at - 1];
      sched.events[at].push_back(
          {LaneEvent::Kind::capture, static_cast<int>(j), static_cast<int>(wdx),
           cut - seg_start_age});
    }
    const double close_seg_start = close_k == 0 ? v : v + w13_[close_k - 1];
    sched.events[close_k].push_back(
        {LaneEvent::Kind::close, static_cast<int>(j), -1, t - close_seg_start});
  }
  for (std::size_t k = 0; k < K; ++k) {
    // lanes [0, active_n[k]) take the full segment + jump at k
    std::size_t an = n_lanes;
    while (an > 0 && onset_time_[an - 1] + w13_[k] > t) --an;
    sched.active_n[k] = an;
  }

  // Per-subject buffers, reused across subjects and arms.
  std::vector<double> onset_mass(onset_time_.size());
  std::vector<double> p1_prefix(n_windows);
  std::vector<std::size_t> epoch_counter(16);
  std::vector<std::vector<double>> mass_by_arm(n_arms, std::vector<double>(n_lanes));
  std::vector<double> mu(n_lanes), q(n_lanes), acc(n_lanes);
  std::vector<double> prefix(n_windows * std::max<std::size_t>(n_lanes, 1));

  for (std::size_t si = 0; si < slots.size(); ++si) {
    epoch_counter.resize(std::max(epoch_counter.size(), slots.size()));
  }

  for (std::size_t i = 0; i < n_; ++i) {
    const double w = weights_.empty() ? 1.0 : weights_[i];
    if (w == 0.0) continue;

    std::size_t max_onsets = 0;
    for (std::size_t a = 0; a < n_arms; ++a) {
      const std::size_t n_onsets = subject_age_pass(
          t, arms[a], grids[a], i, w, p1_slots[a], lost_slots[a], screen_slots[a],
          window_starts, p1_prefix, onset_mass, epoch_counter);
      auto& mass = mass_by_arm[a];
      std::fill(mass.begin() + n_onsets, mass.end(), 0.0);
      std::copy(onset_mass.begin(), onset_mass.begin() + n_onsets, mass.begin());
      max_onsets = std::max(max_onsets, n_onsets);
    }
    if (!need_disease || max_onsets == 0) continue;

    const double c13 = c13_[i];
    for (std::size_t a = 0; a < n_arms; ++a) {
      if (p1_slots[a].empty() && lost_slots[a].empty()) continue;
      const ScreeningGrid& sg = grids[a];
      for (std::size_t j = 0; j < n_lanes; ++j) {
        mu[j] = c13 * sg.onset_mult[j];
        q[j] = 1.0;
        acc[j] = 0.0;
      }

      for (std::size_t k = 0; k <= K; ++k) {
        for (const LaneEvent& ev : sched.events[k]) {
          if (ev.kind == LaneEvent::Kind::capture) {
            prefix[ev.window * n_lanes + ev.lane] = acc[ev.lane] + q[ev.lane] * ev.len;
          } else {
            acc[ev.lane] += q[ev.lane] * ev.len;
          }
        }
        if (k == K) break;
        const double seg = sched.seg[k];
        const double d = dl13_[k];
        const std::size_t an = sched.active_n[k];
        double* __restrict qq = q.data();
        double* __restrict aa = acc.data();
        const double* __restrict mm = mu.data();
        for (std::size_t j = 0; j < an; ++j) {
          aa[j] += qq[j] * seg;
          const double h = std::min(mm[j] * d, 1.0);
          qq[j] = std::max(qq[j] - qq[j] * h, 0.0);
        }
      }

      const auto& mass = mass_by_arm[a];
      for (Slot* sl : p1_slots[a]) {
        const std::size_t wdx =
            std::lower_bound(window_starts.begin(), window_starts.end(), sl->t0) -
            window_starts.begin();
        double sum = 0.0;
        for (std::size_t j = 0; j < n_lanes; ++j) {
          if (mass[j] <= 0.0) continue;
          const double pre =
              sl->t0 <= onset_time_[j] ? 0.0 : prefix[wdx * n_lanes + j];
          sum += mass[j] * (acc[j] - pre);
        }
        sl->comp2[i] += w * sum;
      }
      for (Slot* sl : lost_slots[a]) {
        const std::size_t wdx =
            std::lower_bound(window_starts.begin(), window_starts.end(), sl->t0) -
            window_starts.begin();
        double sum = 0.0;
        for (std::size_t j = 0; j < n_lanes; ++j) {
          if (mass[j] <= 0.0) continue;
          const double v = onset_time_[j];
          const double aw = std::max(v, sl->t0);
          if (!(t > aw)) continue;
          const double pre = sl->t0 <= v ? 0.0 : prefix[wdx * n_lanes + j];
          sum += mass[j] * ((t - aw) - (acc[j] - pre));
        }
        sl->comp1[i] += w * sum;
      }
    }
  }
}

void EstimandEvaluator::evaluate_group_scalar(double t, std::span<const double> arms,
                                              std::span<const ScreeningGrid> grids,
                                              std::vector<Slot>& slots) const {
  const std::size_t n_arms = arms.size();
  std::vector<std::vector<Slot*>> p1_slots(n_arms), lost_slots(n_arms), screen_slots(n_arms),
      qaly_slots(n_arms), qlost_slots(n_arms);
  std::vector<double> window_starts;
  for (Slot& sl : slots) {
    switch (sl.measure) {
      case Measure::rmst:
      case Measure::qaly:
        if (sl.measure == Measure::qaly) {
          qaly_slots[sl.arm].push_back(&sl);
        }
        p1_slots[sl.arm].push_back(&sl);
        window_starts.push_back(sl.t0);
        break;
      case Measure::life_years_lost:
        lost_slots[sl.arm].push_back(&sl);
        window_starts.push_back(sl.t0);
        break;
      case Measure::qaly_lost_disease:
        qlost_slots[sl.arm].push_back(&sl);
        window_starts.push_back(sl.t0);
        break;
      case Measure::screenings:
        screen_slots[sl.arm].push_back(&sl);
        break;
    }
  }
  std::sort(window_starts.begin(), window_starts.end());
  window_starts.erase(std::unique(window_starts.begin(), window_starts.end()),
                      window_starts.end());
  const std::size_t n_windows = window_starts.size();
  const std::size_t K = w13_.size();

  std::vector<double> onset_mass(onset_time_.size());
  std::vector<double> p1_prefix(n_windows);
  std::vector<std::size_t> epoch_counter(slots.size());
  std::vector<double> prefix(n_windows);
  std::vector<double> qaly_sum, qlost_p13, ql_t0, ql_split;

  for (std::size_t i = 0; i < n_; ++i) {
    const double w = weights_.empty() ? 1.0 : weights_[i];
    if (w == 0.0) continue;
    const double c13 = c13_[i];

    for (std::size_t a = 0; a < n_arms; ++a) {
      // rmst-like slots collect int P1 via comp1; qaly slots keep their
      // disease-free term there too (score 1 while healthy)
      const std::size_t n_onsets = subject_age_pass(
          t, arms[a], grids[a], i, w, p1_slots[a], lost_slots[a], screen_slots[a],
          window_starts, p1_prefix, onset_mass, epoch_counter);
      const bool need_disease =
          !p1_slots[a].empty() || !lost_slots[a].empty() || !qlost_slots[a].empty();
      if (!need_disease || n_onsets == 0) continue;
      const ScreeningGrid& sg = grids[a];
      const bool need_qaly_atoms = !qaly_slots[a].empty();
      const double qaly_age_cap = t + 1.0;  // a death after t+1 weighs like D = inf

      qaly_sum.assign(qaly_slots[a].size(), 0.0);
      qlost_p13.assign(qlost_slots[a].size(), 0.0);
      ql_t0.assign(qlost_slots[a].size(), 0.0);
      ql_split.assign(qlost_slots[a].size(), 0.0);

      for (std::size_t j = 0; j < n_onsets; ++j) {
        const double mass = onset_mass[j];
        if (mass <= 0.0) continue;
        const double v = onset_time_[j];
        const double mu = c13 * sg.onset_mult[j];

        double q = 1.0;
        double seg_a = v;
        double int_full = 0.0;
        std::size_t cap_i = 0;
        while (cap_i < n_windows && window_starts[cap_i] <= v) ++cap_i;
        const std::size_t cap_base = cap_i;
        std::fill(prefix.begin(), prefix.end(), 0.0);
        std::fill(qaly_sum.begin(), qaly_sum.end(), 0.0);
        std::fill(qlost_p13.begin(), qlost_p13.end(), 0.0);
        for (std::size_t c = 0; c < qlost_slots[a].size(); ++c) {
          ql_t0[c] = std::max(v, qlost_slots[a][c]->t0);
          ql_split[c] = std::max(v + 1.0, ql_t0[c]);
        }

        std::size_t k = 0;
        for (;;) {
          const double age_next =
              k < K ? v + w13_[k] : std::numeric_limits<double>::infinity();
          const double seg_b = std::min(age_next, t);
          if (seg_b > seg_a) {
            double a0 = seg_a;
            while (cap_i < n_windows && window_starts[cap_i] <= seg_b) {
              const double cut = window_starts[cap_i];
              if (cut > a0) {
                int_full += q * (cut - a0);
                a0 = cut;
              }
              prefix[cap_i] = int_full;
              ++cap_i;
            }
            int_full += q * (seg_b - a0);
            for (std::size_t c = 0; c < qlost_slots[a].size(); ++c) {
              const QualityProfile& pr = qlost_slots[a][c]->profile;
              qlost_p13[c] +=
                  q * (pr.initial_care * overlap(seg_a, seg_b, ql_t0[c], v + 1.0) +
                       pr.continuing_care * overlap(seg_a, seg_b, ql_split[c], t));
            }
          }
          if (k >= K) break;
          if (q == 0.0) break;
          if (age_next > t && (!need_qaly_atoms || age_next > qaly_age_cap)) break;
          double dm;
          q = survival_step1(q, mu * dl13_[k], dm);
          if (dm > 0.0) {
            for (std::size_t c = 0; c < qaly_slots[a].size(); ++c) {
              const Slot& sl = *qaly_slots[a][c];
              qaly_sum[c] += dm * quality_integral(sl.profile, v, age_next,
                                                   std::max(v, sl.t0),
                                                   std::min(age_next, t));
            }
          }
          seg_a = age_next;
          ++k;
        }
        while (cap_i < n_windows) prefix[cap_i++] = int_full;
        if (q > 0.0) {
          for (std::size_t c = 0; c < qaly_slots[a].size(); ++c) {
            const Slot& sl = *qaly_slots[a][c];
            qaly_sum[c] += q * quality_integral(sl.profile, v,
                                                std::numeric_limits<double>::infinity(),
                                                std::max(v, sl.t0), t);
          }
        }

        auto window_prefix = [&](double t0) {
          if (t0 <= v) return 0.0;
          const std::size_t wdx =
              std::lower_bound(window_starts.begin(), window_starts.end(), t0) -
              window_starts.begin();
          return wdx < cap_base ? 0.0 : prefix[wdx];
        };
        for (Slot* sl : p1_slots[a]) {
          if (sl->measure == Measure::rmst) {
            sl->comp2[i] += w * mass * (int_full - window_prefix(sl->t0));
          }
        }
        for (std::size_t c = 0; c < qaly_slots[a].size(); ++c) {
          qaly_slots[a][c]->comp2[i] += w * mass * qaly_sum[c];
        }
        for (Slot* sl : lost_slots[a]) {
          const double aw = std::max(v, sl->t0);
          if (t > aw) {
            sl->comp1[i] += w * mass * ((t - aw) - (int_full - window_prefix(sl->t0)));
          }
        }
        for (std::size_t c = 0; c < qlost_slots[a].size(); ++c) {
          Slot* sl = qlost_slots[a][c];
          if (t > ql_t0[c]) {
            const double lost_weight =
                quality_lost_integral(sl->profile, v, ql_t0[c], t) - qlost_p13[c];
            sl->comp1[i] += w * mass * lost_weight;
          }
        }
      }
    }
  }
}

EstimandResult EstimandEvaluator::evaluate(const EstimandRequest& request) const {
  return evaluate(std::span<const EstimandRequest>(&request, 1))[0];
}

// ---------------------------------------------------------------------------
// Convenience wrappers.
// ---------------------------------------------------------------------------

namespace {
EstimandResult eval_one(const MultiStateFit& fit, const Cohort& cohort,
                        const EstimandRequest& rq) {
  EstimandEvaluator ev(fit, cohort);
  return ev.evaluate(rq);
}
}  // namespace

EstimandResult estimate_M(const MultiStateFit& fit, const Cohort& cohort,
                          const WeightSpec& w1, const WeightSpec& w2, double s, double t,
                          double t0) {
  using K = WeightSpec::Kind;
  EstimandRequest rq;
  rq.s = s;
  rq.t = t;
  rq.t0 = t0;
  if (w1.kind == K::identity && w2.kind == K::identity) {
    rq.measure = Measure::rmst;
  } else if (w1.kind == K::identity && w2.kind == K::quality) {
    rq.measure = Measure::qaly;
    rq.profile = w2.profile;
  } else if (w1.kind == K::screening_count && w2.kind == K::zero) {
    rq.measure = Measure::screenings;
    rq.screening_interval = w1.interval;
  } else if (w1.kind == K::identity && w2.kind == K::zero) {
    // single-state restricted mean: report only the disease-free term
    rq.measure = Measure::rmst;
    EstimandResult r = eval_one(fit, cohort, rq);
    r.measure = "rmst_disease_free";
    r.estimate = r.component("disease_free");
    r.components = {{"disease_free", r.estimate}};
    return r;
  } else {
    throw ConfigError("unsupported weight combination for estimate_M");
  }
  return eval_one(fit, cohort, rq);
}

EstimandResult rmst(const MultiStateFit& fit, const Cohort& cohort, double s, double t,
                    double t0) {
  EstimandRequest rq;
  rq.measure = Measure::rmst;
  rq.s = s;
  rq.t = t;
  rq.t0 = t0;
  return eval_one(fit, cohort, rq);
}

EstimandResult life_years_lost(const MultiStateFit& fit, const Cohort& cohort, double s,
                               double t, double t0) {
  EstimandRequest rq;
  rq.measure = Measure::life_years_lost;
  rq.s = s;
  rq.t = t;
  rq.t0 = t0;
  return eval_one(fit, cohort, rq);
}

EstimandResult qaly(const MultiStateFit& fit, const Cohort& cohort, double s, double t,
                    const QualityProfile& profile, double t0) {
  EstimandRequest rq;
  rq.measure = Measure::qaly;
  rq.s = s;
  rq.t = t;
  rq.t0 = t0;
  rq.profile = profile;
  return eval_one(fit, cohort, rq);
}

EstimandResult qaly_lost_disease(const MultiStateFit& fit, const Cohort& cohort, double s,
                                 double t, const QualityProfile& profile, double t0) {
  EstimandRequest rq;
  rq.measure = Measure::qaly_lost_disease;
  rq.s = s;
  rq.t = t;
  rq.t0 = t0;
  rq.profile = profile;
  return eval_one(fit, cohort, rq);
}

EstimandResult n_screenings(const MultiStateFit& fit, const Cohort& cohort, double s,
                            double t, double interval_years, double t0) {
  EstimandRequest rq;
  rq.measure = Measure::screenings;
  rq.s = s;
  rq.t = t;
  rq.t0 = t0;
  rq.screening_interval = interval_years;
  return eval_one(fit, cohort, rq);
}

std::vector<IcerRow> icer(std::span<const std::pair<EstimandResult, EstimandResult>> results,
                          const std::pair<EstimandResult, EstimandResult>& baseline) {
  if (baseline.first.t != baseline.second.t) {
    throw ConfigError("icer: baseline cost and effect horizons differ");
  }
  std::vector<IcerRow> rows;
  for (const auto& [cost, effect] : results) {
    if (cost.t != baseline.first.t || effect.t != baseline.first.t) {
      throw ConfigError("icer: mismatched horizons across strategies");
    }
    IcerRow row;
    row.s = cost.s;
    row.cost = cost.estimate;
    row.effect = effect.estimate;
    row.delta_cost = cost.estimate - baseline.first.estimate;
    row.delta_effect = effect.estimate - baseline.second.estimate;
    if (row.delta_effect > 0.0) {
      row.icer = row.delta_cost / row.delta_effect;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace mscea

#include "mscea/cox.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "mscea/errors.hpp"

namespace mscea {

std::string transition_label(Transition t) {
  switch (t) {
    case Transition::healthy_to_disease: return "0->1";
    case Transition::healthy_to_death: return "0->2";
    case Transition::disease_to_death: return "1->3";
  }
  return "?";
}

double CoxFit::coefficient(const std::string& name) const {
  for (std::size_t k = 0; k < coefficient_names.size(); ++k) {
    if (coefficient_names[k] == name) return coefficients[k];
  }
  throw ConfigError("no coefficient named '" + name + "'");
}

int CoxFit::screening_index() const {
  for (std::size_t k = 0; k < coefficient_names.size(); ++k) {
    if (coefficient_names[k] == "screening") return static_cast<int>(k);
  }
  return -1;
}

int CoxFit::onset_age_index() const {
  for (std::size_t k = 0; k < coefficient_names.size(); ++k) {
    if (coefficient_names[k] == "onset_age") return static_cast<int>(k);
  }
  return -1;
}

// Z(t; S) = I(S < t), evaluated with strict inequality everywhere. Episodes
// carry static covariates, so the indicator is folded in by splitting the
// at-risk interval at S.
CoxProblem CoxProblem::build(const Cohort& cohort, const TransitionSpec& spec) {
  CoxProblem prob;
  const std::size_t px = cohort.covariate_names.size();

  if (spec.transition == Transition::disease_to_death) {
    if (spec.timescale != Timescale::sojourn || !spec.include_onset_age) {
      throw ConfigError("transition 1->3 uses the sojourn timescale with onset age");
    }
    prob.label_ = transition_label(spec.transition);
    prob.p_ = static_cast<int>(px) + 2;
    prob.names_.push_back("onset_age");
    prob.names_.push_back("screening");
    for (const auto& nm : cohort.covariate_names) prob.names_.push_back(nm);
    for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
      const Subject& s = cohort.subjects[i];
      if (!s.delta1) continue;
      Episode e;
      // Entry to the disease state is at sojourn time 0; a negative start
      // keeps events at sojourn 0 (disease diagnosed at death) in the risk set.
      e.start = -1.0;
      e.stop = s.v_time;
      e.event = s.delta3;
      e.subject = static_cast<int>(i);
      e.z.reserve(prob.p_);
      e.z.push_back(s.onset_age());
      const bool screened_before_onset =
          s.screen_age.has_value() && *s.screen_age < s.u_time;
      e.z.push_back(screened_before_onset ? 1.0 : 0.0);
      e.z.insert(e.z.end(), s.covariates.begin(), s.covariates.end());
      prob.episodes_.push_back(std::move(e));
    }
  } else {
    if (spec.timescale != Timescale::age || spec.include_onset_age) {
      throw ConfigError("transitions 0->1 and 0->2 use the age timescale");
    }
    prob.label_ = transition_label(spec.transition);
    prob.p_ = static_cast<int>(px) + 1;
    prob.names_.push_back("screening");
    for (const auto& nm : cohort.covariate_names) prob.names_.push_back(nm);
    for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
      const Subject& s = cohort.subjects[i];
      const bool event_flag =
          spec.transition == Transition::healthy_to_disease ? s.delta1 : s.delta2;
      const double L = s.entry_age;
      const double U = s.u_time;
      if (!(U > L)) continue;  // empty risk interval (censored at entry)
      const bool has_s = s.screen_age.has_value() && *s.screen_age < U;
      auto push = [&](double a, double b, double zscr, bool ev) {
        Episode e;
        e.start = a;
        e.stop = b;
        e.event = ev;
        e.subject = static_cast<int>(i);
        e.z.reserve(prob.p_);
        e.z.push_back(zscr);
        e.z.insert(e.z.end(), s.covariates.begin(), s.covariates.end());
        prob.episodes_.push_back(std::move(e));
      };
      if (!has_s) {
        push(L, U, 0.0, event_flag);
      } else if (*s.screen_age <= L) {
        push(L, U, 1.0, event_flag);
      } else {
        push(L, *s.screen_age, 0.0, false);
        push(*s.screen_age, U, 1.0, event_flag);
      }
    }
  }

  prob.finalize(cohort);
  return prob;
}

CoxProblem CoxProblem::build_overall_mortality(const Cohort& cohort) {
  CoxProblem prob;
  prob.label_ = "overall-mortality";
  prob.p_ = static_cast<int>(cohort.covariate_names.size()) + 1;
  prob.names_.push_back("screening");
  for (const auto& nm : cohort.covariate_names) prob.names_.push_back(nm);
  for (std::size_t i = 0; i < cohort.subjects.size(); ++i) {
    const Subject& s = cohort.subjects[i];
    const double L = s.entry_age;
    const double stop = s.delta1 ? s.u_time + s.v_time : s.u_time;
    const bool event_flag = s.delta2 || s.delta3;
    if (!(stop > L)) continue;
    const bool has_s = s.screen_age.has_value() && *s.screen_age < stop;
    auto push = [&](double a, double b, double zscr, bool ev) {
      Episode e;
      e.start = a;
      e.stop = b;
      e.event = ev;
      e.subject = static_cast<int>(i);
      e.z.reserve(prob.p_);
      e.z.push_back(zscr);
      e.z.insert(e.z.end(), s.covariates.begin(), s.covariates.end());
      prob.episodes_.push_back(std::move(e));
    };
    if (!has_s) {
      push(L, stop, 0.0, event_flag);
    } else if (*s.screen_age <= L) {
      push(L, stop, 1.0, event_flag);
    } else {
      push(L, *s.screen_age, 0.0, false);
      push(*s.screen_age, stop, 1.0, event_flag);
    }
  }
  prob.finalize(cohort);
  return prob;
}

void CoxProblem::finalize(const Cohort& cohort) {
  n_subjects_ = static_cast<int>(cohort.subjects.size());

  // Episodes whose (start, stop] interval contains no event time never enter
  // a risk set; dropping them keeps fits bit-identical under left truncation
  // and under adding subjects observed only between or after event times.
  {
    std::vector<double> ev_times;
    for (const Episode& e : episodes_) {
      if (e.event) ev_times.push_back(e.stop);
    }
    std::sort(ev_times.begin(), ev_times.end());
    ev_times.erase(std::unique(ev_times.begin(), ev_times.end()), ev_times.end());
    std::vector<Episode> kept;
    kept.reserve(episodes_.size());
    for (Episode& e : episodes_) {
      auto it = std::upper_bound(ev_times.begin(), ev_times.end(), e.start);
      if (it != ev_times.end() && *it <= e.stop) kept.push_back(std::move(e));
    }
    episodes_ = std::move(kept);
  }

  // Order episodes by (time, subject id, interval) so that every risk-set sum
  // is accumulated in an order independent of the input row order; this makes
  // fits bit-identical under subject permutation.
  auto id_of = [&](int e) -> const std::string& {
    return cohort.subjects[episodes_[e].subject].id;
  };
  by_stop_desc_.resize(episodes_.size());
  by_start_desc_.resize(episodes_.size());
  for (std::size_t k = 0; k < episodes_.size(); ++k) {
    by_stop_desc_[k] = static_cast<int>(k);
    by_start_desc_[k] = static_cast<int>(k);
  }
  std::sort(by_stop_desc_.begin(), by_stop_desc_.end(), [&](int a, int b) {
    if (episodes_[a].stop != episodes_[b].stop) return episodes_[a].stop > episodes_[b].stop;
    if (id_of(a) != id_of(b)) return id_of(a) < id_of(b);
    return episodes_[a].start > episodes_[b].start;
  });
  std::sort(by_start_desc_.begin(), by_start_desc_.end(), [&](int a, int b) {
    if (episodes_[a].start != episodes_[b].start)
      return episodes_[a].start > episodes_[b].start;
    if (id_of(a) != id_of(b)) return id_of(a) < id_of(b);
    return episodes_[a].stop > episodes_[b].stop;
  });

  std::vector<int> event_eps;
  for (std::size_t k = 0; k < episodes_.size(); ++k) {
    if (episodes_[k].event) event_eps.push_back(static_cast<int>(k));
  }
  n_events_ = static_cast<int>(event_eps.size());
  std::sort(event_eps.begin(), event_eps.end(), [&](int a, int b) {
    if (episodes_[a].stop != episodes_[b].stop) return episodes_[a].stop < episodes_[b].stop;
    return id_of(a) < id_of(b);
  });
  for (int e : event_eps) {
    if (event_times_.empty() || event_times_.back() != episodes_[e].stop) {
      event_times_.push_back(episodes_[e].stop);
      event_episodes_.emplace_back();
    }
    event_episodes_.back().push_back(e);
  }
}

namespace {

struct RiskAccumulator {
  int p;
  double a0 = 0.0;
  std::vector<double> a1;
  std::vector<double> a2;  // packed p*p

  explicit RiskAccumulator(int p_) : p(p_), a1(p_, 0.0), a2(p_ * p_, 0.0) {}

  void add(double w, const std::vector<double>& z) {
    a0 += w;
    for (int r = 0; r < p; ++r) {
      const double wz = w * z[r];
      a1[r] += wz;
      double* row = a2.data() + r * p;
      for (int c = 0; c < p; ++c) row[c] += wz * z[c];
    }
  }
};

}  // namespace

template <typename Body>
void CoxProblem::sweep(std::span<const double> beta, std::span<const double> weights,
                       Body&& body) const {
  const int p = p_;
  const bool unit_w = weights.empty();

  std::vector<double> wexp(episodes_.size());
  for (std::size_t k = 0; k < episodes_.size(); ++k) {
    const Episode& e = episodes_[k];
    double lp = 0.0;
    for (int r = 0; r < p; ++r) lp += beta[r] * e.z[r];
    const double w = unit_w ? 1.0 : weights[e.subject];
    wexp[k] = w * std::exp(lp);
  }

  RiskAccumulator in(p), out(p);
  std::size_t next_stop = 0, next_start = 0;
  std::vector<double> s1(p), ztmp(p);

  // Event times descending; episodes join the "in" set once their stop time is
  // reached and the "out" set once their start time is reached, so the risk
  // sum at t is in - out over {start < t <= stop}.
  for (std::size_t j = event_times_.size(); j-- > 0;) {
    const double t = event_times_[j];
    while (next_stop < by_stop_desc_.size() &&
           episodes_[by_stop_desc_[next_stop]].stop >= t) {
      const int k = by_stop_desc_[next_stop];
      if (wexp[k] != 0.0) in.add(wexp[k], episodes_[k].z);
      ++next_stop;
    }
    while (next_start < by_start_desc_.size() &&
           episodes_[by_start_desc_[next_start]].start >= t) {
      const int k = by_start_desc_[next_start];
      if (wexp[k] != 0.0) out.add(wexp[k], episodes_[k].z);
      ++next_start;
    }

    double d = 0.0;       // weighted number of events at t
    double lp_sum = 0.0;  // weighted sum of event linear predictors
    std::fill(ztmp.begin(), ztmp.end(), 0.0);
    for (int k : event_episodes_[j]) {
      const Episode& e = episodes_[k];
      const double w = unit_w ? 1.0 : weights[e.subject];
      if (w == 0.0) continue;
      d += w;
      double lp = 0.0;
      for (int r = 0; r < p; ++r) lp += beta[r] * e.z[r];
      lp_sum += w * lp;
      for (int r = 0; r < p; ++r) ztmp[r] += w * e.z[r];
    }
    if (d == 0.0) continue;

    const double s0 = in.a0 - out.a0;
    for (int r = 0; r < p; ++r) s1[r] = in.a1[r] - out.a1[r];

    body(t, d, lp_sum, ztmp, s0, s1, in.a2, out.a2);
  }
}

CoxProblem::Evaluation CoxProblem::evaluate(std::span<const double> beta,
                                            std::span<const double> weights) const {
  Evaluation ev;
  ev.score.assign(p_, 0.0);
  ev.info = Matrix(p_, p_);
  const int p = p_;

  sweep(beta, weights,
        [&](double /*t*/, double d, double lp_sum, const std::vector<double>& zev,
            double s0, const std::vector<double>& s1, const std::vector<double>& a2,
            const std::vector<double>& b2) {
          ev.weighted_events += d;
          ev.loglik += lp_sum - d * std::log(s0);
          for (int r = 0; r < p; ++r) {
            const double m = s1[r] / s0;
            ev.score[r] += zev[r] - d * m;
            for (int c = 0; c < p; ++c) {
              const double s2rc = a2[r * p + c] - b2[r * p + c];
              ev.info(r, c) += d * (s2rc / s0 - m * (s1[c] / s0));
            }
          }
        });
  return ev;
}

StepFunction CoxProblem::breslow(std::span<const double> beta,
                                 std::span<const double> weights) const {
  std::vector<double> times, jumps;
  times.reserve(event_times_.size());
  jumps.reserve(event_times_.size());
  sweep(beta, weights,
        [&](double t, double d, double, const std::vector<double>&, double s0,
            const std::vector<double>&, const std::vector<double>&,
            const std::vector<double>&) {
          times.push_back(t);
          jumps.push_back(d / s0);
        });
  // The sweep runs through event times in descending order.
  std::reverse(times.begin(), times.end());
  std::reverse(jumps.begin(), jumps.end());
  return StepFunction(std::move(times), std::move(jumps));
}

void CoxProblem::check_identifiable(std::span<const double> weights) const {
  std::vector<double> zero(p_, 0.0);
  Evaluation ev = evaluate(zero, weights);
  if (ev.weighted_events <= 0.0) {
    throw FitError("transition " + label_ + ": no events");
  }
  for (int r = 0; r < p_; ++r) {
    if (ev.info(r, r) == 0.0) {
      throw FitError("transition " + label_ + ": covariate '" + names_[r] +
                     "' has zero variance within every event risk set (not identifiable)");
    }
  }
}

CoxFit CoxProblem::fit(const SolverOptions& options, std::span<const double> weights) const {
  check_identifiable(weights);

  const int p = p_;
  std::vector<double> beta(p, 0.0);
  Evaluation ev = evaluate(beta, weights);

  auto sup_norm = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
  };

  int iter = 0;
  double grad_norm = sup_norm(ev.score);
  while (grad_norm > options.tol && iter < options.max_iter) {
    ++iter;
    std::vector<double> step;
    try {
      step = solve_spd(ev.info, ev.score, "observed information");
    } catch (const FitError&) {
      throw FitError("transition " + label_ +
                     ": observed information is singular (collinear design)");
    }

    // Monotone ascent up to floating-point resolution of the loglik: near the
    // optimum the Newton improvement drops below what the loglik can resolve,
    // so ties within the plateau slack still accept the full step.
    const double plateau = 1e-10 * (std::abs(ev.loglik) + 1.0);
    double scale = 1.0;
    bool improved = false;
    std::vector<double> cand(p);
    Evaluation cand_ev;
    for (int halving = 0; halving < 40; ++halving) {
      for (int r = 0; r < p; ++r) cand[r] = beta[r] + scale * step[r];
      cand_ev = evaluate(cand, weights);
      if (std::isfinite(cand_ev.loglik) && cand_ev.loglik >= ev.loglik - plateau) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      throw FitError("transition " + label_ + ": divergence after " +
                     std::to_string(iter) + " iterations (step-halving exhausted)");
    }
    beta = cand;
    ev = std::move(cand_ev);
    grad_norm = sup_norm(ev.score);
    if (options.verbosity > 0) {
      std::fprintf(stderr, "[cox %s] iter %d loglik %.10g |score| %.3e\n", label_.c_str(),
                   iter, ev.loglik, grad_norm);
    }
  }
  if (grad_norm > options.tol) {
    throw FitError("transition " + label_ + ": no convergence in " +
                   std::to_string(options.max_iter) + " iterations (|score| = " +
                   std::to_string(grad_norm) + ")");
  }

  CoxFit out;
  out.coefficient_names = names_;
  out.coefficients = beta;
  out.covariance = invert_spd(ev.info, "observed information");
  out.baseline = breslow(beta, weights);
  out.loglik = ev.loglik;
  out.n_events = static_cast<int>(std::llround(ev.weighted_events));
  out.iterations = iter;
  out.final_gradient_norm = grad_norm;
  return out;
}

CoxFit fit_transition(const Cohort& cohort, const TransitionSpec& spec,
                      const SolverOptions& options, std::span<const double> weights) {
  return CoxProblem::build(cohort, spec).fit(options, weights);
}

StepFunction breslow(const Cohort& cohort, const TransitionSpec& spec,
                     std::span<const double> coefficients, std::span<const double> weights) {
  return CoxProblem::build(cohort, spec).breslow(coefficients, weights);
}

LoglikScoreInfo loglik_score_info(const Cohort& cohort, const TransitionSpec& spec,
                                  std::span<const double> coefficients,
                                  std::span<const double> weights) {
  CoxProblem prob = CoxProblem::build(cohort, spec);
  CoxProblem::Evaluation ev = prob.evaluate(coefficients, weights);
  return LoglikScoreInfo{ev.loglik, std::move(ev.score), std::move(ev.info)};
}

}  // namespace mscea

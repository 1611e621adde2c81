#include "mscea/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "mscea/bootstrap.hpp"
#include "mscea/errors.hpp"
#include "mscea/rng.hpp"
#include "mscea/threads.hpp"

namespace mscea {

CoxFit fit_overall_mortality(const Cohort& cohort, const SolverOptions& options,
                             std::span<const double> weights) {
  return CoxProblem::build_overall_mortality(cohort).fit(options, weights);
}

double overall_mortality_rmst(const CoxFit& fit, const Cohort& cohort, double s, double t,
                              double t0, std::span<const double> weights) {
  const int scr = fit.screening_index();
  const double beta_s = fit.coefficients[scr];
  const auto& times = fit.baseline.times();
  const auto& jumps = fit.baseline.increments();

  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (w == 0.0) continue;
    double lp = 0.0;
    std::size_t ix = 0;
    for (std::size_t k = 0; k < fit.coefficients.size(); ++k) {
      if (static_cast<int>(k) == scr) continue;
      lp += fit.coefficients[k] * cohort.subjects[i].covariates[ix++];
    }
    const double pre = std::exp(lp);
    const double post = std::exp(lp + beta_s);

    double surv = 1.0;
    double prev = 0.0;
    double integral = 0.0;
    for (std::size_t m = 0; m < times.size() && times[m] <= t; ++m) {
      const double g = times[m];
      if (g > t0) integral += surv * (g - std::max(prev, t0));
      const double h = (s < g ? post : pre) * jumps[m];
      surv = h >= 1.0 ? 0.0 : surv * (1.0 - h);
      prev = g;
    }
    if (t > std::max(prev, t0)) integral += surv * (t - std::max(prev, t0));
    num += w * integral;
    den += w;
  }
  return num / den;
}

const HarnessCell& HarnessReport::cell(const std::string& measure,
                                       const std::string& approach, double s) const {
  for (const HarnessCell& c : cells) {
    if (c.measure == measure && c.approach == approach && c.s == s) return c;
  }
  throw ConfigError("harness report has no cell (" + measure + ", " + approach + ")");
}

namespace {

struct TrackedValue {
  std::string measure;
  std::string approach;
  double s;
  TruthKind truth_kind;
  double t0;
};

}  // namespace

HarnessReport run_harness(const GeneratorSpec& spec, int R, int n, int B,
                          std::uint64_t seed, const HarnessConfig& config) {
  if (R < 2) throw ConfigError("harness requires R >= 2");
  GeneratorSpec gspec = spec;
  gspec.n = n;

  // The tracked cells: RMST components and, optionally, the path-specific
  // lost years and the overall-mortality comparator.
  std::vector<TrackedValue> tracked;
  for (double s : config.s_list) {
    tracked.push_back({"rmst_disease_free", "multistate", s, TruthKind::rmst_disease_free,
                       config.t0_rmst});
    tracked.push_back({"rmst_disease_state", "multistate", s,
                       TruthKind::rmst_disease_state, config.t0_rmst});
    tracked.push_back({"rmst_total", "multistate", s, TruthKind::rmst_total, config.t0_rmst});
    if (config.include_lost) {
      tracked.push_back({"lost_disease_path", "multistate", s, TruthKind::lost_disease_path,
                         config.t0_lost});
      tracked.push_back({"lost_other_causes", "multistate", s,
                         TruthKind::lost_other_causes, config.t0_lost});
    }
    if (config.include_comparator) {
      tracked.push_back({"rmst_total", "overall_mortality", s, TruthKind::rmst_total,
                         config.t0_rmst});
    }
  }

  const std::size_t n_vals = tracked.size();
  std::vector<double> truths(n_vals);
  for (std::size_t v = 0; v < n_vals; ++v) {
    TruthRequest tr;
    tr.kind = tracked[v].truth_kind;
    tr.s = tracked[v].s;
    tr.t = config.t;
    tr.t0 = tracked[v].t0;
    tr.gh_nodes = config.truth_gh_nodes;
    tr.tol = config.truth_tol;
    truths[v] = truth(tr, gspec);
  }

  // Multistate estimand requests, one per (s, window) pair; comparator cells
  // are evaluated separately from the single-transition fit.
  std::vector<EstimandRequest> requests;
  auto request_index = [&](double s, bool lost) {
    for (std::size_t r = 0; r < requests.size(); ++r) {
      const bool is_lost = requests[r].measure == Measure::life_years_lost;
      if (requests[r].s == s && is_lost == lost) return r;
    }
    EstimandRequest rq;
    rq.measure = lost ? Measure::life_years_lost : Measure::rmst;
    rq.s = s;
    rq.t = config.t;
    rq.t0 = lost ? config.t0_lost : config.t0_rmst;
    requests.push_back(rq);
    return requests.size() - 1;
  };
  struct Extract {
    std::size_t request;  // index into requests, or npos for comparator
    int component;        // -1 = estimate, else component index
  };
  constexpr std::size_t kComparator = static_cast<std::size_t>(-1);
  std::vector<Extract> extract(n_vals);
  for (std::size_t v = 0; v < n_vals; ++v) {
    const TrackedValue& tv = tracked[v];
    if (tv.approach == "overall_mortality") {
      extract[v] = {kComparator, -1};
    } else if (tv.measure == "rmst_total") {
      extract[v] = {request_index(tv.s, false), -1};
    } else if (tv.measure == "rmst_disease_free") {
      extract[v] = {request_index(tv.s, false), 0};
    } else if (tv.measure == "rmst_disease_state") {
      extract[v] = {request_index(tv.s, false), 1};
    } else if (tv.measure == "lost_disease_path") {
      extract[v] = {request_index(tv.s, true), 0};
    } else {
      extract[v] = {request_index(tv.s, true), 1};
    }
  }
  std::vector<double> comparator_s;
  for (double s : config.s_list) comparator_s.push_back(s);

  std::vector<double> est(static_cast<std::size_t>(R) * n_vals, 0.0);
  std::vector<double> ses(static_cast<std::size_t>(R) * n_vals, 0.0);
  std::vector<char> rep_ok(R, 0);

  run_indexed(R, config.workers, [&](std::size_t rep) {
    const std::uint64_t rep_seed = derive_stream_seed(seed, rep);
    const Cohort cohort = generate(gspec, rep_seed);
    const std::size_t nn = cohort.size();
    try {
      const MultiStateProblem problem = MultiStateProblem::build(cohort);
      const CoxProblem comparator = CoxProblem::build_overall_mortality(cohort);

      auto eval_all = [&](std::span<const double> w, std::vector<double>& out) {
        const MultiStateFit fit = problem.fit(config.solver, w);
        EstimandEvaluator eval(fit, cohort, w);
        const std::vector<EstimandResult> res = eval.evaluate(requests);
        CoxFit cmp_fit;
        if (config.include_comparator) cmp_fit = comparator.fit(config.solver, w);
        out.resize(n_vals);
        for (std::size_t v = 0; v < n_vals; ++v) {
          if (extract[v].request == kComparator) {
            out[v] = overall_mortality_rmst(cmp_fit, cohort, tracked[v].s, config.t,
                                            tracked[v].t0, w);
          } else {
            const EstimandResult& r = res[extract[v].request];
            out[v] = extract[v].component < 0
                         ? r.estimate
                         : r.components[extract[v].component].second;
          }
        }
      };

      std::vector<double> point;
      eval_all({}, point);

      // Bootstrap: same resamples feed the multistate fits and the
      // comparator so their CIs are computed from matched replicates.
      const std::uint64_t boot_seed = derive_stream_seed(rep_seed, 0x626f6f74ULL);
      std::vector<double> bsum(n_vals, 0.0), bsumsq(n_vals, 0.0), bvals;
      int b_ok = 0;
      for (int b = 0; b < B; ++b) {
        const std::vector<double> w =
            resample_weights(nn, derive_stream_seed(boot_seed, b));
        try {
          eval_all(w, bvals);
          ++b_ok;
          for (std::size_t v = 0; v < n_vals; ++v) {
            bsum[v] += bvals[v];
            bsumsq[v] += bvals[v] * bvals[v];
          }
        } catch (const FitError&) {
          // dropped and counted through b_ok
        }
      }
      if (b_ok < std::max(2, (4 * B) / 5)) {
        throw FitError("too many failed bootstrap replicates");
      }
      for (std::size_t v = 0; v < n_vals; ++v) {
        const double mean = bsum[v] / b_ok;
        const double var =
            std::max(0.0, (bsumsq[v] - b_ok * mean * mean) / (b_ok - 1.0));
        est[rep * n_vals + v] = point[v];
        ses[rep * n_vals + v] = std::sqrt(var);
      }
      rep_ok[rep] = 1;
    } catch (const FitError&) {
      // replicate dropped and counted
    }
  });

  HarnessReport report;
  report.replicates = R;
  report.n = n;
  report.bootstrap_B = B;
  int ok_count = 0;
  for (int r = 0; r < R; ++r) ok_count += rep_ok[r];
  report.failed_replicates = R - ok_count;
  if (ok_count < 2) throw InferenceError("harness: fewer than 2 successful replicates");

  for (std::size_t v = 0; v < n_vals; ++v) {
    HarnessCell cell;
    cell.measure = tracked[v].measure;
    cell.approach = tracked[v].approach;
    cell.s = tracked[v].s;
    cell.truth = truths[v];
    double sum = 0.0;
    for (int r = 0; r < R; ++r) {
      if (rep_ok[r]) sum += est[r * n_vals + v];
    }
    cell.mean = sum / ok_count;
    double ss = 0.0, se_sum = 0.0, covered = 0.0;
    for (int r = 0; r < R; ++r) {
      if (!rep_ok[r]) continue;
      const double e = est[r * n_vals + v];
      const double se = ses[r * n_vals + v];
      ss += (e - cell.mean) * (e - cell.mean);
      se_sum += se;
      const double z = 1.959963984540054;
      if (cell.truth >= e - z * se && cell.truth <= e + z * se) covered += 1.0;
    }
    cell.esd = std::sqrt(ss / (ok_count - 1));
    cell.mean_se = se_sum / ok_count;
    cell.cp = covered / ok_count;
    report.cells.push_back(cell);
  }
  return report;
}

void write_harness_report(const std::string& path, const HarnessReport& report) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write harness report '" + path + "'");
  out << "measure\tapproach\ts\ttrue\tmean\tesd\tse\tcp\n";
  char buf[256];
  for (const HarnessCell& c : report.cells) {
    std::string s_label = std::isinf(c.s) ? "never" : [&] {
      char b[32];
      std::snprintf(b, sizeof b, "%g", c.s);
      return std::string(b);
    }();
    std::snprintf(buf, sizeof buf, "%s\t%s\t%s\t%.6f\t%.6f\t%.6f\t%.6f\t%.4f\n",
                  c.measure.c_str(), c.approach.c_str(), s_label.c_str(), c.truth, c.mean,
                  c.esd, c.mean_se, c.cp);
    out << buf;
  }
}

}  // namespace mscea

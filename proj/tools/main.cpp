#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mscea/bootstrap.hpp"
#include "mscea/errors.hpp"
#include "mscea/estimands.hpp"
#include "mscea/harness.hpp"
#include "mscea/ingest.hpp"
#include "mscea/multistate.hpp"
#include "mscea/simgen.hpp"

namespace {

using namespace mscea;

std::string fmt(double v, const char* spec = "%.17g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string s_label(double s) { return std::isinf(s) ? "never" : fmt(s, "%g"); }

double parse_s_token(const std::string& token) {
  if (token == "never" || token == "Never" || token == "inf") return kNeverScreen;
  try {
    return std::stod(token);
  } catch (const std::exception&) {
    throw ConfigError("cannot parse screening age '" + token + "'");
  }
}

std::vector<std::string> split_list(const std::string& csv) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : csv) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

double wald_p(double coef, double var) {
  if (!(var > 0.0)) return 1.0;
  const double z = std::abs(coef) / std::sqrt(var);
  return std::erfc(z / std::sqrt(2.0));
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string setting = "I";
  std::string censoring = "";
  int n = 0;
  std::uint64_t seed = 12345;
  std::string spec_path;
  std::string out;
  std::string emit_spec;
};

GeneratorSpec resolve_generator(const std::string& setting, const std::string& censoring,
                                const std::string& spec_path) {
  if (!spec_path.empty()) return GeneratorSpec::load(spec_path);
  GeneratorSpec g;
  if (setting == "I" || setting == "1") {
    const std::string cen = censoring.empty() ? "i" : censoring;
    if (cen == "i" || cen == "uniform") {
      g = GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::independent_uniform);
    } else if (cen == "ii" || cen == "population") {
      g = GeneratorSpec::setting_one(GeneratorSpec::CensoringScenario::cox_population);
    } else {
      throw ConfigError("unknown censoring scenario '" + cen + "' (use i or ii)");
    }
  } else if (setting == "II" || setting == "2") {
    g = GeneratorSpec::setting_two();
    if (!censoring.empty() && censoring != "ii" && censoring != "population") {
      throw ConfigError("setting II uses the population censoring scenario");
    }
  } else {
    throw ConfigError("unknown setting '" + setting + "' (use I or II)");
  }
  return g;
}

int cmd_simulate(const SimulateArgs& args) {
  GeneratorSpec g = resolve_generator(args.setting, args.censoring, args.spec_path);
  if (args.n > 0) g.n = args.n;
  Cohort cohort = generate(g, args.seed);
  write_cohort(args.out, cohort);
  if (!args.emit_spec.empty()) g.save(args.emit_spec);
  EventRates r = empirical_rates(cohort);
  std::fprintf(stderr,
               "wrote %zu subjects to %s (disease %.1f%%, death w/o disease %.1f%%, "
               "death after %.1f%%)\n",
               cohort.size(), args.out.c_str(), 100 * r.disease, 100 * r.death_before,
               100 * r.death_after);
  return 0;
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

struct FitArgs {
  std::string cohort;
  std::string out;
  std::string coef_table;
  std::vector<std::string> schema_pairs;
  SolverOptions solver;
  bool no_fail_fast = false;
};

ColumnSchema parse_schema(const std::vector<std::string>& pairs) {
  ColumnSchema schema;
  for (const std::string& p : pairs) {
    const auto eq = p.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("schema mapping '" + p + "' must look like canonical=actual");
    }
    schema[p.substr(0, eq)] = p.substr(eq + 1);
  }
  return schema;
}

void write_coef_table(const std::string& path, const MultiStateFit& fit) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write coefficient table '" + path + "'");
  out << "term\thr_01\tci_01\tp_01\thr_02\tci_02\tp_02\thr_13\tci_13\tp_13\n";
  auto cell = [](const CoxFit& f, const std::string& term) -> std::array<std::string, 3> {
    for (std::size_t k = 0; k < f.coefficient_names.size(); ++k) {
      if (f.coefficient_names[k] != term) continue;
      const double b = f.coefficients[k];
      const double se = std::sqrt(f.covariance(k, k));
      const double lo = std::exp(b - 1.959963984540054 * se);
      const double hi = std::exp(b + 1.959963984540054 * se);
      const double p = wald_p(b, f.covariance(k, k));
      return {fmt(std::exp(b), "%.2f"), fmt(lo, "%.2f") + "-" + fmt(hi, "%.2f"),
              p < 1e-3 ? std::string("<1.0e-3") : fmt(p, "%.2f")};
    }
    return {"-", "-", "-"};
  };
  std::vector<std::string> terms = {"screening"};
  for (const auto& nm : fit.covariate_names) terms.push_back(nm);
  terms.push_back("onset_age");
  for (const std::string& term : terms) {
    auto c1 = cell(fit.fit01, term);
    auto c2 = cell(fit.fit02, term);
    auto c3 = cell(fit.fit13, term);
    out << term << '\t' << c1[0] << '\t' << c1[1] << '\t' << c1[2] << '\t' << c2[0] << '\t'
        << c2[1] << '\t' << c2[2] << '\t' << c3[0] << '\t' << c3[1] << '\t' << c3[2] << '\n';
  }
}

int cmd_fit(const FitArgs& args) {
  IngestOptions opts;
  opts.fail_fast = !args.no_fail_fast;
  Cohort cohort = ingest_cohort(args.cohort, parse_schema(args.schema_pairs), opts);
  MultiStateFit fit = fit_illness_death(cohort, args.solver);
  if (!args.out.empty()) save_fit(args.out, fit);
  if (!args.coef_table.empty()) write_coef_table(args.coef_table, fit);
  std::fprintf(stderr,
               "fitted n=%d: events 0->1: %d, 0->2: %d, 1->3: %d; screening HR 0->1 = %.3f\n",
               fit.n_subjects, fit.event_counts[0], fit.event_counts[1], fit.event_counts[2],
               std::exp(fit.fit01.coefficient("screening")));
  return 0;
}

// ---------------------------------------------------------------------------
// estimate
// ---------------------------------------------------------------------------

struct EstimateArgs {
  std::string cohort;
  std::string fit_path;
  std::string s_csv = "never,50,60,70";
  std::string t_csv = "70";
  double t0 = std::numeric_limits<double>::quiet_NaN();
  double t0_lost = std::numeric_limits<double>::quiet_NaN();
  std::string measures_csv = "rmst";
  std::string quality_csv;
  double interval = 10.0;
  int bootstrap_B = 0;
  std::uint64_t seed = 12345;
  std::string ci_method = "normal";
  int workers = 1;
  std::string out;
  std::vector<std::string> schema_pairs;
  SolverOptions solver;
  bool no_fail_fast = false;
};

void write_estimates(const std::string& path, const std::vector<EstimandResult>& results) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write estimates '" + path + "'");
  out << "measure\ts\tt\testimate\tcomponent\tse\tci_lo\tci_hi\n";
  auto row = [&](const EstimandResult& r, const std::string& component, double value,
                 std::optional<double> se, std::optional<std::pair<double, double>> ci) {
    out << r.measure << '\t' << s_label(r.s) << '\t' << fmt(r.t, "%g") << '\t' << fmt(value)
        << '\t' << component << '\t' << (se ? fmt(*se) : "") << '\t'
        << (ci ? fmt(ci->first) : "") << '\t' << (ci ? fmt(ci->second) : "") << '\n';
  };
  for (const EstimandResult& r : results) {
    row(r, "total", r.estimate, r.se, r.ci);
    for (std::size_t c = 0; c < r.components.size(); ++c) {
      row(r, r.components[c].first, r.components[c].second,
          c < r.component_se.size() ? std::optional<double>(r.component_se[c]) : std::nullopt,
          c < r.component_ci.size()
              ? std::optional<std::pair<double, double>>(r.component_ci[c])
              : std::nullopt);
    }
  }
}

int cmd_estimate(const EstimateArgs& args) {
  IngestOptions iopts;
  iopts.fail_fast = !args.no_fail_fast;
  Cohort cohort = ingest_cohort(args.cohort, parse_schema(args.schema_pairs), iopts);

  double t0 = args.t0;
  if (std::isnan(t0)) {
    t0 = std::numeric_limits<double>::infinity();
    for (const Subject& s : cohort.subjects) t0 = std::min(t0, s.entry_age);
  }
  const double t0_lost = std::isnan(args.t0_lost) ? t0 : args.t0_lost;

  std::vector<double> s_grid;
  for (const std::string& tok : split_list(args.s_csv)) s_grid.push_back(parse_s_token(tok));
  std::vector<double> horizons;
  for (const std::string& tok : split_list(args.t_csv)) horizons.push_back(std::stod(tok));
  if (s_grid.empty() || horizons.empty()) {
    throw ConfigError("screening-age and horizon grids must be nonempty");
  }
  for (double t : horizons) {
    if (!(t > t0)) throw ConfigError("every horizon must exceed t0");
  }

  QualityProfile profile;
  bool have_profile = false;
  if (!args.quality_csv.empty()) {
    const auto parts = split_list(args.quality_csv);
    if (parts.size() != 3) throw ConfigError("--quality expects a,b,c");
    profile.initial_care = std::stod(parts[0]);
    profile.continuing_care = std::stod(parts[1]);
    profile.terminal_care = std::stod(parts[2]);
    profile.validate();
    have_profile = true;
  }

  std::vector<EstimandRequest> requests;
  for (const std::string& m : split_list(args.measures_csv)) {
    Measure measure = measure_from_label(m);
    if ((measure == Measure::qaly || measure == Measure::qaly_lost_disease) &&
        !have_profile) {
      throw ConfigError("measure '" + m + "' needs --quality a,b,c");
    }
    for (double t : horizons) {
      for (double s : s_grid) {
        EstimandRequest rq;
        rq.measure = measure;
        rq.s = s;
        rq.t = t;
        rq.t0 =
            (measure == Measure::life_years_lost || measure == Measure::qaly_lost_disease)
                ? t0_lost
                : t0;
        rq.profile = profile;
        rq.screening_interval = args.interval;
        requests.push_back(rq);
      }
    }
  }

  std::vector<EstimandResult> results;
  if (args.bootstrap_B > 0) {
    BootstrapPlan plan;
    plan.B = args.bootstrap_B;
    plan.seed = args.seed;
    plan.workers = args.workers;
    if (args.ci_method == "normal") {
      plan.ci_method = CiMethod::normal;
    } else if (args.ci_method == "percentile") {
      plan.ci_method = CiMethod::percentile;
    } else {
      throw ConfigError("--ci-method must be normal or percentile");
    }
    BootstrapOutcome outcome = bootstrap(cohort, requests, plan, args.solver);
    results = std::move(outcome.results);
    if (outcome.replicates_failed > 0) {
      std::fprintf(stderr, "bootstrap: dropped %d of %d replicates\n",
                   outcome.replicates_failed, outcome.replicates_run);
    }
  } else {
    MultiStateFit fit = args.fit_path.empty() ? fit_illness_death(cohort, args.solver)
                                              : load_fit(args.fit_path);
    EstimandEvaluator eval(fit, cohort);
    results = eval.evaluate(requests);
  }
  write_estimates(args.out, results);
  std::fprintf(stderr, "wrote %zu estimand results to %s\n", results.size(),
               args.out.c_str());
  return 0;
}

// ---------------------------------------------------------------------------
// harness
// ---------------------------------------------------------------------------

struct HarnessArgs {
  std::string setting = "I";
  std::string censoring = "";
  std::string spec_path;
  int replicates = 100;
  int n = 0;
  int bootstrap_B = 50;
  std::uint64_t seed = 20240101;
  int workers = 1;
  double t = 70.0;
  double t0 = 40.0;
  double t0_lost = std::numeric_limits<double>::quiet_NaN();
  std::string s_csv = "never,50";
  std::string out;
};

int cmd_harness(const HarnessArgs& args) {
  GeneratorSpec g = resolve_generator(args.setting, args.censoring, args.spec_path);
  const int n = args.n > 0 ? args.n : g.n;
  HarnessConfig cfg;
  cfg.t = args.t;
  cfg.t0_rmst = args.t0;
  // Lost-years window origin: age 0 for the dense-disease setting, the RMST
  // origin for the late-onset setting (both published conventions).
  const bool setting_two = args.setting == "II" || args.setting == "2";
  cfg.t0_lost = std::isnan(args.t0_lost) ? (setting_two ? args.t0 : 0.0) : args.t0_lost;
  cfg.workers = args.workers;
  cfg.s_list.clear();
  for (const std::string& tok : split_list(args.s_csv)) {
    cfg.s_list.push_back(parse_s_token(tok));
  }
  HarnessReport report = run_harness(g, args.replicates, n, args.bootstrap_B, args.seed, cfg);
  if (!args.out.empty()) write_harness_report(args.out, report);
  std::printf("harness: R=%d n=%d B=%d failed=%d\n", report.replicates, report.n,
              report.bootstrap_B, report.failed_replicates);
  std::printf("%-22s %-18s %-6s %10s %10s %8s %8s %7s\n", "measure", "approach", "s", "true",
              "mean", "esd", "se", "cp");
  for (const HarnessCell& c : report.cells) {
    std::printf("%-22s %-18s %-6s %10.4f %10.4f %8.4f %8.4f %7.3f\n", c.measure.c_str(),
                c.approach.c_str(), s_label(c.s).c_str(), c.truth, c.mean, c.esd, c.mean_se,
                c.cp);
  }
  return 0;
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportArgs {
  std::string estimates;
  std::string baseline = "never";
  std::string out_dir = ".";
};

struct EstimateRow {
  std::string measure;
  std::string s;
  double t;
  double estimate;
  std::string component;
  std::string se, ci_lo, ci_hi;
};

std::vector<EstimateRow> read_estimates(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open estimates '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty estimates file");
  if (line != "measure\ts\tt\testimate\tcomponent\tse\tci_lo\tci_hi") {
    throw DataError("unexpected estimates header in '" + path + "'");
  }
  std::vector<EstimateRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::string cur;
    for (char c : line) {
      if (c == '\t') {
        f.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    f.push_back(cur);
    if (f.size() != 8) throw DataError("malformed estimates row: " + line);
    EstimateRow r;
    r.measure = f[0];
    r.s = f[1];
    r.t = std::stod(f[2]);
    r.estimate = std::stod(f[3]);
    r.component = f[4];
    r.se = f[5];
    r.ci_lo = f[6];
    r.ci_hi = f[7];
    rows.push_back(r);
  }
  return rows;
}

int cmd_report(const ReportArgs& args) {
  const std::vector<EstimateRow> rows = read_estimates(args.estimates);
  std::filesystem::create_directories(args.out_dir);

  std::set<std::string> measures;
  std::set<std::string> s_values;
  std::set<double> horizons;
  for (const auto& r : rows) {
    measures.insert(r.measure);
    s_values.insert(r.s);
    horizons.insert(r.t);
  }
  if (!s_values.count(args.baseline)) {
    throw ConfigError("baseline strategy '" + args.baseline + "' not present in estimates");
  }
  auto find_row = [&](const std::string& m, const std::string& s, double t,
                      const std::string& comp) -> const EstimateRow* {
    for (const auto& r : rows) {
      if (r.measure == m && r.s == s && r.t == t && r.component == comp) return &r;
    }
    return nullptr;
  };

  // Per-1000 tables with baseline differences. Strategies whose initiation
  // age is at or past the horizon coincide with never screening; those cells
  // carry a marker rather than a blank.
  for (const std::string& m : measures) {
    std::ofstream out(std::filesystem::path(args.out_dir) / (m + "_per1000.tsv"));
    out << "t\tcomponent\ts\tvalue_per_1000\tdiff_vs_" << args.baseline
        << "_per_1000\tsame_as_never\n";
    for (double t : horizons) {
      std::set<std::string> comps;
      for (const auto& r : rows) {
        if (r.measure == m && r.t == t) comps.insert(r.component);
      }
      for (const std::string& comp : comps) {
        const EstimateRow* base = find_row(m, args.baseline, t, comp);
        for (const std::string& s : s_values) {
          const EstimateRow* r = find_row(m, s, t, comp);
          if (r == nullptr || base == nullptr) continue;
          const bool past_horizon = s != "never" && std::stod(s) >= t;
          out << fmt(t, "%g") << '\t' << comp << '\t' << s << '\t'
              << fmt(1000.0 * r->estimate, "%.1f") << '\t'
              << fmt(1000.0 * (r->estimate - base->estimate), "%.1f") << '\t'
              << (past_horizon ? 1 : 0) << '\n';
        }
      }
    }
  }

  // Plot data and the incremental cost-effectiveness table: screenings as the
  // cost, qaly as the effect, relative to the baseline strategy.
  if (measures.count("qaly") && measures.count("screenings")) {
    std::ofstream plot(std::filesystem::path(args.out_dir) / "plotdata.tsv");
    plot << "s\tqaly_gain_per_1000\tscreenings_per_1000\ticer\n";
    std::ofstream icer_out(std::filesystem::path(args.out_dir) / "icer_table.tsv");
    icer_out << "t\ts\tdelta_screenings_per_1000\tdelta_qaly_per_1000\ticer\n";
    for (double t : horizons) {
      const EstimateRow* base_q = find_row("qaly", args.baseline, t, "total");
      const EstimateRow* base_c = find_row("screenings", args.baseline, t, "total");
      if (base_q == nullptr || base_c == nullptr) continue;
      for (const std::string& s : s_values) {
        if (s == args.baseline) continue;
        const EstimateRow* rq = find_row("qaly", s, t, "total");
        const EstimateRow* rc = find_row("screenings", s, t, "total");
        if (rq == nullptr || rc == nullptr) continue;
        const double dq = rq->estimate - base_q->estimate;
        const double dc = rc->estimate - base_c->estimate;
        const std::string icer_str = dq > 0.0 ? fmt(dc / dq, "%.1f") : "undefined";
        if (t == *horizons.rbegin()) {
          plot << s << '\t' << fmt(1000.0 * dq, "%.1f") << '\t'
               << fmt(1000.0 * rc->estimate, "%.1f") << '\t' << icer_str << '\n';
        }
        icer_out << fmt(t, "%g") << '\t' << s << '\t' << fmt(1000.0 * dc, "%.1f") << '\t'
                 << fmt(1000.0 * dq, "%.1f") << '\t' << icer_str << '\n';
      }
    }
  }
  std::fprintf(stderr, "wrote report tables to %s\n", args.out_dir.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Illness-death multi-state cost-effectiveness analysis"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Configuration file (INI/TOML; flags override)");

  SimulateArgs sim;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic cohort");
  simulate->add_option("--setting", sim.setting, "Simulation setting: I or II");
  simulate->add_option("--censoring", sim.censoring, "Censoring scenario: i or ii");
  simulate->add_option("--n", sim.n, "Cohort size (default per setting)");
  simulate->add_option("--seed", sim.seed, "Generator seed");
  simulate->add_option("--spec", sim.spec_path, "Generator spec JSON (overrides --setting)");
  simulate->add_option("--out", sim.out, "Output cohort file")->required();
  simulate->add_option("--emit-spec", sim.emit_spec, "Write the effective generator spec");

  FitArgs fita;
  CLI::App* fit = app.add_subcommand("fit", "Fit the illness-death model to a cohort");
  fit->add_option("--cohort", fita.cohort, "Cohort file")->required();
  fit->add_option("--out", fita.out, "Serialized fit (JSON)");
  fit->add_option("--coef-table", fita.coef_table, "Coefficient table (HR, CI, p-value)");
  fit->add_option("--col", fita.schema_pairs, "Column mapping canonical=actual (repeatable)");
  fit->add_option("--tol", fita.solver.tol, "Score tolerance");
  fit->add_option("--max-iter", fita.solver.max_iter, "Newton iteration cap");
  fit->add_option("--verbosity", fita.solver.verbosity, "Solver verbosity");
  std::string tie_method = "breslow";
  fit->add_option("--tie-method", tie_method, "Tie handling (breslow)");
  fit->add_flag("--no-fail-fast", fita.no_fail_fast, "Collect all ingest errors");

  EstimateArgs est;
  CLI::App* estimate = app.add_subcommand("estimate", "Evaluate counterfactual estimands");
  estimate->add_option("--cohort", est.cohort, "Cohort file")->required();
  estimate->add_option("--fit", est.fit_path, "Serialized fit (skips refitting)");
  estimate->add_option("--s", est.s_csv, "Screening ages, e.g. never,50,60,70");
  estimate->add_option("--t", est.t_csv, "Horizons, e.g. 60,70,80");
  estimate->add_option("--t0", est.t0, "Window origin (default: min entry age)");
  estimate->add_option("--t0-lost", est.t0_lost, "Window origin for lost-years measures");
  estimate->add_option("--measures", est.measures_csv,
                       "Comma list: rmst,qaly,life_years_lost,qaly_lost_disease,screenings");
  estimate->add_option("--quality", est.quality_csv, "Quality scores a,b,c");
  estimate->add_option("--interval", est.interval, "Years between screenings");
  estimate->add_option("--bootstrap", est.bootstrap_B, "Bootstrap replicates (0 = none)");
  estimate->add_option("--seed", est.seed, "Bootstrap seed");
  estimate->add_option("--ci-method", est.ci_method, "normal or percentile");
  estimate->add_option("--workers", est.workers, "Parallel bootstrap workers");
  estimate->add_option("--out", est.out, "Output estimates file")->required();
  estimate->add_option("--col", est.schema_pairs, "Column mapping canonical=actual");
  estimate->add_option("--tol", est.solver.tol, "Score tolerance");
  estimate->add_option("--max-iter", est.solver.max_iter, "Newton iteration cap");
  estimate->add_flag("--no-fail-fast", est.no_fail_fast, "Collect all ingest errors");

  HarnessArgs har;
  CLI::App* harness = app.add_subcommand("harness", "Replication and coverage harness");
  harness->add_option("--setting", har.setting, "Simulation setting: I or II");
  harness->add_option("--censoring", har.censoring, "Censoring scenario: i or ii");
  harness->add_option("--spec", har.spec_path, "Generator spec JSON");
  harness->add_option("--replicates", har.replicates, "Number of simulated datasets");
  harness->add_option("--n", har.n, "Cohort size per replicate");
  harness->add_option("--bootstrap", har.bootstrap_B, "Bootstrap replicates per dataset");
  harness->add_option("--seed", har.seed, "Harness seed");
  harness->add_option("--workers", har.workers, "Parallel replicate workers");
  harness->add_option("--t", har.t, "Horizon");
  harness->add_option("--t0", har.t0, "RMST window origin");
  harness->add_option("--t0-lost", har.t0_lost, "Lost-years window origin");
  harness->add_option("--s-grid", har.s_csv, "Screening ages, e.g. never,50");
  harness->add_option("--out", har.out, "Report file");

  ReportArgs rep;
  CLI::App* report = app.add_subcommand("report", "Per-1000 tables and plot data");
  report->add_option("--estimates", rep.estimates, "Estimates file from 'estimate'")
      ->required();
  report->add_option("--baseline", rep.baseline, "Baseline strategy (default never)");
  report->add_option("--out-dir", rep.out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (tie_method != "breslow") {
      throw ConfigError("tie method '" + tie_method + "' not supported (breslow only)");
    }
    if (simulate->parsed()) return cmd_simulate(sim);
    if (fit->parsed()) return cmd_fit(fita);
    if (estimate->parsed()) return cmd_estimate(est);
    if (harness->parsed()) return cmd_harness(har);
    if (report->parsed()) return cmd_report(rep);
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const QuadratureError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 3;
  } catch (const FitError& e) {
    std::fprintf(stderr, "fit error: %s\n", e.what());
    return 4;
  } catch (const InferenceError& e) {
    std::fprintf(stderr, "inference error: %s\n", e.what());
    return 5;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

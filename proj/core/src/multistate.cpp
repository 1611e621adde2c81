#include "mscea/multistate.hpp"

#include <cmath>
#include <fstream>
#include <limits>

#include "json.hpp"
#include "mscea/errors.hpp"

namespace mscea {

MultiStateProblem MultiStateProblem::build(const Cohort& cohort) {
  cohort.validate();
  MultiStateProblem mp;
  mp.p01 = CoxProblem::build(cohort, TransitionSpec::standard(Transition::healthy_to_disease));
  mp.p02 = CoxProblem::build(cohort, TransitionSpec::standard(Transition::healthy_to_death));
  mp.p13 = CoxProblem::build(cohort, TransitionSpec::standard(Transition::disease_to_death));
  mp.covariate_names = cohort.covariate_names;
  mp.n_subjects = static_cast<int>(cohort.size());
  return mp;
}

MultiStateFit MultiStateProblem::fit(const SolverOptions& options,
                                     std::span<const double> weights) const {
  MultiStateFit out;
  out.fit01 = p01.fit(options, weights);
  out.fit02 = p02.fit(options, weights);
  out.fit13 = p13.fit(options, weights);
  out.covariate_names = covariate_names;
  out.n_subjects = n_subjects;
  out.event_counts = {out.fit01.n_events, out.fit02.n_events, out.fit13.n_events};
  return out;
}

MultiStateFit fit_illness_death(const Cohort& cohort, const SolverOptions& options,
                                std::span<const double> weights) {
  return MultiStateProblem::build(cohort).fit(options, weights);
}

HazardComponents::HazardComponents(const MultiStateFit& fit, std::span<const double> x,
                                   double s)
    : fit_(&fit), s_(s) {
  if (x.size() != fit.covariate_names.size()) {
    throw ConfigError("covariate vector has dimension " + std::to_string(x.size()) +
                      ", fit expects " + std::to_string(fit.covariate_names.size()));
  }
  auto static_lp = [&](const CoxFit& f, int skip1, int skip2) {
    double lp = 0.0;
    std::size_t ix = 0;
    for (std::size_t k = 0; k < f.coefficients.size(); ++k) {
      if (static_cast<int>(k) == skip1 || static_cast<int>(k) == skip2) continue;
      lp += f.coefficients[k] * x[ix++];
    }
    return lp;
  };
  const double g01 = static_lp(fit.fit01, fit.fit01.screening_index(), -1);
  const double g02 = static_lp(fit.fit02, fit.fit02.screening_index(), -1);
  const double g13 =
      static_lp(fit.fit13, fit.fit13.screening_index(), fit.fit13.onset_age_index());
  const double b01 = fit.fit01.coefficients[fit.fit01.screening_index()];
  const double b02 = fit.fit02.coefficients[fit.fit02.screening_index()];
  pre01_ = std::exp(g01);
  post01_ = std::exp(g01 + b01);
  pre02_ = std::exp(g02);
  post02_ = std::exp(g02 + b02);
  base13_ = std::exp(g13);
}

namespace {
double split_cumhaz(const StepFunction& base, double t, double s, double pre, double post) {
  // Z(u; s) = I(s < u): jumps at u <= s use the pre multiplier, later ones
  // post. A null screening effect must be exactly independent of s, so the
  // split is skipped when the multipliers coincide.
  if (!(t > s) || pre == post) return pre * base.value(t);
  const double at_s = base.value(s);
  return pre * at_s + post * (base.value(t) - at_s);
}
}  // namespace

double HazardComponents::cumhaz01(double t) const {
  return split_cumhaz(fit_->fit01.baseline, t, s_, pre01_, post01_);
}

double HazardComponents::cumhaz02(double t) const {
  return split_cumhaz(fit_->fit02.baseline, t, s_, pre02_, post02_);
}

double HazardComponents::cumhaz13_sojourn(double sojourn, double onset_age) const {
  const CoxFit& f = fit_->fit13;
  const double alpha = f.coefficients[f.onset_age_index()];
  const double b13 = f.coefficients[f.screening_index()];
  const double z = s_ < onset_age ? 1.0 : 0.0;
  const double mult = base13_ * std::exp(alpha * onset_age + b13 * z);
  return mult * f.baseline.value(sojourn);
}

namespace {

using nlohmann::json;

json fit_to_json(const CoxFit& f) {
  json j;
  j["coefficient_names"] = f.coefficient_names;
  j["coefficients"] = f.coefficients;
  json cov = json::array();
  for (std::size_t r = 0; r < f.covariance.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < f.covariance.cols(); ++c) row.push_back(f.covariance(r, c));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  j["baseline"] = {{"times", f.baseline.times()}, {"increments", f.baseline.increments()}};
  j["loglik"] = f.loglik;
  j["n_events"] = f.n_events;
  j["iterations"] = f.iterations;
  j["final_gradient_norm"] = f.final_gradient_norm;
  return j;
}

CoxFit fit_from_json(const json& j) {
  CoxFit f;
  f.coefficient_names = j.at("coefficient_names").get<std::vector<std::string>>();
  f.coefficients = j.at("coefficients").get<std::vector<double>>();
  const auto& cov = j.at("covariance");
  const std::size_t p = f.coefficients.size();
  f.covariance = Matrix(p, p);
  for (std::size_t r = 0; r < p; ++r)
    for (std::size_t c = 0; c < p; ++c) f.covariance(r, c) = cov.at(r).at(c).get<double>();
  f.baseline = StepFunction(j.at("baseline").at("times").get<std::vector<double>>(),
                            j.at("baseline").at("increments").get<std::vector<double>>());
  f.loglik = j.at("loglik").get<double>();
  f.n_events = j.at("n_events").get<int>();
  f.iterations = j.at("iterations").get<int>();
  f.final_gradient_norm = j.at("final_gradient_norm").get<double>();
  return f;
}

}  // namespace

void save_fit(const std::string& path, const MultiStateFit& fit) {
  json j;
  j["format"] = "mscea-multistate-fit";
  j["version"] = 1;
  j["covariate_names"] = fit.covariate_names;
  j["n_subjects"] = fit.n_subjects;
  j["event_counts"] = fit.event_counts;
  j["fit01"] = fit_to_json(fit.fit01);
  j["fit02"] = fit_to_json(fit.fit02);
  j["fit13"] = fit_to_json(fit.fit13);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write fit file '" + path + "'");
  out << j.dump(1) << '\n';
}

MultiStateFit load_fit(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open fit file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw DataError("fit file '" + path + "': " + e.what());
  }
  if (j.value("format", "") != "mscea-multistate-fit") {
    throw DataError("fit file '" + path + "' has unrecognized format");
  }
  MultiStateFit fit;
  fit.covariate_names = j.at("covariate_names").get<std::vector<std::string>>();
  fit.n_subjects = j.at("n_subjects").get<int>();
  auto ec = j.at("event_counts").get<std::vector<int>>();
  for (std::size_t k = 0; k < 3 && k < ec.size(); ++k) fit.event_counts[k] = ec[k];
  fit.fit01 = fit_from_json(j.at("fit01"));
  fit.fit02 = fit_from_json(j.at("fit02"));
  fit.fit13 = fit_from_json(j.at("fit13"));
  return fit;
}

}  // namespace mscea

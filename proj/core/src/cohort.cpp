#include "mscea/cohort.hpp"

#include <cmath>
#include <unordered_set>

#include "mscea/errors.hpp"

namespace mscea {

std::optional<std::string> validate_subject(const Subject& s) {
  auto finite = [](double v) { return std::isfinite(v); };
  if (s.id.empty()) return "empty id";
  if (!finite(s.entry_age) || !finite(s.u_time) || !finite(s.v_time)) {
    return "non-finite time field";
  }
  if (s.entry_age < 0.0) return "entry_age must be >= 0";
  if (s.u_time < s.entry_age) return "u_time must be >= entry_age";
  if (s.delta1 && s.delta2) return "delta1 and delta2 are mutually exclusive";
  if (s.delta3 && !s.delta1) return "delta3 requires delta1";
  if (s.v_time < 0.0) return "v_time must be >= 0";
  if (!s.delta1 && s.v_time != 0.0) return "v_time must be 0 when delta1 = 0";
  if (s.screen_age.has_value() && !finite(*s.screen_age)) return "non-finite screen_age";
  if (s.screen_age.has_value() && *s.screen_age < 0.0) return "screen_age must be >= 0";
  // Subjects already diseased or dead at entry carry no risk-set information;
  // an event exactly at the entry age is unusable and rejected here.
  if (s.u_time == s.entry_age && (s.delta1 || s.delta2)) {
    return "event at entry age (subject not event-free at entry)";
  }
  for (double x : s.covariates) {
    if (!finite(x)) return "non-finite or missing covariate";
  }
  return std::nullopt;
}

void Cohort::validate() const {
  std::unordered_set<std::string> ids;
  ids.reserve(subjects.size());
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    const Subject& s = subjects[i];
    if (auto err = validate_subject(s)) {
      throw DataError("subject '" + s.id + "': " + *err);
    }
    if (s.covariates.size() != covariate_names.size()) {
      throw DataError("subject '" + s.id + "': covariate dimension " +
                      std::to_string(s.covariates.size()) + " != " +
                      std::to_string(covariate_names.size()));
    }
    if (!ids.insert(s.id).second) {
      throw DataError("duplicate subject id '" + s.id + "'");
    }
  }
}

}  // namespace mscea

#include "mscea/step_function.hpp"

#include <algorithm>
#include <cmath>

#include "mscea/errors.hpp"

namespace mscea {

StepFunction::StepFunction(std::vector<double> times, std::vector<double> increments)
    : times_(std::move(times)), increments_(std::move(increments)) {
  if (times_.size() != increments_.size()) {
    throw DataError("step function: times and increments differ in length");
  }
  for (std::size_t i = 0; i < times_.size(); ++i) {
    if (!std::isfinite(times_[i]) || !std::isfinite(increments_[i])) {
      throw DataError("step function: non-finite jump");
    }
    if (increments_[i] < 0.0) throw DataError("step function: negative increment");
    if (i > 0 && !(times_[i] > times_[i - 1])) {
      throw DataError("step function: jump times not strictly increasing");
    }
  }
}

StepFunction StepFunction::from_jumps(std::vector<std::pair<double, double>> jumps) {
  std::sort(jumps.begin(), jumps.end());
  std::vector<double> t, d;
  t.reserve(jumps.size());
  d.reserve(jumps.size());
  for (const auto& [time, inc] : jumps) {
    if (!t.empty() && t.back() == time) {
      d.back() += inc;
    } else {
      t.push_back(time);
      d.push_back(inc);
    }
  }
  return StepFunction(std::move(t), std::move(d));
}

double StepFunction::value(double t) const {
  double s = 0.0;
  for (std::size_t i = 0; i < times_.size() && times_[i] <= t; ++i) s += increments_[i];
  return s;
}

double StepFunction::value_before(double t) const {
  double s = 0.0;
  for (std::size_t i = 0; i < times_.size() && times_[i] < t; ++i) s += increments_[i];
  return s;
}

double StepFunction::total_mass() const {
  double s = 0.0;
  for (double d : increments_) s += d;
  return s;
}

double step_integral(const StepFunction& f, const std::function<double(double)>& g,
                     double a, double b) {
  double s = 0.0;
  const auto& t = f.times();
  const auto& d = f.increments();
  for (std::size_t j = 0; j < t.size(); ++j) {
    if (t[j] <= a) continue;
    if (t[j] > b) break;
    s += g(t[j]) * d[j];
  }
  return s;
}

}  // namespace mscea

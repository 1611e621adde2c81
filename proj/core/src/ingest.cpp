#include "mscea/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

#include "mscea/errors.hpp"

namespace mscea {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == delim) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& field, const std::string& what) {
  double v = 0.0;
  const char* b = field.data();
  const char* e = b + field.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) {
    throw DataError("non-numeric " + what + " '" + field + "'");
  }
  return v;
}

bool parse_indicator(const std::string& field, const std::string& what) {
  if (field == "0") return false;
  if (field == "1") return true;
  throw DataError(what + " must be 0 or 1, got '" + field + "'");
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

Cohort ingest_cohort(const std::string& path, const ColumnSchema& schema,
                     const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open cohort file '" + path + "'");

  std::string header;
  if (!std::getline(in, header)) throw DataError("empty cohort file '" + path + "'");

  char delim = options.delimiter;
  if (delim == '\0') {
    delim = header.find('\t') != std::string::npos ? '\t' : ',';
  }
  const std::vector<std::string> columns = split_line(header, delim);

  auto file_name = [&](const std::string& canonical) {
    auto it = schema.find(canonical);
    return it == schema.end() ? canonical : it->second;
  };
  auto column_index = [&](const std::string& canonical) -> int {
    const std::string name = file_name(canonical);
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) {
      throw DataError("missing column '" + name + "' in '" + path + "'");
    }
    return static_cast<int>(it - columns.begin());
  };

  const int c_id = column_index("id");
  const int c_entry = column_index("entry_age");
  const int c_u = column_index("u_time");
  const int c_d1 = column_index("delta1");
  const int c_d2 = column_index("delta2");
  const int c_v = column_index("v_time");
  const int c_d3 = column_index("delta3");
  const int c_s = column_index("screen_age");

  // Remaining columns, in file order, are covariates.
  std::vector<int> fixed = {c_id, c_entry, c_u, c_d1, c_d2, c_v, c_d3, c_s};
  Cohort cohort;
  std::vector<int> c_x;
  for (int j = 0; j < static_cast<int>(columns.size()); ++j) {
    if (std::find(fixed.begin(), fixed.end(), j) == fixed.end()) {
      c_x.push_back(j);
      cohort.covariate_names.push_back(columns[j]);
    }
  }

  std::vector<std::string> problems;
  auto report = [&](int row, const std::string& msg) {
    std::string full = "row " + std::to_string(row) + ": " + msg;
    if (options.fail_fast) throw DataError(full + " (in '" + path + "')");
    problems.push_back(full);
  };

  std::string line;
  int row = 1;  // header is row 1
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const std::vector<std::string> f = split_line(line, delim);
    if (f.size() != columns.size()) {
      report(row, "expected " + std::to_string(columns.size()) + " fields, got " +
                      std::to_string(f.size()));
      continue;
    }
    try {
      Subject s;
      s.id = f[c_id];
      s.entry_age = parse_double(f[c_entry], "entry_age");
      s.u_time = parse_double(f[c_u], "u_time");
      s.delta1 = parse_indicator(f[c_d1], "delta1");
      s.delta2 = parse_indicator(f[c_d2], "delta2");
      s.v_time = parse_double(f[c_v], "v_time");
      s.delta3 = parse_indicator(f[c_d3], "delta3");
      if (!f[c_s].empty()) s.screen_age = parse_double(f[c_s], "screen_age");
      s.covariates.reserve(c_x.size());
      for (int j : c_x) s.covariates.push_back(parse_double(f[j], "covariate " + columns[j]));

      if (auto err = validate_subject(s)) throw DataError(*err);

      // A recorded screening age at or after U carries no information for the
      // hazard models (Z(t; S) = I(S < t) is 0 for all t <= U): normalize it
      // to absent so downstream modeling and re-serialization agree.
      if (s.screen_age.has_value() && *s.screen_age >= s.u_time) s.screen_age.reset();

      cohort.subjects.push_back(std::move(s));
    } catch (const DataError& e) {
      report(row, e.what());
      if (static_cast<int>(problems.size()) >= options.max_reported_errors) break;
    }
  }

  if (!problems.empty()) {
    std::ostringstream msg;
    msg << problems.size() << " invalid row(s) in '" << path << "':";
    for (const auto& p : problems) msg << "\n  " << p;
    throw DataError(msg.str());
  }

  cohort.validate();
  return cohort;
}

void write_cohort(const std::string& path, const Cohort& cohort) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write cohort file '" + path + "'");
  out << "id\tentry_age\tu_time\tdelta1\tdelta2\tv_time\tdelta3\tscreen_age";
  for (const auto& name : cohort.covariate_names) out << '\t' << name;
  out << '\n';
  for (const Subject& s : cohort.subjects) {
    out << s.id << '\t' << fmt_double(s.entry_age) << '\t' << fmt_double(s.u_time) << '\t'
        << (s.delta1 ? 1 : 0) << '\t' << (s.delta2 ? 1 : 0) << '\t' << fmt_double(s.v_time)
        << '\t' << (s.delta3 ? 1 : 0) << '\t'
        << (s.screen_age ? fmt_double(*s.screen_age) : "");
    for (double x : s.covariates) out << '\t' << fmt_double(x);
    out << '\n';
  }
  if (!out) throw DataError("failed writing cohort file '" + path + "'");
}

}  // namespace mscea

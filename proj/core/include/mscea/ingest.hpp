#pragma once

#include <map>
#include <string>

#include "mscea/cohort.hpp"

namespace mscea {

/// Column-name remapping: canonical name -> name used in the file.
/// Canonical columns: id, entry_age, u_time, delta1, delta2, v_time, delta3,
/// screen_age, x1..xp (covariate columns are any remaining columns).
using ColumnSchema = std::map<std::string, std::string>;

struct IngestOptions {
  char delimiter = '\0';  // '\0' = auto-detect (tab or comma) from the header
  bool fail_fast = true;  // false: collect up to max_reported_errors, then throw
  int max_reported_errors = 50;
};

/// Reads a delimiter-separated cohort file with a header row. Rows violating
/// the Subject invariants are rejected with row-numbered diagnostics. An empty
/// screen_age field means "never screened before U"; a screen_age >= u_time is
/// accepted but normalized to absent, since Z(t; S) = I(S < t) is then
/// identically zero over the observation window.
Cohort ingest_cohort(const std::string& path, const ColumnSchema& schema = {},
                     const IngestOptions& options = {});

/// Writes a cohort in the same format (tab-separated, full double precision),
/// so that ingest(write(ingest(file))) round-trips to an identical cohort.
void write_cohort(const std::string& path, const Cohort& cohort);

}  // namespace mscea

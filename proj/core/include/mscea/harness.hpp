#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mscea/cox.hpp"
#include "mscea/simgen.hpp"

namespace mscea {

/// Replication harness configuration: which estimands to track, over which
/// window, for which screening-initiation ages. Lost-years cells may use a
/// different window origin than the RMST cells.
struct HarnessConfig {
  double t = 70.0;
  double t0_rmst = 40.0;
  double t0_lost = 0.0;
  std::vector<double> s_list = {kNeverScreen, 50.0};
  int workers = 1;
  bool include_comparator = true;
  bool include_lost = true;
  SolverOptions solver;
  int truth_gh_nodes = 80;
  double truth_tol = 1e-6;
};

/// One summary cell: Mean / ESD / mean bootstrap SE / CP across replicates
/// against the generating-model truth.
struct HarnessCell {
  std::string measure;    // e.g. rmst_total, rmst_disease_free, lost_disease_path
  std::string approach;   // multistate | overall_mortality
  double s = kNeverScreen;
  double truth = 0.0;
  double mean = 0.0;
  double esd = 0.0;
  double mean_se = 0.0;
  double cp = 0.0;
};

struct HarnessReport {
  int replicates = 0;
  int n = 0;
  int bootstrap_B = 0;
  int failed_replicates = 0;
  std::vector<HarnessCell> cells;

  const HarnessCell& cell(const std::string& measure, const std::string& approach,
                          double s) const;
};

/// Generates R cohorts, fits the multi-state model (and optionally the
/// overall-mortality comparator) on each, evaluates the tracked estimands,
/// runs a B-replicate bootstrap per dataset for the standard errors, and
/// aggregates Mean / ESD / SE / CP against truth(). Replicates run in
/// parallel with per-replicate derived streams; output is deterministic in
/// (spec, R, n, B, seed).
HarnessReport run_harness(const GeneratorSpec& spec, int R, int n, int B,
                          std::uint64_t seed, const HarnessConfig& config = {});

/// Tab-separated report, one row per cell.
void write_harness_report(const std::string& path, const HarnessReport& report);

}  // namespace mscea

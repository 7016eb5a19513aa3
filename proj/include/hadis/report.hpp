#pragma once

#include <string>
#include <vector>

#include "hadis/scenario.hpp"
#include "hadis/sim.hpp"
#include "json.hpp"

namespace hadis {

OutputHeader header_for(const Scenario& s);
nlohmann::json header_json(const OutputHeader& h);

nlohmann::json summary_document(const RunSummary& s, const OutputHeader& h);
// Wall-clock data lives apart from the summary so reruns stay byte-identical.
nlohmann::json timing_document(const SimResult& r, double wall_s,
                               const OutputHeader& h);

struct RunFiles {
  std::string metrics;
  std::string summary;
  std::string audit;
  std::string timing;
};

// Writes metrics.csv, summary.json, audit.jsonl and timing.json into dir.
RunFiles write_run_outputs(const Scenario& s, const SimResult& r, double wall_s,
                           const std::string& dir);

struct CompareEntry {
  std::string label;
  RunSummary summary;
};

// Throws Error("mismatched-traces") unless all scenarios share trace and seed.
void check_comparable(const std::vector<const Scenario*>& runs);
// Aligned summary table followed by fid and violation ratios against the
// first entry. 0/0 reads as 1.
std::string format_comparison(const std::vector<CompareEntry>& entries);

struct SweepRow {
  double multiplier = 1.0;
  double fid = 0.0;
  double violation = 0.0;
};

// Throws Error("config") for a nonpositive or empty multiplier list.
std::vector<SweepRow> run_sweep(const nlohmann::json& config,
                                const std::string& base_dir,
                                const ScenarioOverrides& ov,
                                const std::vector<double>& multipliers);
std::string format_sweep(const std::vector<SweepRow>& rows);

// Field-by-field differences between two summaries; empty means equal.
std::vector<std::string> summary_diff(const RunSummary& a, const RunSummary& b);
RunSummary summary_from_json(const nlohmann::json& j);

}  // namespace hadis

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dlaser/config.hpp"

namespace dlaser {

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<int> verifier_runs;
  std::optional<std::string> strategy;
};

// Executes the scenario and writes cycles.csv, summary.json and (for the
// learning strategy) model.ckpt into the output directory. Returns a process
// exit status; failures print a diagnostic to stderr.
int cmd_run(const std::string& config_path, const RunOverrides& overrides);

// Offline pipeline: collects (or loads) training data, runs the grid search,
// writes gridsearch.csv and best.json.
int cmd_gridsearch(const std::string& config_path, const RunOverrides& overrides);

// Compares completed runs over identical seeds/cycles; the first directory is
// the baseline. Writes compare.csv and series.csv.
int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir);

// summary.json content for a finished run; a pure function of the cycle
// records plus the run identity block.
std::string summary_json(const ScenarioRun& run, const std::string& topology_path,
                         std::span<const CycleRecord> records);

// Structural validation of summary.json against the published schema
// (schema/summary.schema.json ships the same document). Throws on violation.
void validate_summary(const std::string& summary_text);
const char* summary_schema_text();

}  // namespace dlaser

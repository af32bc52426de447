#pragma once

#include <string>
#include <vector>

#include "dlaser/loop.hpp"

namespace dlaser {

// Scenario configuration file (JSON). Unknown keys anywhere are rejected.
struct ScenarioConfig {
  std::string topology_path;
  ScenarioRun run;          // topology filled from topology_path
  std::string output_dir;   // optional; CLI --out overrides
};

ScenarioConfig load_scenario_config(const std::string& path);

struct HeadLayoutPair {
  std::vector<int> class_layers;
  std::vector<int> regr_layers;
};

struct GridSpec {
  std::vector<ScalerKind> scalers;
  std::vector<int> batch_sizes;
  std::vector<double> learning_rates;
  std::vector<OptimizerKind> optimizers;
  std::vector<std::vector<int>> core_layouts;
  std::vector<HeadLayoutPair> head_layouts;  // one joint dimension
  int epochs = 200;
  int patience = 20;

  std::vector<HyperParams> expand() const;  // cartesian product
};

struct GridSearchConfig {
  std::string topology_path;
  NetworkTopology topology;
  UncertaintyProfile profile;
  std::vector<GoalSpec> goals;
  VerifierConfig verifier;
  std::uint64_t seed = 1;
  long generate_cycles = 30;     // exhaustive data-collection cycles
  long validation_cycles = 6;    // trailing cycles held out for validation
  std::string data_file;         // optional recorded dataset instead
  GridSpec grid;
  std::string output_dir;
  int threads = 1;
};

GridSearchConfig load_gridsearch_config(const std::string& path);

}  // namespace dlaser

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dlaser/domain.hpp"
#include "dlaser/metrics.hpp"
#include "dlaser/neural.hpp"
#include "dlaser/reducer.hpp"
#include "dlaser/simnet.hpp"
#include "dlaser/verify.hpp"

namespace dlaser {

enum class Strategy { DlaserPlus, ExhaustiveReference, RandomReducer };
const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

// One simulated campaign: monitor (state snapshot), analyze (verifier and, for
// the learning strategy, the model's single prediction pass), plan (reduction
// + selection), execute (apply option). Environment evolution depends only on
// the seed, so runs with different strategies pair cycle-for-cycle.
struct ScenarioRun {
  NetworkTopology topology;
  UncertaintyProfile profile;
  std::vector<GoalSpec> goals;
  Strategy strategy = Strategy::DlaserPlus;
  long training_cycles = 45;
  long learning_cycles = 100;
  std::uint64_t seed = 1;
  VerifierConfig verifier;
  ReducerConfig reducer;
  HyperParams hp;
  // Random baseline: subspace size as a fraction of the space. Set it to a
  // matched learning run's mean selected fraction for the ablation.
  double random_selected_fraction = 0.5;
  // On desk-scale topologies an omniscient oracle verifies the full space
  // each learning cycle to provide ground-truth labels for F1/rho.
  bool oracle_eval = true;
  int threads = 1;
};

struct ScenarioResult {
  std::vector<CycleRecord> records;
  std::optional<NeuralModel> model;  // learning strategy only
  std::vector<std::string> head_ids;
  double wall_seconds = 0.0;
};

ScenarioResult run_scenario(const ScenarioRun& run);

// Planner selection rule (shared with the reference strategy); see
// select_best_option in domain.hpp for the tie-breaking order.
inline int select_best(const std::map<int, QualityVector>& verified,
                       std::span<const GoalSpec> goals) {
  return select_best_option(verified, goals);
}

// Modeled learning-time constant: one multiply-accumulate costs this many
// microseconds in the hardware-independent accounting.
inline constexpr double kModeledUsPerMac = 1e-3;

}  // namespace dlaser

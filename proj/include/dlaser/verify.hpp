#pragma once

#include <cstdint>
#include <map>
#include <span>

#include "dlaser/domain.hpp"
#include "dlaser/simnet.hpp"

namespace dlaser {

// Statistical verifier: fixed-run Monte-Carlo estimation of an option's
// qualities. Durations fed to the reduction metrics use a modeled sequential
// cost (runs * us-per-run) so results are hardware independent; wall clock is
// reported separately by the callers that care.
struct VerifierConfig {
  int runs_per_option = 500;        // >= 30
  double relative_accuracy = 0.05;  // informational target; runs are fixed
  std::uint64_t base_seed = 0;
  double modeled_us_per_run = 10.0;
  int threads = 1;                  // verify_batch fan-out; 0 = library default
  SimParams sim;
};

void validate_verifier_config(const VerifierConfig& cfg);

struct VerifyResult {
  QualityVector qualities;
  double modeled_us = 0.0;
};

// Per-option seed derives from (base_seed, cycle, option_id), so results are
// reproducible and order independent.
VerifyResult verify_option(const NetworkTopology& topo, const NetworkState& state,
                           const AdaptationOption& option, const VerifierConfig& cfg);

struct BatchVerifyResult {
  std::map<int, QualityVector> results;
  double modeled_us_total = 0.0;  // sum over options even when run concurrently
};

// OpenMP fan-out over options; bit-identical to the serial reference.
BatchVerifyResult verify_batch(const NetworkTopology& topo, const NetworkState& state,
                               std::span<const AdaptationOption> options,
                               const VerifierConfig& cfg);

// Serial reference implementation kept for testing and benchmarking.
BatchVerifyResult verify_batch_serial(const NetworkTopology& topo, const NetworkState& state,
                                      std::span<const AdaptationOption> options,
                                      const VerifierConfig& cfg);

}  // namespace dlaser

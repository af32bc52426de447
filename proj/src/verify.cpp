#include "dlaser/verify.hpp"

#include <stdexcept>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dlaser/rng.hpp"

namespace dlaser {

void validate_verifier_config(const VerifierConfig& cfg) {
  if (cfg.runs_per_option < 30)
    throw std::invalid_argument("verifier: runs_per_option must be >= 30");
  if (cfg.modeled_us_per_run <= 0.0)
    throw std::invalid_argument("verifier: modeled_us_per_run must be > 0");
}

VerifyResult verify_option(const NetworkTopology& topo, const NetworkState& state,
                           const AdaptationOption& option, const VerifierConfig& cfg) {
  validate_verifier_config(cfg);
  const std::uint64_t seed =
      derive_seed(cfg.base_seed, {static_cast<std::uint64_t>(state.cycle_index),
                                  static_cast<std::uint64_t>(option.option_id)});
  VerifyResult r;
  r.qualities = ground_truth_qualities(topo, state, option, cfg.runs_per_option, seed, cfg.sim);
  r.modeled_us = cfg.runs_per_option * cfg.modeled_us_per_run;
  return r;
}

namespace {

BatchVerifyResult run_batch(const NetworkTopology& topo, const NetworkState& state,
                            std::span<const AdaptationOption> options,
                            const VerifierConfig& cfg, bool parallel) {
  validate_verifier_config(cfg);
  const long n = static_cast<long>(options.size());
  std::vector<QualityVector> out(static_cast<size_t>(n));

#ifdef _OPENMP
  if (parallel && n > 1) {
    const int threads = cfg.threads > 0 ? cfg.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads)
    for (long i = 0; i < n; ++i) {
      const std::uint64_t seed = derive_seed(
          cfg.base_seed, {static_cast<std::uint64_t>(state.cycle_index),
                          static_cast<std::uint64_t>(options[static_cast<size_t>(i)].option_id)});
      out[static_cast<size_t>(i)] = ground_truth_qualities(
          topo, state, options[static_cast<size_t>(i)], cfg.runs_per_option, seed, cfg.sim);
    }
  } else
#endif
  {
    (void)parallel;
    for (long i = 0; i < n; ++i) {
      const std::uint64_t seed = derive_seed(
          cfg.base_seed, {static_cast<std::uint64_t>(state.cycle_index),
                          static_cast<std::uint64_t>(options[static_cast<size_t>(i)].option_id)});
      out[static_cast<size_t>(i)] = ground_truth_qualities(
          topo, state, options[static_cast<size_t>(i)], cfg.runs_per_option, seed, cfg.sim);
    }
  }

  // Merge serially in input order so map contents and the modeled total are
  // independent of scheduling.
  BatchVerifyResult res;
  for (long i = 0; i < n; ++i) {
    res.results[options[static_cast<size_t>(i)].option_id] = out[static_cast<size_t>(i)];
    res.modeled_us_total += cfg.runs_per_option * cfg.modeled_us_per_run;
  }
  return res;
}

}  // namespace

BatchVerifyResult verify_batch(const NetworkTopology& topo, const NetworkState& state,
                               std::span<const AdaptationOption> options,
                               const VerifierConfig& cfg) {
  return run_batch(topo, state, options, cfg, true);
}

BatchVerifyResult verify_batch_serial(const NetworkTopology& topo, const NetworkState& state,
                                      std::span<const AdaptationOption> options,
                                      const VerifierConfig& cfg) {
  return run_batch(topo, state, options, cfg, false);
}

}  // namespace dlaser

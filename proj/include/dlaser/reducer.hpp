#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "dlaser/domain.hpp"
#include "dlaser/neural.hpp"

namespace dlaser {

struct ReducerConfig {
  double exploration_rate = 0.05;  // fraction of un-analyzed options, [0,1]
  long training_cycles = 45;       // full-analysis cycles before reduction
  std::uint64_t seed = 0;          // shuffle + exploration sampling
  int train_epochs_per_cycle = 3;  // passes over the training window per cycle
  int online_epochs = 1;           // passes over a learning cycle's samples
  int window_cycles = 10;          // sliding training window, in training cycles
  // Online updates mix the cycle's analysis results with this many window
  // samples; analysis verifies the predicted-best options, and training on
  // that biased sliver alone inverts the learned ranking over time.
  int replay_samples = 128;
};

void validate_reducer_config(const ReducerConfig& cfg);

struct ReductionOutcome {
  std::vector<int> predicted_subspace;  // option ids passing all class heads
  std::vector<int> ranked_order;        // permutation of the subspace (opt goal only)
  std::vector<int> analyzed;            // verified in order until one valid
  std::vector<int> explored;            // exploration verifications
  int selected = -1;
  bool fallback_used = false;
  double verif_modeled_us = 0.0;
};

// Model outputs of the single prediction pass, in head order (classification
// heads first, regression head last).
struct HeadPredictions {
  std::vector<std::vector<double>> class_probs;  // per classification goal, per option
  std::vector<double> regression;                // per option; empty without opt goal
};

HeadPredictions split_predictions(const std::vector<std::vector<double>>& outputs,
                                  std::span<const GoalSpec> goals);

// Verifies one option and returns (qualities, modeled cost). Implementations
// record results into Knowledge.verification_results.
using VerifyFn = std::function<std::pair<QualityVector, double>(int option_id)>;

// Stage 1: intersect the positive classes of every classification head. With
// an optimization goal present the subspace is handed to the regression
// stage; otherwise the subspace is shuffled and verified top-down until an
// option satisfies every classification goal. Exploration then samples from
// the options outside the predicted subspace. Model update (when a model is
// given) runs over every option verified this cycle plus window replay.
ReductionOutcome classification_stage(Knowledge& knowledge, const HeadPredictions& preds,
                                      const ReducerConfig& cfg, long cycle,
                                      const VerifyFn& verify, NeuralModel* model,
                                      const Matrix* raw_inputs, Matrix* window_inputs,
                                      LabelSet* window_labels);

// Stage 2: rank the stage-1 subspace by the regressed optimization quality
// (ascending for minimize) and verify in rank order; exploration samples from
// the options not verified this stage.
ReductionOutcome regression_stage(Knowledge& knowledge, const HeadPredictions& preds,
                                  std::vector<int> predicted_subspace, const ReducerConfig& cfg,
                                  long cycle, const VerifyFn& verify, NeuralModel* model,
                                  const Matrix* raw_inputs, Matrix* window_inputs,
                                  LabelSet* window_labels);

// Training cycle: verify the whole space, select the best verified option,
// append this cycle's samples to the accumulated window, refit scalers on the
// window, train on this cycle's samples.
ReductionOutcome training_cycle(Knowledge& knowledge, const ReducerConfig& cfg, long cycle,
                                const VerifyFn& verify, NeuralModel* model,
                                const Matrix* raw_inputs, Matrix* window_inputs,
                                LabelSet* window_labels);

// Least-violating analyzed option (graceful degradation).
int fallback_option(const Knowledge& knowledge);

}  // namespace dlaser

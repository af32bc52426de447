#include "dlaser/reducer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dlaser/features.hpp"
#include "dlaser/rng.hpp"

namespace dlaser {

namespace {
constexpr std::uint64_t kShuffleTag = 0x53484543;
constexpr std::uint64_t kExploreTag = 0x4558504c;
constexpr std::uint64_t kUpdateTag = 0x55504454;
constexpr std::uint64_t kReplayTag = 0x52504c59;
}  // namespace

void validate_reducer_config(const ReducerConfig& cfg) {
  if (cfg.exploration_rate < 0.0 || cfg.exploration_rate > 1.0)
    throw std::invalid_argument("reducer: exploration_rate must be in [0,1]");
  if (cfg.training_cycles < 0)
    throw std::invalid_argument("reducer: training_cycles must be >= 0");
  if (cfg.train_epochs_per_cycle < 1 || cfg.online_epochs < 1)
    throw std::invalid_argument("reducer: epochs must be >= 1");
}

HeadPredictions split_predictions(const std::vector<std::vector<double>>& outputs,
                                  std::span<const GoalSpec> goals) {
  size_t n_class = 0;
  bool has_opt = false;
  for (const GoalSpec& g : goals) {
    if (g.is_classification()) ++n_class;
    if (g.is_optimization()) has_opt = true;
  }
  if (outputs.size() != n_class + (has_opt ? 1 : 0))
    throw std::invalid_argument("split_predictions: head count mismatch");
  HeadPredictions p;
  for (size_t h = 0; h < n_class; ++h) p.class_probs.push_back(outputs[h]);
  if (has_opt) p.regression = outputs[n_class];
  return p;
}

int fallback_option(const Knowledge& knowledge) {
  return least_violating_option(knowledge.verification_results, knowledge.goals);
}

namespace {

void shuffle_ids(std::vector<int>& ids, SplitMix64& rng) {
  for (long i = static_cast<long>(ids.size()) - 1; i > 0; --i)
    std::swap(ids[static_cast<size_t>(i)], ids[static_cast<size_t>(rng.uniform_int(0, i))]);
}

std::vector<int> sample_without_replacement(std::vector<int> pool, long count, SplitMix64& rng) {
  count = std::min<long>(count, static_cast<long>(pool.size()));
  for (long i = 0; i < count; ++i) {
    const long j = rng.uniform_int(i, static_cast<long>(pool.size()) - 1);
    std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
  }
  pool.resize(static_cast<size_t>(count));
  return pool;
}

// Verify ids in order until one satisfies every classification goal.
// Results land in knowledge.verification_results.
int analyze_until_valid(Knowledge& knowledge, std::span<const int> order,
                        const VerifyFn& verify, ReductionOutcome& out) {
  for (int id : order) {
    auto [q, cost] = verify(id);
    knowledge.verification_results[id] = q;
    out.verif_modeled_us += cost;
    out.analyzed.push_back(id);
    if (satisfies_all(q, knowledge.goals)) return id;
  }
  return -1;
}

void explore_and_verify(Knowledge& knowledge, std::vector<int> pool, const ReducerConfig& cfg,
                        long cycle, const VerifyFn& verify, ReductionOutcome& out) {
  SplitMix64 rng(derive_seed(cfg.seed, {kExploreTag, static_cast<std::uint64_t>(cycle)}));
  const long count = std::llround(cfg.exploration_rate * static_cast<double>(pool.size()));
  out.explored = sample_without_replacement(std::move(pool), count, rng);
  for (int id : out.explored) {
    auto [q, cost] = verify(id);
    knowledge.verification_results[id] = q;
    out.verif_modeled_us += cost;
  }
}

void append_to_window(const Matrix& inputs, const LabelSet& labels, long cap_rows,
                      Matrix* window_inputs, LabelSet* window_labels) {
  if (window_inputs == nullptr || window_labels == nullptr) return;
  if (window_inputs->cols == 0) {
    *window_inputs = inputs;
    *window_labels = labels;
  } else {
    window_inputs->v.insert(window_inputs->v.end(), inputs.v.begin(), inputs.v.end());
    window_inputs->rows += inputs.rows;
    for (size_t h = 0; h < labels.size(); ++h)
      (*window_labels)[h].insert((*window_labels)[h].end(), labels[h].begin(),
                                 labels[h].end());
  }
  if (cap_rows > 0 && window_inputs->rows > cap_rows) {
    const long drop = window_inputs->rows - cap_rows;
    window_inputs->v.erase(window_inputs->v.begin(),
                           window_inputs->v.begin() + drop * window_inputs->cols);
    window_inputs->rows = cap_rows;
    for (auto& col : *window_labels) col.erase(col.begin(), col.begin() + drop);
  }
}

void update_model(Knowledge& knowledge, NeuralModel* model, const Matrix* raw_inputs,
                  const ReducerConfig& cfg, long cycle, Matrix* window_inputs,
                  LabelSet* window_labels) {
  if (model == nullptr || raw_inputs == nullptr || knowledge.verification_results.empty())
    return;
  std::vector<long> rows;
  std::vector<QualityVector> qualities;
  for (const auto& [id, q] : knowledge.verification_results) {
    rows.push_back(id);
    qualities.push_back(q);
  }
  Matrix inputs = raw_inputs->take_rows(rows);
  LabelSet labels = build_labels(knowledge.goals, qualities);

  const long cap = static_cast<long>(cfg.window_cycles) * raw_inputs->rows;
  append_to_window(inputs, labels, cap, window_inputs, window_labels);
  if (window_inputs != nullptr && window_inputs->rows > 0)
    model->refit_input_scaler(*window_inputs);

  if (window_inputs != nullptr && window_inputs->rows > 0 && cfg.replay_samples > 0) {
    SplitMix64 rng(derive_seed(cfg.seed, {kReplayTag, static_cast<std::uint64_t>(cycle)}));
    const long draw = std::min<long>(cfg.replay_samples, window_inputs->rows);
    for (long i = 0; i < draw; ++i) {
      const long r = rng.uniform_int(0, window_inputs->rows - 1);
      inputs.v.insert(inputs.v.end(), window_inputs->v.begin() + r * window_inputs->cols,
                      window_inputs->v.begin() + (r + 1) * window_inputs->cols);
      ++inputs.rows;
      for (size_t h = 0; h < labels.size(); ++h)
        labels[h].push_back((*window_labels)[h][static_cast<size_t>(r)]);
    }
  }
  model->update(inputs, labels, cfg.online_epochs,
                derive_seed(cfg.seed, {kUpdateTag, static_cast<std::uint64_t>(cycle)}));
}

void select_or_fallback(Knowledge& knowledge, int valid, ReductionOutcome& out) {
  if (valid >= 0) {
    out.selected = valid;
    out.fallback_used = false;
  } else if (!knowledge.verification_results.empty()) {
    out.selected = fallback_option(knowledge);
    out.fallback_used = true;
  } else {
    // Nothing verified at all (empty subspace, zero exploration): hold the
    // current configuration.
    out.selected = knowledge.current_option;
    out.fallback_used = true;
  }
}

std::vector<int> all_ids(const Knowledge& knowledge) {
  std::vector<int> ids(static_cast<size_t>(knowledge.space.size()));
  for (size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
  return ids;
}

std::vector<int> ids_minus(const std::vector<int>& universe, std::span<const int> remove) {
  std::vector<char> mark(universe.size(), 0);
  for (int id : remove)
    if (id >= 0 && static_cast<size_t>(id) < mark.size()) mark[static_cast<size_t>(id)] = 1;
  std::vector<int> out;
  out.reserve(universe.size());
  for (int id : universe)
    if (!mark[static_cast<size_t>(id)]) out.push_back(id);
  return out;
}

}  // namespace

ReductionOutcome classification_stage(Knowledge& knowledge, const HeadPredictions& preds,
                                      const ReducerConfig& cfg, long cycle,
                                      const VerifyFn& verify, NeuralModel* model,
                                      const Matrix* raw_inputs, Matrix* window_inputs,
                                      LabelSet* window_labels) {
  validate_reducer_config(cfg);
  if (knowledge.goals.empty()) throw std::invalid_argument("classification_stage: empty goal set");

  bool has_opt = false;
  size_t n_class = 0;
  for (const GoalSpec& g : knowledge.goals) {
    if (g.is_optimization()) has_opt = true;
    if (g.is_classification()) ++n_class;
  }

  const std::vector<int> universe = all_ids(knowledge);
  std::vector<int> subspace;
  if (n_class == 0) {
    subspace = universe;  // no classification goals: hand the full space over
  } else {
    for (int id : universe) {
      bool positive = true;
      for (size_t h = 0; h < n_class && positive; ++h)
        positive = preds.class_probs[h][static_cast<size_t>(id)] >= 0.5;
      if (positive) subspace.push_back(id);
    }
  }

  if (has_opt)
    return regression_stage(knowledge, preds, std::move(subspace), cfg, cycle, verify, model,
                            raw_inputs, window_inputs, window_labels);

  ReductionOutcome out;
  out.predicted_subspace = subspace;
  int valid = -1;
  if (!subspace.empty()) {
    std::vector<int> order = subspace;
    SplitMix64 rng(derive_seed(cfg.seed, {kShuffleTag, static_cast<std::uint64_t>(cycle)}));
    shuffle_ids(order, rng);
    valid = analyze_until_valid(knowledge, order, verify, out);
    select_or_fallback(knowledge, valid, out);
    explore_and_verify(knowledge, ids_minus(universe, out.predicted_subspace), cfg, cycle,
                       verify, out);
  } else {
    // Empty intersection: analyze only the exploration sample over the full
    // space, then degrade gracefully.
    explore_and_verify(knowledge, universe, cfg, cycle, verify, out);
    select_or_fallback(knowledge, -1, out);
  }
  update_model(knowledge, model, raw_inputs, cfg, cycle, window_inputs, window_labels);
  return out;
}

ReductionOutcome regression_stage(Knowledge& knowledge, const HeadPredictions& preds,
                                  std::vector<int> predicted_subspace, const ReducerConfig& cfg,
                                  long cycle, const VerifyFn& verify, NeuralModel* model,
                                  const Matrix* raw_inputs, Matrix* window_inputs,
                                  LabelSet* window_labels) {
  validate_reducer_config(cfg);
  const GoalSpec* opt = nullptr;
  for (const GoalSpec& g : knowledge.goals) {
    if (g.is_optimization()) {
      if (opt != nullptr)
        throw std::invalid_argument("regression_stage: multiple optimization goals");
      opt = &g;
    }
  }
  if (opt == nullptr)
    throw std::invalid_argument("regression_stage: no optimization goal");
  if (preds.regression.size() != static_cast<size_t>(knowledge.space.size()))
    throw std::invalid_argument("regression_stage: prediction size mismatch");

  ReductionOutcome out;
  out.predicted_subspace = predicted_subspace;
  out.ranked_order = std::move(predicted_subspace);
  const bool ascending = opt->kind == GoalKind::Minimize;
  std::stable_sort(out.ranked_order.begin(), out.ranked_order.end(), [&](int a, int b) {
    const double va = preds.regression[static_cast<size_t>(a)];
    const double vb = preds.regression[static_cast<size_t>(b)];
    if (va != vb) return ascending ? va < vb : va > vb;
    return a < b;
  });

  const std::vector<int> universe = all_ids(knowledge);
  int valid = -1;
  if (!out.ranked_order.empty()) {
    valid = analyze_until_valid(knowledge, out.ranked_order, verify, out);
    select_or_fallback(knowledge, valid, out);
    explore_and_verify(knowledge, ids_minus(universe, out.analyzed), cfg, cycle, verify, out);
  } else {
    explore_and_verify(knowledge, universe, cfg, cycle, verify, out);
    select_or_fallback(knowledge, -1, out);
  }
  update_model(knowledge, model, raw_inputs, cfg, cycle, window_inputs, window_labels);
  return out;
}

ReductionOutcome training_cycle(Knowledge& knowledge, const ReducerConfig& cfg, long cycle,
                                const VerifyFn& verify, NeuralModel* model,
                                const Matrix* raw_inputs, Matrix* window_inputs,
                                LabelSet* window_labels) {
  validate_reducer_config(cfg);
  ReductionOutcome out;
  out.predicted_subspace = all_ids(knowledge);
  for (int id : out.predicted_subspace) {
    auto [q, cost] = verify(id);
    knowledge.verification_results[id] = q;
    out.verif_modeled_us += cost;
    out.analyzed.push_back(id);
  }
  out.selected = select_best_option(knowledge.verification_results, knowledge.goals);
  out.fallback_used =
      !satisfies_all(knowledge.verification_results.at(out.selected), knowledge.goals);

  if (model != nullptr && raw_inputs != nullptr) {
    std::vector<QualityVector> qualities;
    qualities.reserve(knowledge.verification_results.size());
    for (const auto& [id, q] : knowledge.verification_results) qualities.push_back(q);
    const LabelSet labels = build_labels(knowledge.goals, qualities);

    if (window_inputs != nullptr && window_labels != nullptr) {
      const long cap = static_cast<long>(cfg.window_cycles) * raw_inputs->rows;
      append_to_window(*raw_inputs, labels, cap, window_inputs, window_labels);
      model->refit_scalers(*window_inputs, *window_labels);
      // Replaying the window instead of only the newest cycle keeps the
      // stream from washing out the within-cycle structure the ranking
      // depends on; the newest cycle's pairs are the window's tail.
      model->update(*window_inputs, *window_labels, cfg.train_epochs_per_cycle,
                    derive_seed(cfg.seed, {kUpdateTag, static_cast<std::uint64_t>(cycle)}));
    } else {
      model->refit_scalers(*raw_inputs, labels);
      model->update(*raw_inputs, labels, cfg.train_epochs_per_cycle,
                    derive_seed(cfg.seed, {kUpdateTag, static_cast<std::uint64_t>(cycle)}));
    }
  }
  return out;
}

}  // namespace dlaser

#include <doctest.h>

#include <stdexcept>
#include <algorithm>
#include <set>

#include "dlaser/reducer.hpp"
#include "dlaser/rng.hpp"
#include "dlaser/simnet.hpp"

using namespace dlaser;

namespace {

const char* kMiniTopo = R"(
gateway 1
mote 2 parent 1 power 7
mote 3 parent 1 power 7
mote 4 parent 2 power 6 parent 3 power 4
)";

GoalSpec threshold_below(Quality q, double v) {
  GoalSpec g;
  g.kind = GoalKind::ThresholdBelow;
  g.quality = q;
  g.threshold = v;
  return g;
}

GoalSpec minimize(Quality q) {
  GoalSpec g;
  g.kind = GoalKind::Minimize;
  g.quality = q;
  return g;
}

struct Harness {
  Knowledge knowledge;
  std::vector<QualityVector> truth;  // per option id
  long verify_calls = 0;

  explicit Harness(std::vector<GoalSpec> goals) {
    const NetworkTopology topo = NetworkTopology::parse(kMiniTopo);
    knowledge.space = enumerate_space(topo);
    knowledge.goals = std::move(goals);
    knowledge.current_option = 0;
    truth.resize(static_cast<size_t>(knowledge.space.size()));
  }

  VerifyFn verify() {
    return [this](int id) -> std::pair<QualityVector, double> {
      ++verify_calls;
      return {truth[static_cast<size_t>(id)], 10.0};
    };
  }

  // oracle predictions wired to the ground truth
  HeadPredictions oracle_preds() const {
    HeadPredictions p;
    for (const GoalSpec& g : knowledge.goals) {
      if (!g.is_classification()) continue;
      std::vector<double> col;
      for (const QualityVector& q : truth) col.push_back(satisfies(q, g) ? 1.0 : 0.0);
      p.class_probs.push_back(std::move(col));
    }
    for (const GoalSpec& g : knowledge.goals) {
      if (!g.is_optimization()) continue;
      for (const QualityVector& q : truth) p.regression.push_back(q.get(g.quality));
    }
    return p;
  }
};

}  // namespace

TEST_CASE("classification stage with all-positive heads keeps the whole space") {
  Harness h({threshold_below(Quality::PacketLoss, 0.5)});
  for (auto& q : h.truth) q = {0.1, 0.0, 1.0};
  ReducerConfig cfg;
  cfg.exploration_rate = 0.0;
  const auto out =
      classification_stage(h.knowledge, h.oracle_preds(), cfg, 0, h.verify(), nullptr,
                           nullptr, nullptr, nullptr);
  CHECK(out.predicted_subspace.size() == 6);
  CHECK(out.analyzed.size() == 1);  // first shuffled option already satisfies
  CHECK(!out.fallback_used);
  CHECK(satisfies_all(h.knowledge.verification_results.at(out.selected), h.knowledge.goals));
}

TEST_CASE("optimization-only goal set proceeds straight to the regression stage") {
  Harness h({minimize(Quality::Energy)});
  for (size_t i = 0; i < h.truth.size(); ++i)
    h.truth[i] = {0.0, 0.0, 10.0 + static_cast<double>(i)};
  ReducerConfig cfg;
  cfg.exploration_rate = 0.0;
  const auto out = classification_stage(h.knowledge, h.oracle_preds(), cfg, 3, h.verify(),
                                        nullptr, nullptr, nullptr, nullptr);
  CHECK(out.predicted_subspace.size() == 6);  // whole space handed over
  CHECK(out.ranked_order.size() == 6);
  CHECK(out.analyzed.size() == 1);  // satisfaction is vacuous, first ranked wins
  CHECK(out.selected == 0);         // lowest energy
}

TEST_CASE("regression stage ranks by predicted quality with id tie-breaks") {
  Harness h({threshold_below(Quality::PacketLoss, 0.5), minimize(Quality::Energy)});
  for (auto& q : h.truth) q = {0.1, 0.0, 5.0};
  HeadPredictions preds = h.oracle_preds();
  preds.regression = {3.0, 1.0, 2.0, 1.0, 9.0, 0.5};
  ReducerConfig cfg;
  cfg.exploration_rate = 0.0;
  const auto out = regression_stage(h.knowledge, preds, {0, 1, 2, 3, 4, 5}, cfg, 1, h.verify(),
                                    nullptr, nullptr, nullptr, nullptr);
  CHECK(out.ranked_order == std::vector<int>{5, 1, 3, 2, 0, 4});

  // ranking is invariant under positive scaling of the regressed values
  HeadPredictions scaled = preds;
  for (double& v : scaled.regression) v *= 17.5;
  Harness h2({threshold_below(Quality::PacketLoss, 0.5), minimize(Quality::Energy)});
  h2.truth = h.truth;
  const auto out2 = regression_stage(h2.knowledge, scaled, {0, 1, 2, 3, 4, 5}, cfg, 1,
                                     h2.verify(), nullptr, nullptr, nullptr, nullptr);
  CHECK(out2.ranked_order == out.ranked_order);
}

TEST_CASE("maximize ranks descending") {
  GoalSpec g;
  g.kind = GoalKind::Maximize;
  g.quality = Quality::Energy;
  Harness h({g});
  for (size_t i = 0; i < h.truth.size(); ++i)
    h.truth[i] = {0.0, 0.0, static_cast<double>(i)};
  ReducerConfig cfg;
  cfg.exploration_rate = 0.0;
  const auto out = classification_stage(h.knowledge, h.oracle_preds(), cfg, 0, h.verify(),
                                        nullptr, nullptr, nullptr, nullptr);
  CHECK(out.selected == 5);
}

TEST_CASE("oracle heads analyze exactly one option and select the constrained optimum") {
  Harness h({threshold_below(Quality::PacketLoss, 0.10), minimize(Quality::Energy)});
  h.truth[0] = {0.20, 0.0, 1.0};  // cheapest but violating
  h.truth[1] = {0.05, 0.0, 4.0};
  h.truth[2] = {0.05, 0.0, 3.0};  // true constrained optimum
  h.truth[3] = {0.09, 0.0, 9.0};
  h.truth[4] = {0.50, 0.0, 2.0};
  h.truth[5] = {0.05, 0.0, 8.0};
  ReducerConfig cfg;
  cfg.exploration_rate = 0.0;
  const auto out = classification_stage(h.knowledge, h.oracle_preds(), cfg, 0, h.verify(),
                                        nullptr, nullptr, nullptr, nullptr);
  CHECK(out.predicted_subspace == std::vector<int>{1, 2, 3, 5});
  CHECK(out.analyzed == std::vector<int>{2});
  CHECK(out.selected == 2);
  CHECK(out.explored.empty());
  CHECK(h.verify_calls == 1);
}

TEST_CASE("analyzed is a prefix of the ranked order") {
  Harness h({threshold_below(Quality::Latency, 0.10), minimize(Quality::Energy)});
  // top two ranked options violate, third satisfies
  h.truth[0] = {0.0, 0.50, 1.0};
  h.truth[1] = {0.0, 0.50, 2.0};
  h.truth[2] = {0.0, 0.05, 3.0};
  h.truth[3] = {0.0, 0.05, 4.0};
  h.truth[4] = {0.0, 0.05, 5.0};
  h.truth[5] = {0.0, 0.05, 6.0};
  HeadPredictions preds = h.oracle_preds();
  preds.class_probs[0].assign(6, 1.0);  // classifier admits everything
  ReducerConfig cfg;
  cfg.exploration_rate = 0.0;
  const auto out = regression_stage(h.knowledge, preds, {0, 1, 2, 3, 4, 5}, cfg, 2, h.verify(),
                                    nullptr, nullptr, nullptr, nullptr);
  CHECK(out.analyzed == std::vector<int>{0, 1, 2});
  CHECK(std::equal(out.analyzed.begin(), out.analyzed.end(), out.ranked_order.begin()));
  CHECK(out.selected == 2);
  CHECK(!out.fallback_used);
}

TEST_CASE("all options violating falls back to the least violating analyzed option") {
  Harness h({threshold_below(Quality::PacketLoss, 0.01), minimize(Quality::Energy)});
  for (size_t i = 0; i < h.truth.size(); ++i)
    h.truth[i] = {0.10 + 0.01 * static_cast<double>(i), 0.0, 1.0};
  ReducerConfig cfg;
  cfg.exploration_rate = 0.0;
  const auto out = classification_stage(h.knowledge, h.oracle_preds(), cfg, 0, h.verify(),
                                        nullptr, nullptr, nullptr, nullptr);
  // empty predicted subspace and zero exploration: hold the current option
  CHECK(out.predicted_subspace.empty());
  CHECK(out.fallback_used);
  CHECK(out.selected == h.knowledge.current_option);

  // with a subspace admitted by the heads, the walk exhausts it and degrades
  HeadPredictions preds = h.oracle_preds();
  preds.class_probs[0].assign(6, 1.0);
  Harness h2({threshold_below(Quality::PacketLoss, 0.01), minimize(Quality::Energy)});
  h2.truth = h.truth;
  const auto out2 = regression_stage(h2.knowledge, preds, {0, 1, 2, 3, 4, 5}, cfg, 0,
                                     h2.verify(), nullptr, nullptr, nullptr, nullptr);
  CHECK(out2.analyzed.size() == 6);
  CHECK(out2.fallback_used);
  CHECK(out2.selected == 0);  // least violating: lowest packet loss
}

TEST_CASE("empty predicted subspace explores from the full space") {
  Harness h({threshold_below(Quality::PacketLoss, 0.01)});
  for (auto& q : h.truth) q = {0.5, 0.0, 1.0};
  ReducerConfig cfg;
  cfg.exploration_rate = 0.5;
  const auto out = classification_stage(h.knowledge, h.oracle_preds(), cfg, 4, h.verify(),
                                        nullptr, nullptr, nullptr, nullptr);
  CHECK(out.predicted_subspace.empty());
  CHECK(out.analyzed.empty());
  CHECK(out.explored.size() == 3);  // round(0.5 * 6)
  CHECK(out.fallback_used);
  CHECK(h.knowledge.verification_results.count(out.selected) == 1);
}

TEST_CASE("exploration samples uniformly without replacement from the unselected pool") {
  Harness h({threshold_below(Quality::PacketLoss, 0.5), minimize(Quality::Energy)});
  for (size_t i = 0; i < h.truth.size(); ++i)
    h.truth[i] = {i < 3 ? 0.1 : 0.9, 0.0, static_cast<double>(i)};
  ReducerConfig cfg;
  cfg.exploration_rate = 0.67;  // pool after analysis: 6 - analyzed
  const auto out = classification_stage(h.knowledge, h.oracle_preds(), cfg, 9, h.verify(),
                                        nullptr, nullptr, nullptr, nullptr);
  // subspace {0,1,2}; first ranked (energy) analyzed and satisfies
  CHECK(out.analyzed == std::vector<int>{0});
  // stage 2 pool excludes the verified subspace, not the predicted one
  const std::set<int> explored(out.explored.begin(), out.explored.end());
  CHECK(explored.size() == out.explored.size());  // no duplicates
  CHECK(out.explored.size() == 3);                // round(0.67 * 5)
  for (int id : out.explored) CHECK(id != 0);
}

TEST_CASE("stage preconditions") {
  Harness h({threshold_below(Quality::PacketLoss, 0.5)});
  ReducerConfig cfg;
  HeadPredictions preds = h.oracle_preds();
  CHECK_THROWS_AS(regression_stage(h.knowledge, preds, {0}, cfg, 0, h.verify(), nullptr,
                                   nullptr, nullptr, nullptr),
                  std::invalid_argument);

  Knowledge empty_goals = h.knowledge;
  empty_goals.goals.clear();
  CHECK_THROWS_AS(classification_stage(empty_goals, preds, cfg, 0, h.verify(), nullptr,
                                       nullptr, nullptr, nullptr),
                  std::invalid_argument);

  ReducerConfig bad;
  bad.exploration_rate = 1.5;
  CHECK_THROWS_AS(validate_reducer_config(bad), std::invalid_argument);
}

TEST_CASE("training cycle verifies everything and selects the best") {
  Harness h({threshold_below(Quality::PacketLoss, 0.10), minimize(Quality::Energy)});
  h.truth[0] = {0.05, 0.0, 7.0};
  h.truth[1] = {0.05, 0.0, 3.0};  // best satisfying
  h.truth[2] = {0.50, 0.0, 1.0};
  h.truth[3] = {0.05, 0.0, 4.0};
  h.truth[4] = {0.05, 0.0, 9.0};
  h.truth[5] = {0.50, 0.0, 2.0};
  ReducerConfig cfg;
  const auto out =
      training_cycle(h.knowledge, cfg, 0, h.verify(), nullptr, nullptr, nullptr, nullptr);
  CHECK(out.predicted_subspace.size() == 6);
  CHECK(out.analyzed.size() == 6);
  CHECK(out.selected == 1);
  CHECK(!out.fallback_used);
  CHECK(h.verify_calls == 6);
}

TEST_CASE("selected non-fallback options always satisfy the classification goals") {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    Harness h({threshold_below(Quality::PacketLoss, 0.30), minimize(Quality::Energy)});
    for (auto& q : h.truth)
      q = {rng.uniform(), 0.0, rng.uniform(1.0, 10.0)};
    ReducerConfig cfg;
    cfg.exploration_rate = 0.2;
    cfg.seed = rng.next();
    const auto out = classification_stage(h.knowledge, h.oracle_preds(), cfg,
                                          static_cast<long>(trial), h.verify(), nullptr,
                                          nullptr, nullptr, nullptr);
    if (!out.fallback_used) {
      CHECK(satisfies_all(h.knowledge.verification_results.at(out.selected),
                          h.knowledge.goals));
      // analyzed stays within subspace, exploration within its pool
      const std::set<int> sub(out.predicted_subspace.begin(), out.predicted_subspace.end());
      for (int id : out.analyzed) CHECK(sub.count(id) == 1);
    }
  }
}

#include <doctest.h>

#include <stdexcept>
#include "dlaser/domain.hpp"
#include "dlaser/rng.hpp"

using namespace dlaser;

namespace {

GoalSpec threshold_below(Quality q, double v) {
  GoalSpec g;
  g.kind = GoalKind::ThresholdBelow;
  g.quality = q;
  g.threshold = v;
  return g;
}

GoalSpec threshold_above(Quality q, double v) {
  GoalSpec g;
  g.kind = GoalKind::ThresholdAbove;
  g.quality = q;
  g.threshold = v;
  return g;
}

GoalSpec set_point(Quality q, double v, double eps) {
  GoalSpec g;
  g.kind = GoalKind::SetPoint;
  g.quality = q;
  g.set_point = v;
  g.half_width = eps;
  return g;
}

GoalSpec minimize(Quality q) {
  GoalSpec g;
  g.kind = GoalKind::Minimize;
  g.quality = q;
  return g;
}

}  // namespace

TEST_CASE("satisfies follows the goal definitions") {
  QualityVector q;
  q.packet_loss = 0.08;
  CHECK(satisfies(q, threshold_below(Quality::PacketLoss, 0.10)));

  QualityVector e;
  e.energy = 12.9;
  CHECK(satisfies(e, set_point(Quality::Energy, 12.9, 0.1)));  // closed interval
  e.energy = 13.0;
  CHECK(satisfies(e, set_point(Quality::Energy, 12.9, 0.1)));
  e.energy = 13.0000001;
  CHECK(!satisfies(e, set_point(Quality::Energy, 12.9, 0.1)));

  QualityVector l;
  l.latency = 0.05;
  CHECK(!satisfies(l, threshold_below(Quality::Latency, 0.05)));  // strict
}

TEST_CASE("satisfies rejects optimization goals") {
  QualityVector q;
  CHECK_THROWS_AS(satisfies(q, minimize(Quality::Energy)), std::invalid_argument);
}

TEST_CASE("threshold satisfaction flips with direction except at equality") {
  SplitMix64 rng(11);
  for (int i = 0; i < 200; ++i) {
    QualityVector q;
    q.energy = rng.uniform(0.0, 20.0);
    const double g = rng.uniform(0.0, 20.0);
    const bool below = satisfies(q, threshold_below(Quality::Energy, g));
    const bool above = satisfies(q, threshold_above(Quality::Energy, g));
    if (q.energy == g) {
      CHECK(!below);
      CHECK(!above);
    } else {
      CHECK(below != above);
    }
  }
}

TEST_CASE("set-point satisfaction is symmetric around the set point") {
  SplitMix64 rng(12);
  for (int i = 0; i < 200; ++i) {
    const double gs = rng.uniform(1.0, 10.0);
    const double eps = rng.uniform(0.01, 2.0);
    const double delta = rng.uniform(0.0, eps);
    QualityVector hi, lo;
    hi.energy = gs + delta;
    lo.energy = gs - delta;
    const GoalSpec g = set_point(Quality::Energy, gs, eps);
    CHECK(satisfies(hi, g) == satisfies(lo, g));
    CHECK(satisfies(hi, g));
  }
}

TEST_CASE("satisfies_all") {
  QualityVector q;
  q.packet_loss = 0.05;
  q.latency = 0.02;
  q.energy = 12.9;

  std::vector<GoalSpec> goals{threshold_below(Quality::PacketLoss, 0.10),
                              threshold_below(Quality::Latency, 0.05),
                              minimize(Quality::Energy)};
  CHECK(satisfies_all(q, goals));

  goals[0].threshold = 0.01;
  CHECK(!satisfies_all(q, goals));

  const std::vector<GoalSpec> only_opt{minimize(Quality::Energy)};
  CHECK(satisfies_all(q, only_opt));  // vacuous conjunction

  CHECK_THROWS_AS(satisfies_all(q, std::vector<GoalSpec>{}), std::invalid_argument);
}

TEST_CASE("satisfies_all is monotone under goal removal") {
  SplitMix64 rng(13);
  for (int i = 0; i < 100; ++i) {
    QualityVector q;
    q.packet_loss = rng.uniform();
    q.latency = rng.uniform();
    q.energy = rng.uniform(0.0, 30.0);
    std::vector<GoalSpec> goals{threshold_below(Quality::PacketLoss, rng.uniform()),
                                threshold_above(Quality::Latency, rng.uniform()),
                                set_point(Quality::Energy, rng.uniform(0.0, 30.0), 2.0)};
    if (!satisfies_all(q, goals)) continue;
    for (size_t drop = 0; drop < goals.size(); ++drop) {
      std::vector<GoalSpec> fewer;
      for (size_t g = 0; g < goals.size(); ++g)
        if (g != drop) fewer.push_back(goals[g]);
      CHECK(satisfies_all(q, fewer));
    }
  }
}

TEST_CASE("goal set validation and ids") {
  std::vector<GoalSpec> two_opt{minimize(Quality::Energy), minimize(Quality::PacketLoss)};
  CHECK_THROWS_AS(validate_goal_set(two_opt), std::invalid_argument);

  std::vector<GoalSpec> bad_eps{set_point(Quality::Energy, 10.0, 0.0)};
  CHECK_THROWS_AS(validate_goal_set(bad_eps), std::invalid_argument);

  std::vector<GoalSpec> ok{threshold_below(Quality::PacketLoss, 0.1),
                           set_point(Quality::Energy, 10.0, 1.0), minimize(Quality::Latency)};
  CHECK_NOTHROW(validate_goal_set(ok));
  CHECK(goal_ids(ok) == std::vector<std::string>{"t1", "s1", "o1"});
}

TEST_CASE("select_best_option picks the optimization optimum among satisfiers") {
  std::vector<GoalSpec> goals{threshold_below(Quality::PacketLoss, 0.10),
                              minimize(Quality::Energy)};
  std::map<int, QualityVector> verified;
  verified[3] = {0.05, 0.0, 12.8};
  verified[7] = {0.08, 0.0, 12.6};
  verified[9] = {0.20, 0.0, 1.0};  // violates the threshold
  CHECK(select_best_option(verified, goals) == 7);

  std::map<int, QualityVector> one;
  one[4] = {0.05, 0.0, 5.0};
  CHECK(select_best_option(one, goals) == 4);
}

TEST_CASE("select_best_option uses set-point distance without an optimization goal") {
  std::vector<GoalSpec> goals{threshold_below(Quality::PacketLoss, 0.50),
                              set_point(Quality::Energy, 13.0, 0.2)};
  std::map<int, QualityVector> verified;
  verified[1] = {0.1, 0.0, 13.09};
  verified[2] = {0.1, 0.0, 12.96};  // |13.0 - 12.96| = 0.04, closest
  CHECK(select_best_option(verified, goals) == 2);
}

TEST_CASE("least_violating_option orders by count then magnitude") {
  std::vector<GoalSpec> goals{threshold_below(Quality::PacketLoss, 0.10),
                              threshold_below(Quality::Latency, 0.10)};
  std::map<int, QualityVector> verified;
  verified[1] = {0.15, 0.15, 0.0};  // two violations
  verified[2] = {0.15, 0.05, 0.0};  // one violation
  CHECK(least_violating_option(verified, goals) == 2);

  std::map<int, QualityVector> magnitudes;
  magnitudes[5] = {0.12, 0.05, 0.0};  // violation 0.02
  magnitudes[6] = {0.15, 0.05, 0.0};  // violation 0.05
  CHECK(least_violating_option(magnitudes, goals) == 5);

  std::map<int, QualityVector> single;
  single[8] = {0.9, 0.9, 1.0};
  CHECK(least_violating_option(single, goals) == 8);
}

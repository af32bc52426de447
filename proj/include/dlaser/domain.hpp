#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace dlaser {

// The three quality dimensions are a fixed enumeration: the neural input and
// head layout depend on a static quality vector shape.
enum class Quality { PacketLoss, Latency, Energy };

const char* quality_name(Quality q);
Quality quality_from_name(const std::string& name);

struct QualityVector {
  double packet_loss = 0.0;  // fraction in [0,1]
  double latency = 0.0;      // fraction in [0,1]
  double energy = 0.0;       // coulomb-equivalent, >= 0

  double get(Quality q) const;
  bool valid() const;  // ranges + finiteness
};

enum class GoalKind { ThresholdBelow, ThresholdAbove, SetPoint, Minimize, Maximize };

const char* goal_kind_name(GoalKind k);
GoalKind goal_kind_from_name(const std::string& name);

struct GoalSpec {
  GoalKind kind = GoalKind::ThresholdBelow;
  Quality quality = Quality::PacketLoss;
  double threshold = 0.0;   // threshold kinds
  double set_point = 0.0;   // set-point kind
  double half_width = 0.0;  // set-point kind, > 0

  bool is_classification() const {
    return kind == GoalKind::ThresholdBelow || kind == GoalKind::ThresholdAbove ||
           kind == GoalKind::SetPoint;
  }
  bool is_optimization() const {
    return kind == GoalKind::Minimize || kind == GoalKind::Maximize;
  }
};

// Throws std::invalid_argument on a malformed goal set (set-point with
// half_width <= 0, non-finite bounds, more than one optimization goal).
void validate_goal_set(std::span<const GoalSpec> goals);

// Short stable ids by kind and order of appearance: t1, t2, ..., s1, ..., o1.
std::vector<std::string> goal_ids(std::span<const GoalSpec> goals);

// Thresholds are strict, the set-point interval is closed. Optimization goals
// have no per-option satisfaction predicate; passing one throws.
bool satisfies(const QualityVector& q, const GoalSpec& goal);

// Conjunction over the classification goals; optimization goals are skipped.
// Empty goal list throws (precondition).
bool satisfies_all(const QualityVector& q, std::span<const GoalSpec> goals);

// One configuration of the system: for every dual-parent mote, the percentage
// pair (to first parent, to second parent). Pairs sum to 100 and use steps of
// 20. option_id is the canonical identity within a space.
struct AdaptationOption {
  int option_id = -1;
  std::vector<std::pair<int, int>> distribution;
};

struct AdaptationSpace {
  std::vector<AdaptationOption> options;

  long size() const { return static_cast<long>(options.size()); }
  const AdaptationOption& by_id(int id) const;
};

// Selection rules shared by the planner and the training cycles: among the
// options whose verified qualities satisfy all classification goals, pick the
// optimization-optimal one; with no optimization goal, the one closest to the
// set-points; with neither, the lowest option id. When nothing satisfies,
// falls back to the least-violating option.
int select_best_option(const std::map<int, QualityVector>& verified,
                       std::span<const GoalSpec> goals);

// Least-violating analyzed option: lexicographic on (number of violated
// classification goals, summed normalized violation magnitude), ties broken
// by lowest option id.
int least_violating_option(const std::map<int, QualityVector>& verified,
                           std::span<const GoalSpec> goals);

struct UncertaintySnapshot {
  std::vector<double> link_snr;  // dB, canonical link order
  std::vector<int> mote_load;    // messages per mote per cycle
};

class NeuralModel;  // neural module

// Shared knowledge of the feedback loop. Mutated only by the loop itself;
// everything else reads snapshots.
struct Knowledge {
  AdaptationSpace space;
  std::vector<GoalSpec> goals;
  int current_option = 0;
  UncertaintySnapshot snapshot;
  std::map<int, QualityVector> verification_results;  // this cycle
  NeuralModel* model = nullptr;
};

}  // namespace dlaser

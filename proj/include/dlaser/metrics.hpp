#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dlaser/domain.hpp"

namespace dlaser {

// Per-cycle ledger entry produced by the feedback loop. Confusion counts and
// the per-cycle rank correlation are stored instead of raw per-option
// prediction vectors; every aggregate metric below is derivable from them.
struct HeadCycleStats {
  long tp = 0, fp = 0, fn = 0, tn = 0;      // classification heads
  std::optional<double> rho;                 // regression head, per cycle
};

struct CycleRecord {
  long cycle = 0;
  bool training_phase = false;
  long total = 0;      // adaptation space size
  long selected = 0;   // options selected by learning (predicted subspace)
  long analyzed = 0;   // options verified from the subspace until one valid
  long explored = 0;   // exploration verifications (kept out of `analyzed`)
  bool fallback_used = false;
  int selected_option = -1;
  QualityVector selected_q;
  double verif_modeled_us = 0.0;       // modeled cost of this cycle's verification
  double full_verif_modeled_us = 0.0;  // modeled cost to verify the whole space
  double learn_modeled_us = 0.0;       // prediction + update modeled cost
  std::vector<HeadCycleStats> heads;   // aligned with the run's head order
};

// F1 = 2 pr·rc / (pr+rc); 0 when precision+recall is 0.
double f1_score(std::span<const int> predicted, std::span<const int> truth);
double f1_from_counts(long tp, long fp, long fn);

// Rank both sequences (average ranks on ties), then the Pearson-form formula
// on the ranks. All-tied input has no defined rank correlation -> nullopt.
std::optional<double> spearman_rho(std::span<const double> x, std::span<const double> y);

// Aggregate-ratio reductions over the learning-phase records (percent).
double aasr(std::span<const CycleRecord> records);
std::optional<double> aaer(std::span<const CycleRecord> records);
double total_reduction(std::span<const CycleRecord> records);
double compose_total_reduction(double aasr_pct, double aaer_pct);

// Per-cycle macro means, reported alongside the aggregate ratios.
double aasr_macro(std::span<const CycleRecord> records);
std::optional<double> aaer_macro(std::span<const CycleRecord> records);

struct QualitySummary {
  double median_packet_loss = 0.0, median_latency = 0.0, median_energy = 0.0;
  double baseline_median_packet_loss = 0.0, baseline_median_latency = 0.0,
         baseline_median_energy = 0.0;
  double delta_packet_loss = 0.0, delta_latency = 0.0, delta_energy = 0.0;
  std::vector<double> goal_satisfaction;           // per classification goal, this run
  std::vector<double> baseline_goal_satisfaction;  // same, baseline run
};

// Paired comparison of two runs over their learning cycles (same cycle count
// required; the loop guarantees same seeds produce the same environment).
QualitySummary quality_summary(std::span<const CycleRecord> records,
                               std::span<const CycleRecord> baseline,
                               std::span<const GoalSpec> goals);

// 100 * (1 - (learning + reduced verification) / full verification), summed
// over learning cycles; baseline records supply the full verification cost.
double time_reduction(std::span<const CycleRecord> records,
                      std::span<const CycleRecord> baseline);

// Pooled confusion + macro rho per head over learning cycles.
struct HeadAggregate {
  std::string goal_id;
  bool classification = true;
  long tp = 0, fp = 0, fn = 0, tn = 0;
  double f1 = 0.0;                  // classification heads
  std::optional<double> rho_macro;  // regression head
};

std::vector<HeadAggregate> aggregate_heads(std::span<const CycleRecord> records,
                                           std::span<const GoalSpec> goals);

// cycles.csv round trip. Head columns are named from the goal ids; doubles
// are written in shortest round-trip form so identical runs produce identical
// bytes.
void write_cycles_csv(const std::string& path, std::span<const CycleRecord> records,
                      std::span<const GoalSpec> goals);
std::vector<CycleRecord> read_cycles_csv(const std::string& path,
                                         std::span<const GoalSpec> goals);

std::string format_double(double x);  // shortest round-trip decimal

}  // namespace dlaser

#include "dlaser/domain.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace dlaser {

const char* quality_name(Quality q) {
  switch (q) {
    case Quality::PacketLoss: return "packet_loss";
    case Quality::Latency: return "latency";
    case Quality::Energy: return "energy";
  }
  return "?";
}

Quality quality_from_name(const std::string& name) {
  if (name == "packet_loss") return Quality::PacketLoss;
  if (name == "latency") return Quality::Latency;
  if (name == "energy") return Quality::Energy;
  throw std::invalid_argument("unknown quality: " + name);
}

const char* goal_kind_name(GoalKind k) {
  switch (k) {
    case GoalKind::ThresholdBelow: return "threshold_below";
    case GoalKind::ThresholdAbove: return "threshold_above";
    case GoalKind::SetPoint: return "set_point";
    case GoalKind::Minimize: return "minimize";
    case GoalKind::Maximize: return "maximize";
  }
  return "?";
}

GoalKind goal_kind_from_name(const std::string& name) {
  if (name == "threshold_below") return GoalKind::ThresholdBelow;
  if (name == "threshold_above") return GoalKind::ThresholdAbove;
  if (name == "set_point") return GoalKind::SetPoint;
  if (name == "minimize") return GoalKind::Minimize;
  if (name == "maximize") return GoalKind::Maximize;
  throw std::invalid_argument("unknown goal kind: " + name);
}

double QualityVector::get(Quality q) const {
  switch (q) {
    case Quality::PacketLoss: return packet_loss;
    case Quality::Latency: return latency;
    case Quality::Energy: return energy;
  }
  return 0.0;
}

bool QualityVector::valid() const {
  if (!std::isfinite(packet_loss) || !std::isfinite(latency) || !std::isfinite(energy))
    return false;
  return packet_loss >= 0.0 && packet_loss <= 1.0 && latency >= 0.0 && latency <= 1.0 &&
         energy >= 0.0;
}

void validate_goal_set(std::span<const GoalSpec> goals) {
  int optimization = 0;
  for (const GoalSpec& g : goals) {
    switch (g.kind) {
      case GoalKind::ThresholdBelow:
      case GoalKind::ThresholdAbove:
        if (!std::isfinite(g.threshold))
          throw std::invalid_argument("threshold goal needs a finite threshold");
        break;
      case GoalKind::SetPoint:
        if (!std::isfinite(g.set_point) || !(g.half_width > 0.0))
          throw std::invalid_argument("set-point goal needs finite set_point and epsilon > 0");
        break;
      case GoalKind::Minimize:
      case GoalKind::Maximize:
        ++optimization;
        break;
    }
  }
  if (optimization > 1)
    throw std::invalid_argument("at most one optimization goal per goal set");
}

std::vector<std::string> goal_ids(std::span<const GoalSpec> goals) {
  std::vector<std::string> ids;
  int t = 0, s = 0, o = 0;
  for (const GoalSpec& g : goals) {
    switch (g.kind) {
      case GoalKind::ThresholdBelow:
      case GoalKind::ThresholdAbove:
        ids.push_back("t" + std::to_string(++t));
        break;
      case GoalKind::SetPoint:
        ids.push_back("s" + std::to_string(++s));
        break;
      default:
        ids.push_back("o" + std::to_string(++o));
        break;
    }
  }
  return ids;
}

bool satisfies(const QualityVector& q, const GoalSpec& goal) {
  const double v = q.get(goal.quality);
  switch (goal.kind) {
    case GoalKind::ThresholdBelow: return v < goal.threshold;
    case GoalKind::ThresholdAbove: return v > goal.threshold;
    case GoalKind::SetPoint:
      return v >= goal.set_point - goal.half_width && v <= goal.set_point + goal.half_width;
    case GoalKind::Minimize:
    case GoalKind::Maximize:
      throw std::invalid_argument("optimization goals have no satisfaction predicate");
  }
  return false;
}

bool satisfies_all(const QualityVector& q, std::span<const GoalSpec> goals) {
  if (goals.empty()) throw std::invalid_argument("satisfies_all: empty goal set");
  for (const GoalSpec& g : goals) {
    if (g.is_optimization()) continue;
    if (!satisfies(q, g)) return false;
  }
  return true;
}

const AdaptationOption& AdaptationSpace::by_id(int id) const {
  if (id < 0 || id >= size() || options[static_cast<size_t>(id)].option_id != id)
    throw std::out_of_range("option_id not in space: " + std::to_string(id));
  return options[static_cast<size_t>(id)];
}

namespace {

// Normalized per-goal violation; 0 when satisfied.
double violation(const QualityVector& q, const GoalSpec& g) {
  const double v = q.get(g.quality);
  switch (g.kind) {
    case GoalKind::ThresholdBelow:
      return v < g.threshold ? 0.0 : (v - g.threshold) / std::max(std::abs(g.threshold), 1e-9);
    case GoalKind::ThresholdAbove:
      return v > g.threshold ? 0.0 : (g.threshold - v) / std::max(std::abs(g.threshold), 1e-9);
    case GoalKind::SetPoint: {
      const double d = std::abs(v - g.set_point);
      return d <= g.half_width ? 0.0 : (d - g.half_width) / std::max(g.half_width, 1e-9);
    }
    default:
      return 0.0;
  }
}

}  // namespace

int least_violating_option(const std::map<int, QualityVector>& verified,
                           std::span<const GoalSpec> goals) {
  if (verified.empty())
    throw std::invalid_argument("least_violating_option: nothing analyzed");
  int best_id = -1;
  int best_count = std::numeric_limits<int>::max();
  double best_sum = std::numeric_limits<double>::infinity();
  for (const auto& [id, q] : verified) {
    int count = 0;
    double sum = 0.0;
    for (const GoalSpec& g : goals) {
      if (g.is_optimization()) continue;
      const double viol = violation(q, g);
      if (viol > 0.0) {
        ++count;
        sum += viol;
      }
    }
    if (count < best_count || (count == best_count && sum < best_sum)) {
      best_count = count;
      best_sum = sum;
      best_id = id;
    }
  }
  return best_id;
}

int select_best_option(const std::map<int, QualityVector>& verified,
                       std::span<const GoalSpec> goals) {
  if (verified.empty()) throw std::invalid_argument("select_best_option: empty map");

  const GoalSpec* opt = nullptr;
  bool any_set_point = false;
  for (const GoalSpec& g : goals) {
    if (g.is_optimization()) opt = &g;
    if (g.kind == GoalKind::SetPoint) any_set_point = true;
  }

  int best_id = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& [id, q] : verified) {
    if (!satisfies_all(q, goals)) continue;
    double score = 0.0;  // lower is better; map order breaks ties by lowest id
    if (opt != nullptr) {
      const double v = q.get(opt->quality);
      score = opt->kind == GoalKind::Minimize ? v : -v;
    } else if (any_set_point) {
      for (const GoalSpec& g : goals)
        if (g.kind == GoalKind::SetPoint)
          score += std::abs(q.get(g.quality) - g.set_point) / std::max(g.half_width, 1e-9);
    }
    if (best_id < 0 || score < best_score) {
      best_id = id;
      best_score = score;
    }
  }
  if (best_id >= 0) return best_id;
  return least_violating_option(verified, goals);
}

}  // namespace dlaser

#include "dlaser/features.hpp"

#include <stdexcept>

namespace dlaser {

InputLayout input_layout(const NetworkTopology& topo) {
  InputLayout l;
  l.links = topo.link_count();
  l.motes = topo.mote_count();
  l.dual = static_cast<long>(topo.dual_parent_motes.size());
  return l;
}

void fill_input_row(const NetworkTopology& topo, const NetworkState& state,
                    const AdaptationOption& option, const AdaptationOption& current,
                    std::span<double> row) {
  const InputLayout l = input_layout(topo);
  if (static_cast<long>(row.size()) != l.width())
    throw std::invalid_argument("input row width mismatch");
  size_t at = 0;
  for (const Link& link : topo.links) row[at++] = static_cast<double>(link.power);
  for (const auto& [a, b] : option.distribution) {
    row[at++] = a / 100.0;
    row[at++] = b / 100.0;
  }
  for (int load : state.mote_load) row[at++] = static_cast<double>(load);
  for (double snr : state.link_snr) row[at++] = snr;
  for (const auto& [a, b] : current.distribution) {
    row[at++] = a / 100.0;
    row[at++] = b / 100.0;
  }
}

Matrix build_inputs(const NetworkTopology& topo, const NetworkState& state,
                    const AdaptationSpace& space, int current_option_id) {
  const InputLayout l = input_layout(topo);
  Matrix m(space.size(), l.width());
  const AdaptationOption& current = space.by_id(current_option_id);
  for (long i = 0; i < space.size(); ++i)
    fill_input_row(topo, state, space.options[static_cast<size_t>(i)], current, m.row(i));
  return m;
}

std::vector<HeadKindSpec> head_specs(std::span<const GoalSpec> goals) {
  validate_goal_set(goals);
  const std::vector<std::string> ids = goal_ids(goals);
  std::vector<HeadKindSpec> specs;
  for (size_t g = 0; g < goals.size(); ++g)
    if (goals[g].is_classification()) specs.push_back({ids[g], true});
  for (size_t g = 0; g < goals.size(); ++g)
    if (goals[g].is_optimization()) specs.push_back({ids[g], false});
  return specs;
}

LabelSet build_labels(std::span<const GoalSpec> goals,
                      std::span<const QualityVector> qualities) {
  LabelSet labels;
  for (const GoalSpec& g : goals) {
    if (!g.is_classification()) continue;
    std::vector<double> col(qualities.size());
    for (size_t i = 0; i < qualities.size(); ++i)
      col[i] = satisfies(qualities[i], g) ? 1.0 : 0.0;
    labels.push_back(std::move(col));
  }
  for (const GoalSpec& g : goals) {
    if (!g.is_optimization()) continue;
    std::vector<double> col(qualities.size());
    for (size_t i = 0; i < qualities.size(); ++i) col[i] = qualities[i].get(g.quality);
    labels.push_back(std::move(col));
  }
  return labels;
}

}  // namespace dlaser

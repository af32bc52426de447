#pragma once

#include "dlaser/domain.hpp"
#include "dlaser/neural.hpp"
#include "dlaser/simnet.hpp"

namespace dlaser {

// Flat input vector per adaptation option, fixed layout for a topology:
//   [0│L)        per-link power settings (canonical link order)
//   [L│L+2k)     option distribution factors, two per dual-parent mote
//                (fractions, ascending mote id)
//   [..│+M)      per-mote traffic load (file order)
//   [..│+L)      per-link SNR
//   [..│+2k)     current configuration's distribution factors
// Width = 2L + M + 4k.
struct InputLayout {
  long links = 0;
  long motes = 0;
  long dual = 0;
  long width() const { return 2 * links + motes + 4 * dual; }
};

InputLayout input_layout(const NetworkTopology& topo);

void fill_input_row(const NetworkTopology& topo, const NetworkState& state,
                    const AdaptationOption& option, const AdaptationOption& current,
                    std::span<double> row);

// One row per option of the space, aligned with option ids.
Matrix build_inputs(const NetworkTopology& topo, const NetworkState& state,
                    const AdaptationSpace& space, int current_option_id);

// Head construction order: classification goals in goal order, then the
// optimization head (if any) last.
std::vector<HeadKindSpec> head_specs(std::span<const GoalSpec> goals);

// Label vectors in head order for verified options: {0,1} from satisfies()
// for classification heads, the raw quality for the regression head.
LabelSet build_labels(std::span<const GoalSpec> goals,
                      std::span<const QualityVector> qualities);

}  // namespace dlaser

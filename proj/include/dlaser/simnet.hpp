#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlaser/domain.hpp"

namespace dlaser {

// Ground-truth environment: a DeltaIoT-style multi-hop network. Motes relay
// packets toward a single gateway over a DAG; dual-parent motes split traffic
// according to the active adaptation option.

struct MoteSpec {
  int id = 0;
  std::vector<int> parents;  // 1 or 2 entries
  std::vector<int> power;    // per outgoing link, 1..15
};

struct Link {
  int from = 0;
  int to = 0;
  int power = 0;
};

class NetworkTopology {
 public:
  int gateway_id = 0;
  std::vector<MoteSpec> motes;       // file order
  std::vector<int> dual_parent_motes;  // ascending mote id
  std::vector<Link> links;           // canonical order: motes ascending, parents in order

  static NetworkTopology load(const std::string& path);
  static NetworkTopology parse(const std::string& text);

  // DAG rooted at the gateway, every mote reaches it, power in 1..15.
  void validate() const;

  long mote_count() const { return static_cast<long>(motes.size()); }
  long link_count() const { return static_cast<long>(links.size()); }
  int mote_index(int mote_id) const;           // -1 if unknown
  int link_index(int from, int to) const;      // -1 if unknown
  const MoteSpec& mote(int mote_id) const;

  // Hop distance ordering: deepest motes first, so packets forwarded this
  // cycle can continue toward the gateway within the same cycle.
  std::vector<int> processing_order() const;   // mote ids
  int depth(int mote_id) const;

 private:
  void build_index();
  std::vector<int> id_to_index_;
  int min_id_ = 0;
};

// All legal pairs for a dual-parent mote, ascending by first component.
inline constexpr std::pair<int, int> kDistributionPairs[6] = {
    {0, 100}, {20, 80}, {40, 60}, {60, 40}, {80, 20}, {100, 0}};

// Full adaptation space: mixed-radix enumeration over dual-parent motes
// (ascending mote id, last mote varies fastest); option_id 0..6^k-1.
AdaptationSpace enumerate_space(const NetworkTopology& topo);

// Throws if the option does not match the topology's dual-parent structure
// or a pair is not one of the six legal values.
void validate_option(const NetworkTopology& topo, const AdaptationOption& option);

struct UncertaintyProfile {
  int load_min = 0;
  int load_max = 10;          // messages per mote per cycle
  double snr_min = -40.0;     // dB
  double snr_max = 15.0;
  double snr_walk_step = 2.0;  // max |step| per cycle per link
  int load_walk_step = 1;      // max |step| per cycle per mote
  // Initial link SNR maps the link's power setting (1..15) onto
  // [snr_init_min, snr_init_max] plus uniform jitter: power settings are
  // chosen to keep links healthy, so initial health follows power.
  double snr_init_min = -12.0;
  double snr_init_max = 15.0;
  double snr_init_jitter = 2.0;
  int load_init_min = 0;
  int load_init_max = 10;
  std::uint64_t rng_seed = 0;
};

struct NetworkState {
  long cycle_index = 0;
  std::vector<double> link_snr;   // canonical link order
  std::vector<int> mote_load;     // mote file order
  std::vector<int> buffer;        // cycle-start backlog per mote, >= 0
};

NetworkState initial_state(const NetworkTopology& topo, const UncertaintyProfile& profile);

// Bounded random-walk step on every link SNR and mote load, clamped to the
// profile ranges; deterministic given (state, profile seed, cycle index).
NetworkState advance_cycle(const NetworkState& state, const UncertaintyProfile& profile);

struct SimParams {
  int slot_capacity = 10;       // packets a mote may forward per cycle
  double tx_base_cost = 1.0;    // energy per transmission
  double tx_power_cost = 0.1;   // plus power_setting * this
};

// Surrogate loss curve: lossless at SNR >= 0, linear in dB down to certain
// loss at -40 dB. Documented as replaceable.
double link_loss_probability(double snr_db);

struct RoutingTable {
  // Per mote (file order): outgoing link indices and probability of the first.
  struct Entry {
    int link0 = -1;
    int link1 = -1;       // -1 for single-parent motes
    double prob0 = 1.0;
  };
  std::vector<Entry> entries;
};

// Pure mapping of distribution percentages onto forwarding probabilities.
RoutingTable apply_option(const NetworkTopology& topo, const AdaptationOption& option);

// Monte-Carlo estimate over `runs` packet-level simulations of one cycle.
// Deterministic given (topology, state, option, runs, seed, params). Each
// packet consumes an RNG substream derived from (seed, run, origin, index),
// so per-mote traffic contributions are independent.
QualityVector ground_truth_qualities(const NetworkTopology& topo, const NetworkState& state,
                                     const AdaptationOption& option, int runs,
                                     std::uint64_t seed, const SimParams& params = {});

}  // namespace dlaser

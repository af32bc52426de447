#include "dlaser/simnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>

#include "dlaser/rng.hpp"

namespace dlaser {

NetworkTopology NetworkTopology::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open topology file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

NetworkTopology NetworkTopology::parse(const std::string& text) {
  NetworkTopology topo;
  bool have_gateway = false;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    if (tok == "gateway") {
      if (!(ls >> topo.gateway_id))
        throw std::runtime_error("topology line " + std::to_string(lineno) + ": bad gateway");
      have_gateway = true;
    } else if (tok == "mote") {
      MoteSpec m;
      if (!(ls >> m.id))
        throw std::runtime_error("topology line " + std::to_string(lineno) + ": bad mote id");
      std::string kw;
      while (ls >> kw) {
        int parent = 0, power = 0;
        if (kw != "parent" || !(ls >> parent))
          throw std::runtime_error("topology line " + std::to_string(lineno) +
                                   ": expected 'parent <id> power <p>'");
        if (!(ls >> kw) || kw != "power" || !(ls >> power))
          throw std::runtime_error("topology line " + std::to_string(lineno) +
                                   ": expected 'power <p>' after parent");
        m.parents.push_back(parent);
        m.power.push_back(power);
      }
      topo.motes.push_back(std::move(m));
    } else {
      throw std::runtime_error("topology line " + std::to_string(lineno) +
                               ": unknown directive '" + tok + "'");
    }
  }
  if (!have_gateway) throw std::runtime_error("topology: missing gateway line");
  topo.build_index();
  for (const MoteSpec& m : topo.motes)
    if (m.parents.size() == 2) topo.dual_parent_motes.push_back(m.id);
  std::sort(topo.dual_parent_motes.begin(), topo.dual_parent_motes.end());
  for (const MoteSpec& m : topo.motes)
    for (size_t i = 0; i < m.parents.size(); ++i)
      topo.links.push_back(Link{m.id, m.parents[i], m.power[i]});
  topo.validate();
  return topo;
}

void NetworkTopology::build_index() {
  int lo = gateway_id, hi = gateway_id;
  for (const MoteSpec& m : motes) {
    lo = std::min(lo, m.id);
    hi = std::max(hi, m.id);
  }
  min_id_ = lo;
  id_to_index_.assign(static_cast<size_t>(hi - lo + 1), -1);
  for (size_t i = 0; i < motes.size(); ++i) {
    const int slot = motes[i].id - min_id_;
    if (id_to_index_[static_cast<size_t>(slot)] != -1)
      throw std::runtime_error("topology: duplicate mote id " + std::to_string(motes[i].id));
    id_to_index_[static_cast<size_t>(slot)] = static_cast<int>(i);
  }
}

int NetworkTopology::mote_index(int mote_id) const {
  const int slot = mote_id - min_id_;
  if (slot < 0 || slot >= static_cast<int>(id_to_index_.size())) return -1;
  return id_to_index_[static_cast<size_t>(slot)];
}

const MoteSpec& NetworkTopology::mote(int mote_id) const {
  const int idx = mote_index(mote_id);
  if (idx < 0) throw std::out_of_range("unknown mote id " + std::to_string(mote_id));
  return motes[static_cast<size_t>(idx)];
}

int NetworkTopology::link_index(int from, int to) const {
  for (size_t i = 0; i < links.size(); ++i)
    if (links[i].from == from && links[i].to == to) return static_cast<int>(i);
  return -1;
}

int NetworkTopology::depth(int mote_id) const {
  if (mote_id == gateway_id) return 0;
  const MoteSpec& m = mote(mote_id);
  int d = 0;
  for (int p : m.parents) d = std::max(d, depth(p) + 1);
  return d;
}

void NetworkTopology::validate() const {
  for (const MoteSpec& m : motes) {
    if (m.id == gateway_id) throw std::runtime_error("topology: gateway listed as mote");
    if (m.parents.empty() || m.parents.size() > 2)
      throw std::runtime_error("topology: mote " + std::to_string(m.id) +
                               " must have 1 or 2 parents");
    for (int p : m.power)
      if (p < 1 || p > 15)
        throw std::runtime_error("topology: power setting out of 1..15 on mote " +
                                 std::to_string(m.id));
    for (int p : m.parents)
      if (p != gateway_id && mote_index(p) < 0)
        throw std::runtime_error("topology: mote " + std::to_string(m.id) +
                                 " has unknown parent " + std::to_string(p));
  }
  // Reachability + acyclicity via DFS with visitation states.
  enum { kFresh, kActive, kDone };
  std::vector<int> mark(motes.size(), kFresh);
  std::function<void(int)> visit = [&](int mote_id) {
    const int idx = mote_index(mote_id);
    if (idx < 0) return;  // gateway
    int& st = mark[static_cast<size_t>(idx)];
    if (st == kActive) throw std::runtime_error("topology: cycle through mote " +
                                                std::to_string(mote_id));
    if (st == kDone) return;
    st = kActive;
    for (int p : motes[static_cast<size_t>(idx)].parents) visit(p);
    st = kDone;
  };
  for (const MoteSpec& m : motes) visit(m.id);
  for (const MoteSpec& m : motes)
    (void)depth(m.id);  // throws on malformed parent chains
}

std::vector<int> NetworkTopology::processing_order() const {
  std::vector<int> ids;
  ids.reserve(motes.size());
  for (const MoteSpec& m : motes) ids.push_back(m.id);
  std::sort(ids.begin(), ids.end(), [&](int a, int b) {
    const int da = depth(a), db = depth(b);
    if (da != db) return da > db;
    return a < b;
  });
  return ids;
}

AdaptationSpace enumerate_space(const NetworkTopology& topo) {
  const size_t k = topo.dual_parent_motes.size();
  long n = 1;
  for (size_t i = 0; i < k; ++i) n *= 6;
  AdaptationSpace space;
  space.options.reserve(static_cast<size_t>(n));
  for (long id = 0; id < n; ++id) {
    AdaptationOption opt;
    opt.option_id = static_cast<int>(id);
    opt.distribution.resize(k);
    long rem = id;
    for (size_t i = k; i-- > 0;) {
      opt.distribution[i] = kDistributionPairs[rem % 6];
      rem /= 6;
    }
    space.options.push_back(std::move(opt));
  }
  return space;
}

void validate_option(const NetworkTopology& topo, const AdaptationOption& option) {
  if (option.distribution.size() != topo.dual_parent_motes.size())
    throw std::invalid_argument("option does not match topology's dual-parent structure");
  for (const auto& [a, b] : option.distribution) {
    if (a + b != 100 || a < 0 || a > 100 || a % 20 != 0)
      throw std::invalid_argument("illegal distribution pair (" + std::to_string(a) + "," +
                                  std::to_string(b) + ")");
  }
}

namespace {
constexpr std::uint64_t kSnrStream = 0x534e52;   // substream tags
constexpr std::uint64_t kLoadStream = 0x4c4f41;
constexpr std::uint64_t kInitStream = 0x494e49;
}  // namespace

NetworkState initial_state(const NetworkTopology& topo, const UncertaintyProfile& profile) {
  NetworkState st;
  st.cycle_index = 0;
  st.link_snr.resize(static_cast<size_t>(topo.link_count()));
  st.mote_load.resize(static_cast<size_t>(topo.mote_count()));
  st.buffer.assign(static_cast<size_t>(topo.mote_count()), 0);
  for (size_t i = 0; i < st.link_snr.size(); ++i) {
    SplitMix64 rng(derive_seed(profile.rng_seed, {kInitStream, kSnrStream, i}));
    const double frac = (topo.links[i].power - 1) / 14.0;
    const double base = profile.snr_init_min + frac * (profile.snr_init_max - profile.snr_init_min);
    const double jitter = rng.uniform(-profile.snr_init_jitter, profile.snr_init_jitter);
    st.link_snr[i] = std::clamp(base + jitter, profile.snr_min, profile.snr_max);
  }
  for (size_t i = 0; i < st.mote_load.size(); ++i) {
    SplitMix64 rng(derive_seed(profile.rng_seed, {kInitStream, kLoadStream, i}));
    st.mote_load[i] = static_cast<int>(rng.uniform_int(profile.load_init_min, profile.load_init_max));
  }
  return st;
}

NetworkState advance_cycle(const NetworkState& state, const UncertaintyProfile& profile) {
  NetworkState next = state;
  next.cycle_index = state.cycle_index + 1;
  const std::uint64_t cycle = static_cast<std::uint64_t>(next.cycle_index);
  for (size_t i = 0; i < next.link_snr.size(); ++i) {
    SplitMix64 rng(derive_seed(profile.rng_seed, {kSnrStream, cycle, i}));
    const double step = rng.uniform(-profile.snr_walk_step, profile.snr_walk_step);
    next.link_snr[i] = std::clamp(state.link_snr[i] + step, profile.snr_min, profile.snr_max);
  }
  for (size_t i = 0; i < next.mote_load.size(); ++i) {
    SplitMix64 rng(derive_seed(profile.rng_seed, {kLoadStream, cycle, i}));
    const long step = rng.uniform_int(-profile.load_walk_step, profile.load_walk_step);
    next.mote_load[i] = static_cast<int>(
        std::clamp<long>(state.mote_load[i] + step, profile.load_min, profile.load_max));
  }
  return next;
}

double link_loss_probability(double snr_db) {
  if (snr_db >= 0.0) return 0.0;
  return std::clamp(-snr_db / 40.0, 0.0, 1.0);
}

RoutingTable apply_option(const NetworkTopology& topo, const AdaptationOption& option) {
  validate_option(topo, option);
  RoutingTable table;
  table.entries.resize(static_cast<size_t>(topo.mote_count()));
  for (size_t i = 0; i < topo.motes.size(); ++i) {
    const MoteSpec& m = topo.motes[i];
    RoutingTable::Entry& e = table.entries[i];
    e.link0 = topo.link_index(m.id, m.parents[0]);
    if (m.parents.size() == 1) {
      e.link1 = -1;
      e.prob0 = 1.0;  // single parent relays everything
    } else {
      e.link1 = topo.link_index(m.id, m.parents[1]);
      const auto dual_it =
          std::lower_bound(topo.dual_parent_motes.begin(), topo.dual_parent_motes.end(), m.id);
      const size_t di = static_cast<size_t>(dual_it - topo.dual_parent_motes.begin());
      e.prob0 = option.distribution[di].first / 100.0;
    }
  }
  return table;
}

QualityVector ground_truth_qualities(const NetworkTopology& topo, const NetworkState& state,
                                     const AdaptationOption& option, int runs,
                                     std::uint64_t seed, const SimParams& params) {
  if (runs < 1) throw std::invalid_argument("ground_truth_qualities: runs must be >= 1");
  const RoutingTable routing = apply_option(topo, option);
  const std::vector<int> order = topo.processing_order();
  const long nmotes = topo.mote_count();

  // gateway sentinel: link target index resolution per link
  std::vector<int> link_to_index(topo.links.size());
  for (size_t i = 0; i < topo.links.size(); ++i)
    link_to_index[i] = topo.links[i].to == topo.gateway_id ? -1 : topo.mote_index(topo.links[i].to);

  std::vector<double> loss_prob(topo.links.size());
  for (size_t i = 0; i < topo.links.size(); ++i)
    loss_prob[i] = link_loss_probability(state.link_snr[i]);
  std::vector<double> tx_cost(topo.links.size());
  for (size_t i = 0; i < topo.links.size(); ++i)
    tx_cost[i] = params.tx_base_cost + params.tx_power_cost * topo.links[i].power;

  double sum_loss = 0.0, sum_delay = 0.0, sum_energy = 0.0;
  std::vector<std::vector<SplitMix64>> queues(static_cast<size_t>(nmotes));

  for (int run = 0; run < runs; ++run) {
    const std::uint64_t run_seed = derive_seed(seed, {static_cast<std::uint64_t>(run)});
    for (auto& q : queues) q.clear();
    long total = 0;
    // Backlog first, then freshly generated packets; each packet owns an RNG
    // substream keyed by its origin so per-mote contributions stay independent.
    for (long mi = 0; mi < nmotes; ++mi) {
      const int count = state.buffer[static_cast<size_t>(mi)] +
                        state.mote_load[static_cast<size_t>(mi)];
      auto& q = queues[static_cast<size_t>(mi)];
      q.reserve(static_cast<size_t>(count));
      for (int p = 0; p < count; ++p)
        q.emplace_back(derive_seed(run_seed, {static_cast<std::uint64_t>(topo.motes[static_cast<size_t>(mi)].id),
                                              static_cast<std::uint64_t>(p)}));
      total += count;
    }

    long lost = 0, delayed = 0;
    double energy = 0.0;
    for (int mote_id : order) {
      const int mi = topo.mote_index(mote_id);
      auto& q = queues[static_cast<size_t>(mi)];
      const size_t nsend = std::min<size_t>(q.size(), static_cast<size_t>(params.slot_capacity));
      const RoutingTable::Entry& route = routing.entries[static_cast<size_t>(mi)];
      for (size_t j = 0; j < nsend; ++j) {
        SplitMix64 pkt = q[j];
        int link = route.link0;
        if (route.link1 >= 0 && pkt.uniform() >= route.prob0) link = route.link1;
        energy += tx_cost[static_cast<size_t>(link)];
        const double pl = loss_prob[static_cast<size_t>(link)];
        if (pl > 0.0 && pkt.uniform() < pl) {
          ++lost;
          continue;
        }
        const int to = link_to_index[static_cast<size_t>(link)];
        if (to >= 0) queues[static_cast<size_t>(to)].push_back(pkt);
      }
      delayed += static_cast<long>(q.size() - nsend);
      q.clear();  // forwarded or counted; stranded packets are one-cycle delayed
    }

    if (total > 0) {
      sum_loss += static_cast<double>(lost) / static_cast<double>(total);
      sum_delay += static_cast<double>(delayed) / static_cast<double>(total);
    }
    sum_energy += energy;
  }

  QualityVector q;
  q.packet_loss = sum_loss / runs;
  q.latency = sum_delay / runs;
  q.energy = sum_energy / runs;
  return q;
}

}  // namespace dlaser

#include "dlaser/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace dlaser {

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

double f1_from_counts(long tp, long fp, long fn) {
  const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
  const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double f1_score(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size())
    throw std::invalid_argument("f1_score: length mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (size_t i = 0; i < predicted.size(); ++i) {
    if (predicted[i] == 1 && truth[i] == 1) ++tp;
    else if (predicted[i] == 1 && truth[i] == 0) ++fp;
    else if (predicted[i] == 0 && truth[i] == 1) ++fn;
  }
  return f1_from_counts(tp, fp, fn);
}

namespace {

// average ranks, 1-based, ties share the mean rank
std::vector<double> ranks_of(std::span<const double> x) {
  const size_t n = x.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return x[a] < x[b]; });
  std::vector<double> rank(n, 0.0);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg;
    i = j + 1;
  }
  return rank;
}

}  // namespace

std::optional<double> spearman_rho(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("spearman_rho: length mismatch");
  const size_t n = x.size();
  if (n < 2) throw std::invalid_argument("spearman_rho: need n >= 2");
  const std::vector<double> rx = ranks_of(x);
  const std::vector<double> ry = ranks_of(y);
  double sx = 0, sy = 0, sxy = 0, sxx = 0, syy = 0;
  for (size_t i = 0; i < n; ++i) {
    sx += rx[i];
    sy += ry[i];
    sxy += rx[i] * ry[i];
    sxx += rx[i] * rx[i];
    syy += ry[i] * ry[i];
  }
  const double dn = static_cast<double>(n);
  const double vx = dn * sxx - sx * sx;
  const double vy = dn * syy - sy * sy;
  if (vx <= 0.0 || vy <= 0.0) return std::nullopt;  // zero rank variance
  return (dn * sxy - sx * sy) / (std::sqrt(vx) * std::sqrt(vy));
}

namespace {

template <typename Fn>
void for_learning(std::span<const CycleRecord> records, Fn&& fn) {
  for (const CycleRecord& r : records)
    if (!r.training_phase) fn(r);
}

}  // namespace

double aasr(std::span<const CycleRecord> records) {
  long selected = 0, total = 0;
  for_learning(records, [&](const CycleRecord& r) {
    selected += r.selected;
    total += r.total;
  });
  if (total == 0) return 0.0;
  return (1.0 - static_cast<double>(selected) / static_cast<double>(total)) * 100.0;
}

std::optional<double> aaer(std::span<const CycleRecord> records) {
  long analyzed = 0, selected = 0;
  for_learning(records, [&](const CycleRecord& r) {
    analyzed += r.analyzed;
    selected += r.selected;
  });
  if (selected == 0) return std::nullopt;
  return (1.0 - static_cast<double>(analyzed) / static_cast<double>(selected)) * 100.0;
}

double compose_total_reduction(double aasr_pct, double aaer_pct) {
  return 100.0 - (100.0 - aasr_pct) * (1.0 - aaer_pct / 100.0);
}

double total_reduction(std::span<const CycleRecord> records) {
  long analyzed = 0, total = 0, selected = 0;
  for_learning(records, [&](const CycleRecord& r) {
    analyzed += r.analyzed;
    total += r.total;
    selected += r.selected;
  });
  if (total == 0) return 0.0;
  const double direct =
      (1.0 - static_cast<double>(analyzed) / static_cast<double>(total)) * 100.0;
  if (selected > 0) {
    const double composed = compose_total_reduction(aasr(records), *aaer(records));
    if (std::abs(direct - composed) > 1e-9)
      throw std::logic_error("total_reduction: composition identity violated");
  }
  return direct;
}

double aasr_macro(std::span<const CycleRecord> records) {
  double sum = 0.0;
  long n = 0;
  for_learning(records, [&](const CycleRecord& r) {
    if (r.total > 0) {
      sum += (1.0 - static_cast<double>(r.selected) / static_cast<double>(r.total)) * 100.0;
      ++n;
    }
  });
  return n > 0 ? sum / n : 0.0;
}

std::optional<double> aaer_macro(std::span<const CycleRecord> records) {
  double sum = 0.0;
  long n = 0;
  for_learning(records, [&](const CycleRecord& r) {
    if (r.selected > 0) {
      sum += (1.0 - static_cast<double>(r.analyzed) / static_cast<double>(r.selected)) * 100.0;
      ++n;
    }
  });
  if (n == 0) return std::nullopt;
  return sum / n;
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

QualitySummary quality_summary(std::span<const CycleRecord> records,
                               std::span<const CycleRecord> baseline,
                               std::span<const GoalSpec> goals) {
  std::vector<const CycleRecord*> a, b;
  for (const CycleRecord& r : records)
    if (!r.training_phase) a.push_back(&r);
  for (const CycleRecord& r : baseline)
    if (!r.training_phase) b.push_back(&r);
  if (a.size() != b.size() || a.empty())
    throw std::invalid_argument("quality_summary: learning cycle counts do not match");
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i]->cycle != b[i]->cycle)
      throw std::invalid_argument("quality_summary: cycle indices do not match");

  auto collect = [](std::span<const CycleRecord* const> rs, Quality q) {
    std::vector<double> v;
    v.reserve(rs.size());
    for (const CycleRecord* r : rs) v.push_back(r->selected_q.get(q));
    return v;
  };
  QualitySummary s;
  s.median_packet_loss = median(collect(a, Quality::PacketLoss));
  s.median_latency = median(collect(a, Quality::Latency));
  s.median_energy = median(collect(a, Quality::Energy));
  s.baseline_median_packet_loss = median(collect(b, Quality::PacketLoss));
  s.baseline_median_latency = median(collect(b, Quality::Latency));
  s.baseline_median_energy = median(collect(b, Quality::Energy));
  s.delta_packet_loss = s.median_packet_loss - s.baseline_median_packet_loss;
  s.delta_latency = s.median_latency - s.baseline_median_latency;
  s.delta_energy = s.median_energy - s.baseline_median_energy;

  for (const GoalSpec& g : goals) {
    if (g.is_optimization()) continue;
    long ok_a = 0, ok_b = 0;
    for (const CycleRecord* r : a)
      if (satisfies(r->selected_q, g)) ++ok_a;
    for (const CycleRecord* r : b)
      if (satisfies(r->selected_q, g)) ++ok_b;
    s.goal_satisfaction.push_back(static_cast<double>(ok_a) / a.size());
    s.baseline_goal_satisfaction.push_back(static_cast<double>(ok_b) / b.size());
  }
  return s;
}

double time_reduction(std::span<const CycleRecord> records,
                      std::span<const CycleRecord> baseline) {
  double reduced = 0.0, full = 0.0;
  long na = 0, nb = 0;
  for (const CycleRecord& r : records)
    if (!r.training_phase) {
      reduced += r.verif_modeled_us + r.learn_modeled_us;
      ++na;
    }
  for (const CycleRecord& r : baseline)
    if (!r.training_phase) {
      full += r.verif_modeled_us;
      ++nb;
    }
  if (na != nb || na == 0)
    throw std::invalid_argument("time_reduction: learning cycle counts do not match");
  if (full <= 0.0) return 0.0;
  return (1.0 - reduced / full) * 100.0;
}

std::vector<HeadAggregate> aggregate_heads(std::span<const CycleRecord> records,
                                           std::span<const GoalSpec> goals) {
  const std::vector<std::string> ids = goal_ids(goals);
  std::vector<HeadAggregate> out;
  size_t hi = 0;
  for (size_t g = 0; g < goals.size(); ++g) {
    if (!goals[g].is_classification() && !goals[g].is_optimization()) continue;
    HeadAggregate agg;
    agg.goal_id = ids[g];
    agg.classification = goals[g].is_classification();
    double rho_sum = 0.0;
    long rho_n = 0;
    for (const CycleRecord& r : records) {
      if (r.training_phase || hi >= r.heads.size()) continue;
      const HeadCycleStats& st = r.heads[hi];
      agg.tp += st.tp;
      agg.fp += st.fp;
      agg.fn += st.fn;
      agg.tn += st.tn;
      if (st.rho) {
        rho_sum += *st.rho;
        ++rho_n;
      }
    }
    if (agg.classification) agg.f1 = f1_from_counts(agg.tp, agg.fp, agg.fn);
    else if (rho_n > 0) agg.rho_macro = rho_sum / rho_n;
    out.push_back(std::move(agg));
    ++hi;
  }
  return out;
}

// ---------------------------------------------------------------------------
// cycles.csv

namespace {

std::vector<std::string> head_columns(std::span<const GoalSpec> goals) {
  const std::vector<std::string> ids = goal_ids(goals);
  std::vector<std::string> cols;
  for (size_t g = 0; g < goals.size(); ++g) {
    if (goals[g].is_classification()) {
      cols.push_back("tp_" + ids[g]);
      cols.push_back("fp_" + ids[g]);
      cols.push_back("fn_" + ids[g]);
      cols.push_back("tn_" + ids[g]);
    } else {
      cols.push_back("rho_" + ids[g]);
    }
  }
  return cols;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  double x = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), x);
  if (res.ec != std::errc()) throw std::runtime_error("cycles.csv: bad number '" + s + "'");
  return x;
}

}  // namespace

void write_cycles_csv(const std::string& path, std::span<const CycleRecord> records,
                      std::span<const GoalSpec> goals) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << "cycle,phase,total,selected,analyzed,explored,fallback,selected_option,"
        "packet_loss,latency,energy,verif_us,full_verif_us,learn_us";
  for (const std::string& c : head_columns(goals)) os << "," << c;
  os << "\n";
  for (const CycleRecord& r : records) {
    os << r.cycle << "," << (r.training_phase ? "training" : "learning") << "," << r.total << ","
       << r.selected << "," << r.analyzed << "," << r.explored << "," << (r.fallback_used ? 1 : 0)
       << "," << r.selected_option << "," << format_double(r.selected_q.packet_loss) << ","
       << format_double(r.selected_q.latency) << "," << format_double(r.selected_q.energy) << ","
       << format_double(r.verif_modeled_us) << "," << format_double(r.full_verif_modeled_us)
       << "," << format_double(r.learn_modeled_us);
    size_t hi = 0;
    for (const GoalSpec& g : goals) {
      const HeadCycleStats st = hi < r.heads.size() ? r.heads[hi] : HeadCycleStats{};
      if (g.is_classification()) {
        os << "," << st.tp << "," << st.fp << "," << st.fn << "," << st.tn;
        ++hi;
      } else if (g.is_optimization()) {
        os << "," << (st.rho ? format_double(*st.rho) : std::string());
        ++hi;
      }
    }
    os << "\n";
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<CycleRecord> read_cycles_csv(const std::string& path,
                                         std::span<const GoalSpec> goals) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty cycles.csv: " + path);

  std::vector<CycleRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split_csv(line);
    if (f.size() < 14) throw std::runtime_error("cycles.csv: short row");
    CycleRecord r;
    r.cycle = std::stol(f[0]);
    r.training_phase = f[1] == "training";
    r.total = std::stol(f[2]);
    r.selected = std::stol(f[3]);
    r.analyzed = std::stol(f[4]);
    r.explored = std::stol(f[5]);
    r.fallback_used = f[6] == "1";
    r.selected_option = std::stoi(f[7]);
    r.selected_q.packet_loss = parse_double(f[8]);
    r.selected_q.latency = parse_double(f[9]);
    r.selected_q.energy = parse_double(f[10]);
    r.verif_modeled_us = parse_double(f[11]);
    r.full_verif_modeled_us = parse_double(f[12]);
    r.learn_modeled_us = parse_double(f[13]);
    size_t col = 14;
    for (const GoalSpec& g : goals) {
      HeadCycleStats st;
      if (g.is_classification()) {
        st.tp = std::stol(f.at(col++));
        st.fp = std::stol(f.at(col++));
        st.fn = std::stol(f.at(col++));
        st.tn = std::stol(f.at(col++));
        r.heads.push_back(st);
      } else if (g.is_optimization()) {
        const std::string& s = f.at(col++);
        if (!s.empty()) st.rho = parse_double(s);
        r.heads.push_back(st);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dlaser

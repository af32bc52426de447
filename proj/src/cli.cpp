#include "dlaser/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "dlaser/features.hpp"
#include "dlaser/rng.hpp"

namespace dlaser {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json goal_to_json(const GoalSpec& g) {
  json j;
  j["kind"] = goal_kind_name(g.kind);
  j["quality"] = quality_name(g.quality);
  switch (g.kind) {
    case GoalKind::ThresholdBelow:
    case GoalKind::ThresholdAbove:
      j["value"] = g.threshold;
      break;
    case GoalKind::SetPoint:
      j["value"] = g.set_point;
      j["epsilon"] = g.half_width;
      break;
    default:
      break;
  }
  return j;
}

GoalSpec goal_from_json(const json& j) {
  GoalSpec g;
  g.kind = goal_kind_from_name(j.at("kind").get<std::string>());
  g.quality = quality_from_name(j.at("quality").get<std::string>());
  if (g.kind == GoalKind::ThresholdBelow || g.kind == GoalKind::ThresholdAbove)
    g.threshold = j.at("value").get<double>();
  if (g.kind == GoalKind::SetPoint) {
    g.set_point = j.at("value").get<double>();
    g.half_width = j.at("epsilon").get<double>();
  }
  return g;
}

}  // namespace

const char* summary_schema_text() {
  return R"({
  "type": "object",
  "required": ["run", "metrics"],
  "additionalProperties": false,
  "properties": {
    "run": {
      "type": "object",
      "required": ["strategy", "seed", "training_cycles", "learning_cycles", "topology", "goals"],
      "additionalProperties": false,
      "properties": {
        "strategy": {"type": "string"},
        "seed": {"type": "integer"},
        "training_cycles": {"type": "integer"},
        "learning_cycles": {"type": "integer"},
        "topology": {"type": "string"},
        "goals": {"type": "array", "items": {"type": "object"}}
      }
    },
    "metrics": {
      "type": "object",
      "required": ["f1", "spearman_rho", "aasr", "aaer", "total_reduction", "aasr_macro",
                   "aaer_macro", "goal_satisfaction", "quality_medians", "fallback_cycles",
                   "time"],
      "additionalProperties": false,
      "properties": {
        "f1": {"type": "object"},
        "spearman_rho": {"type": "object"},
        "aasr": {"type": "number"},
        "aaer": {"type": ["number", "null"]},
        "total_reduction": {"type": "number"},
        "aasr_macro": {"type": "number"},
        "aaer_macro": {"type": ["number", "null"]},
        "goal_satisfaction": {"type": "object"},
        "quality_medians": {
          "type": "object",
          "required": ["packet_loss", "latency", "energy"],
          "additionalProperties": false,
          "properties": {
            "packet_loss": {"type": "number"},
            "latency": {"type": "number"},
            "energy": {"type": "number"}
          }
        },
        "fallback_cycles": {"type": "integer"},
        "time": {
          "type": "object",
          "required": ["verification_modeled_us", "learning_modeled_us",
                       "full_verification_modeled_us"],
          "additionalProperties": false,
          "properties": {
            "verification_modeled_us": {"type": "number"},
            "learning_modeled_us": {"type": "number"},
            "full_verification_modeled_us": {"type": "number"}
          }
        }
      }
    }
  }
})";
}

namespace {

bool matches_type(const json& doc, const std::string& type) {
  if (type == "object") return doc.is_object();
  if (type == "array") return doc.is_array();
  if (type == "string") return doc.is_string();
  if (type == "number") return doc.is_number();
  if (type == "integer") return doc.is_number_integer() || doc.is_number_unsigned();
  if (type == "boolean") return doc.is_boolean();
  if (type == "null") return doc.is_null();
  return false;
}

void validate_node(const json& doc, const json& schema, const std::string& path) {
  if (schema.contains("type")) {
    const json& t = schema["type"];
    bool ok = false;
    if (t.is_string()) ok = matches_type(doc, t.get<std::string>());
    else
      for (const json& alt : t) ok = ok || matches_type(doc, alt.get<std::string>());
    if (!ok) throw std::runtime_error("summary schema violation at " + path + ": wrong type");
  }
  if (schema.contains("required"))
    for (const json& key : schema["required"])
      if (!doc.contains(key.get<std::string>()))
        throw std::runtime_error("summary schema violation at " + path + ": missing '" +
                                 key.get<std::string>() + "'");
  if (doc.is_object() && schema.contains("properties")) {
    const json& props = schema["properties"];
    const bool extra_ok =
        !schema.contains("additionalProperties") || schema["additionalProperties"].get<bool>();
    for (const auto& [key, value] : doc.items()) {
      if (props.contains(key)) validate_node(value, props[key], path + "." + key);
      else if (!extra_ok)
        throw std::runtime_error("summary schema violation at " + path + ": unexpected '" +
                                 key + "'");
    }
  }
  if (doc.is_array() && schema.contains("items")) {
    long i = 0;
    for (const json& item : doc) validate_node(item, schema["items"], path + "[" + std::to_string(i++) + "]");
  }
}

}  // namespace

void validate_summary(const std::string& summary_text) {
  const json doc = json::parse(summary_text);
  const json schema = json::parse(summary_schema_text());
  validate_node(doc, schema, "summary");
}

std::string summary_json(const ScenarioRun& run, const std::string& topology_path,
                         std::span<const CycleRecord> records) {
  json j;
  j["run"]["strategy"] = strategy_name(run.strategy);
  j["run"]["seed"] = run.seed;
  j["run"]["training_cycles"] = run.training_cycles;
  j["run"]["learning_cycles"] = run.learning_cycles;
  j["run"]["topology"] = topology_path;
  json goals = json::array();
  for (const GoalSpec& g : run.goals) goals.push_back(goal_to_json(g));
  j["run"]["goals"] = goals;

  const std::vector<HeadAggregate> heads = aggregate_heads(records, run.goals);
  json f1 = json::object(), rho = json::object();
  for (const HeadAggregate& h : heads) {
    if (h.classification) f1[h.goal_id] = h.f1;
    else if (h.rho_macro) rho[h.goal_id] = *h.rho_macro;
    else rho[h.goal_id] = nullptr;
  }
  j["metrics"]["f1"] = f1;
  j["metrics"]["spearman_rho"] = rho;
  j["metrics"]["aasr"] = aasr(records);
  const auto er = aaer(records);
  j["metrics"]["aaer"] = er ? json(*er) : json(nullptr);
  j["metrics"]["total_reduction"] = total_reduction(records);
  j["metrics"]["aasr_macro"] = aasr_macro(records);
  const auto erm = aaer_macro(records);
  j["metrics"]["aaer_macro"] = erm ? json(*erm) : json(nullptr);

  const std::vector<std::string> ids = goal_ids(run.goals);
  json sat = json::object();
  std::vector<double> pl, la, ec;
  long fallback = 0, learning = 0;
  double verif_us = 0.0, learn_us = 0.0, full_us = 0.0;
  for (const CycleRecord& r : records) {
    if (r.training_phase) continue;
    ++learning;
    pl.push_back(r.selected_q.packet_loss);
    la.push_back(r.selected_q.latency);
    ec.push_back(r.selected_q.energy);
    if (r.fallback_used) ++fallback;
    verif_us += r.verif_modeled_us;
    learn_us += r.learn_modeled_us;
    full_us += r.full_verif_modeled_us;
  }
  auto median = [](std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  for (size_t g = 0; g < run.goals.size(); ++g) {
    if (!run.goals[g].is_classification()) continue;
    long ok = 0;
    for (const CycleRecord& r : records)
      if (!r.training_phase && satisfies(r.selected_q, run.goals[g])) ++ok;
    sat[ids[g]] = learning > 0 ? static_cast<double>(ok) / learning : 0.0;
  }
  j["metrics"]["goal_satisfaction"] = sat;
  j["metrics"]["quality_medians"]["packet_loss"] = median(pl);
  j["metrics"]["quality_medians"]["latency"] = median(la);
  j["metrics"]["quality_medians"]["energy"] = median(ec);
  j["metrics"]["fallback_cycles"] = fallback;
  j["metrics"]["time"]["verification_modeled_us"] = verif_us;
  j["metrics"]["time"]["learning_modeled_us"] = learn_us;
  j["metrics"]["time"]["full_verification_modeled_us"] = full_us;
  return j.dump(2) + "\n";
}

namespace {

ScenarioConfig apply_overrides(ScenarioConfig cfg, const RunOverrides& o) {
  if (o.seed) cfg.run.seed = *o.seed;
  if (o.out) cfg.output_dir = *o.out;
  if (o.threads) cfg.run.threads = *o.threads;
  if (o.verifier_runs) cfg.run.verifier.runs_per_option = *o.verifier_runs;
  if (o.strategy) cfg.run.strategy = strategy_from_name(*o.strategy);
  return cfg;
}

}  // namespace

int cmd_run(const std::string& config_path, const RunOverrides& overrides) {
  try {
    const ScenarioConfig cfg = apply_overrides(load_scenario_config(config_path), overrides);
    if (cfg.output_dir.empty())
      throw std::runtime_error("no output directory (config 'output' or --out)");
    fs::create_directories(cfg.output_dir);

    const ScenarioResult result = run_scenario(cfg.run);

    write_cycles_csv(cfg.output_dir + "/cycles.csv", result.records, cfg.run.goals);
    const std::string summary = summary_json(cfg.run, cfg.topology_path, result.records);
    validate_summary(summary);
    std::ofstream(cfg.output_dir + "/summary.json") << summary;
    if (result.model) result.model->save(cfg.output_dir + "/model.ckpt");
    // Wall clock is hardware noise; it stays out of the deterministic outputs.
    std::ofstream(cfg.output_dir + "/timing.log")
        << "wall_seconds " << result.wall_seconds << "\n";
    std::cout << "run complete: " << result.records.size() << " cycles -> " << cfg.output_dir
              << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "run failed: " << e.what() << "\n";
    return 1;
  }
}

namespace {

struct Dataset {
  Matrix inputs;
  std::vector<QualityVector> qualities;
  std::vector<long> cycle_of_row;
};

// Exhaustive data-collection trajectory: verify everything, follow the best
// option, record one sample per (cycle, option).
Dataset generate_dataset(const GridSearchConfig& cfg) {
  Dataset ds;
  const AdaptationSpace space = enumerate_space(cfg.topology);
  UncertaintyProfile profile = cfg.profile;
  profile.rng_seed = derive_seed(cfg.seed, {0x454e56});
  VerifierConfig vcfg = cfg.verifier;
  vcfg.base_seed = derive_seed(cfg.seed, {0x564552});
  vcfg.threads = cfg.threads;

  const InputLayout layout = input_layout(cfg.topology);
  ds.inputs = Matrix(cfg.generate_cycles * space.size(), layout.width());
  int current = 0;
  NetworkState state = initial_state(cfg.topology, profile);
  long row = 0;
  for (long cycle = 0; cycle < cfg.generate_cycles; ++cycle) {
    if (cycle > 0) state = advance_cycle(state, profile);
    const BatchVerifyResult batch = verify_batch(cfg.topology, state, space.options, vcfg);
    for (long id = 0; id < space.size(); ++id) {
      fill_input_row(cfg.topology, state, space.options[static_cast<size_t>(id)],
                     space.by_id(current), ds.inputs.row(row));
      ds.qualities.push_back(batch.results.at(static_cast<int>(id)));
      ds.cycle_of_row.push_back(cycle);
      ++row;
    }
    current = select_best_option(batch.results, cfg.goals);
  }
  return ds;
}

Dataset load_dataset(const std::string& path, long expected_width) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open data file: " + path);
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty data file: " + path);
  Dataset ds;
  std::vector<double> values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    values.clear();
    while (std::getline(ls, tok, ',')) values.push_back(std::stod(tok));
    if (static_cast<long>(values.size()) != expected_width + 5)
      throw std::runtime_error("data file row width mismatch in " + path);
    ds.cycle_of_row.push_back(static_cast<long>(values[0]));
    for (long c = 0; c < expected_width; ++c) ds.inputs.v.push_back(values[static_cast<size_t>(2 + c)]);
    QualityVector q;
    q.packet_loss = values[values.size() - 3];
    q.latency = values[values.size() - 2];
    q.energy = values[values.size() - 1];
    ds.qualities.push_back(q);
  }
  ds.inputs.cols = expected_width;
  ds.inputs.rows = static_cast<long>(ds.qualities.size());
  return ds;
}

std::string layout_str(const std::vector<int>& l) {
  std::string s;
  for (size_t i = 0; i < l.size(); ++i) {
    if (i) s += '-';
    s += std::to_string(l[i]);
  }
  return s.empty() ? "none" : s;
}

}  // namespace

int cmd_gridsearch(const std::string& config_path, const RunOverrides& overrides) {
  try {
    GridSearchConfig cfg = load_gridsearch_config(config_path);
    if (overrides.seed) cfg.seed = *overrides.seed;
    if (overrides.out) cfg.output_dir = *overrides.out;
    if (overrides.threads) cfg.threads = *overrides.threads;
    if (overrides.verifier_runs) cfg.verifier.runs_per_option = *overrides.verifier_runs;
    if (cfg.output_dir.empty())
      throw std::runtime_error("no output directory (config 'output' or --out)");
    fs::create_directories(cfg.output_dir);

    const InputLayout layout = input_layout(cfg.topology);
    const Dataset ds = cfg.data_file.empty() ? generate_dataset(cfg)
                                             : load_dataset(cfg.data_file, layout.width());
    if (ds.cycle_of_row.empty()) throw std::runtime_error("gridsearch: no training data");

    // Split by cycle: the trailing validation_cycles are held out.
    const long last_cycle = *std::max_element(ds.cycle_of_row.begin(), ds.cycle_of_row.end());
    const long val_from = last_cycle - cfg.validation_cycles + 1;
    std::vector<long> train_rows, val_rows;
    for (size_t i = 0; i < ds.cycle_of_row.size(); ++i)
      (ds.cycle_of_row[i] >= val_from ? val_rows : train_rows).push_back(static_cast<long>(i));
    if (train_rows.empty() || val_rows.empty())
      throw std::runtime_error("gridsearch: empty train or validation split");

    const Matrix train_x = ds.inputs.take_rows(train_rows);
    const Matrix val_x = ds.inputs.take_rows(val_rows);
    std::vector<QualityVector> train_q, val_q;
    for (long r : train_rows) train_q.push_back(ds.qualities[static_cast<size_t>(r)]);
    for (long r : val_rows) val_q.push_back(ds.qualities[static_cast<size_t>(r)]);
    const LabelSet train_y = build_labels(cfg.goals, train_q);
    const LabelSet val_y = build_labels(cfg.goals, val_q);

    const std::vector<HeadKindSpec> heads = head_specs(cfg.goals);
    const std::vector<HyperParams> grid = cfg.grid.expand();
    GridSearchOptions opts;
    opts.epochs = cfg.grid.epochs;
    opts.patience = cfg.grid.patience;
    opts.seed = derive_seed(cfg.seed, {0x47524944});
    opts.threads = cfg.threads;
    const GridSearchResult res =
        grid_search(grid, train_x, train_y, val_x, val_y, heads, opts);

    std::ofstream csv(cfg.output_dir + "/gridsearch.csv");
    csv << "index,scaler,batch_size,learning_rate,optimizer,core_layers,class_layers,"
           "regr_layers,parameters,diverged,val_loss";
    for (const HeadKindSpec& h : heads) csv << "," << (h.classification ? "f1_" : "rho_") << h.goal_id;
    csv << "\n";
    for (size_t i = 0; i < res.rows.size(); ++i) {
      const GridRow& r = res.rows[i];
      csv << i << "," << scaler_kind_name(r.hp.scaler) << "," << r.hp.batch_size << ","
          << format_double(r.hp.learning_rate) << "," << optimizer_kind_name(r.hp.optimizer)
          << "," << layout_str(r.hp.core_layers) << "," << layout_str(r.hp.class_layers) << ","
          << layout_str(r.hp.regr_layers) << "," << r.parameters << "," << (r.diverged ? 1 : 0)
          << "," << (std::isfinite(r.val_loss) ? format_double(r.val_loss) : std::string("inf"));
      for (const HeadKindSpec& h : heads) {
        double score = 0.0;
        for (const auto& [id, s] : r.head_scores)
          if (id == h.goal_id) score = s;
        csv << "," << format_double(score);
      }
      csv << "\n";
    }

    json best;
    best["index"] = res.best_index;
    best["val_loss"] = res.rows[static_cast<size_t>(res.best_index)].val_loss;
    best["hyper_params"] = {
        {"scaler", scaler_kind_name(res.best.scaler)},
        {"batch_size", res.best.batch_size},
        {"learning_rate", res.best.learning_rate},
        {"optimizer", optimizer_kind_name(res.best.optimizer)},
        {"core_layers", res.best.core_layers},
        {"class_layers", res.best.class_layers},
        {"regr_layers", res.best.regr_layers},
    };
    std::ofstream(cfg.output_dir + "/best.json") << best.dump(2) << "\n";
    res.model.save(cfg.output_dir + "/model.ckpt");
    std::cout << "grid search complete: " << res.rows.size() << " combinations -> "
              << cfg.output_dir << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "gridsearch failed: " << e.what() << "\n";
    return 1;
  }
}

namespace {

struct LoadedRun {
  std::string name;
  json run_meta;
  std::vector<GoalSpec> goals;
  std::vector<CycleRecord> records;
};

LoadedRun load_run(const std::string& dir) {
  LoadedRun r;
  r.name = fs::path(dir).filename().string();
  if (r.name.empty()) r.name = dir;
  std::ifstream is(dir + "/summary.json");
  if (!is) throw std::runtime_error("cannot open " + dir + "/summary.json");
  json summary;
  is >> summary;
  r.run_meta = summary.at("run");
  for (const json& g : r.run_meta.at("goals")) r.goals.push_back(goal_from_json(g));
  r.records = read_cycles_csv(dir + "/cycles.csv", r.goals);
  return r;
}

}  // namespace

int cmd_compare(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
  try {
    if (run_dirs.size() < 2) throw std::runtime_error("compare needs at least two run dirs");
    std::vector<LoadedRun> runs;
    for (const std::string& dir : run_dirs) runs.push_back(load_run(dir));
    for (size_t i = 1; i < runs.size(); ++i) {
      const json& a = runs[0].run_meta;
      const json& b = runs[i].run_meta;
      if (a.at("seed") != b.at("seed") || a.at("training_cycles") != b.at("training_cycles") ||
          a.at("learning_cycles") != b.at("learning_cycles") ||
          a.at("goals") != b.at("goals") || a.at("topology") != b.at("topology"))
        throw std::runtime_error("compare: run '" + runs[i].name +
                                 "' does not match the baseline run (seed/cycles/goals)");
    }
    fs::create_directories(out_dir);

    const std::vector<GoalSpec>& goals = runs[0].goals;
    const std::vector<std::string> ids = goal_ids(goals);
    std::ofstream csv(out_dir + "/compare.csv");
    csv << "run,strategy";
    for (size_t g = 0; g < goals.size(); ++g)
      if (goals[g].is_classification()) csv << ",f1_" << ids[g];
    for (size_t g = 0; g < goals.size(); ++g)
      if (goals[g].is_optimization()) csv << ",rho_" << ids[g];
    csv << ",aasr,aaer,total_reduction,time_reduction,median_packet_loss,median_latency,"
           "median_energy,delta_packet_loss,delta_latency,delta_energy";
    for (size_t g = 0; g < goals.size(); ++g)
      if (goals[g].is_classification()) csv << ",sat_" << ids[g];
    csv << "\n";

    for (const LoadedRun& run : runs) {
      const QualitySummary qs = quality_summary(run.records, runs[0].records, goals);
      const std::vector<HeadAggregate> heads = aggregate_heads(run.records, goals);
      csv << run.name << "," << run.run_meta.at("strategy").get<std::string>();
      for (const HeadAggregate& h : heads)
        if (h.classification) csv << "," << format_double(h.f1);
      for (const HeadAggregate& h : heads)
        if (!h.classification)
          csv << "," << (h.rho_macro ? format_double(*h.rho_macro) : std::string());
      const auto er = aaer(run.records);
      csv << "," << format_double(aasr(run.records)) << ","
          << (er ? format_double(*er) : std::string()) << ","
          << format_double(total_reduction(run.records)) << ","
          << format_double(time_reduction(run.records, runs[0].records)) << ","
          << format_double(qs.median_packet_loss) << "," << format_double(qs.median_latency)
          << "," << format_double(qs.median_energy) << ","
          << format_double(qs.delta_packet_loss) << "," << format_double(qs.delta_latency)
          << "," << format_double(qs.delta_energy);
      for (double s : qs.goal_satisfaction) csv << "," << format_double(s);
      csv << "\n";
    }

    // Per-cycle quality series over learning cycles, for external plotting.
    std::ofstream series(out_dir + "/series.csv");
    series << "cycle";
    for (const LoadedRun& run : runs)
      series << "," << run.name << "_packet_loss," << run.name << "_latency," << run.name
             << "_energy";
    series << "\n";
    for (size_t i = 0; i < runs[0].records.size(); ++i) {
      if (runs[0].records[i].training_phase) continue;
      series << runs[0].records[i].cycle;
      for (const LoadedRun& run : runs) {
        const CycleRecord& r = run.records.at(i);
        series << "," << format_double(r.selected_q.packet_loss) << ","
               << format_double(r.selected_q.latency) << ","
               << format_double(r.selected_q.energy);
      }
      series << "\n";
    }
    std::cout << "compare complete: " << runs.size() << " runs -> " << out_dir << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "compare failed: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace dlaser

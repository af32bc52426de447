#include "dlaser/config.hpp"

#include <filesystem>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace dlaser {

namespace {

using nlohmann::json;

// Relative paths inside a config resolve against the config file's directory.
std::string resolve_near(const std::string& config_path, const std::string& path) {
  if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(config_path).parent_path() / path).string();
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config parse error in " + path + ": " + e.what());
  }
  return j;
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& ctx) {
  if (!j.is_object()) throw std::runtime_error("config: " + ctx + " must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.contains(key))
      throw std::runtime_error("config: unknown key '" + key + "' in " + ctx);
}

std::vector<GoalSpec> parse_goals(const json& j) {
  if (!j.is_array() || j.empty())
    throw std::runtime_error("config: goals must be a non-empty array");
  std::vector<GoalSpec> goals;
  for (const json& g : j) {
    check_keys(g, {"kind", "quality", "value", "epsilon"}, "goals[]");
    GoalSpec spec;
    spec.kind = goal_kind_from_name(g.at("kind").get<std::string>());
    spec.quality = quality_from_name(g.at("quality").get<std::string>());
    switch (spec.kind) {
      case GoalKind::ThresholdBelow:
      case GoalKind::ThresholdAbove:
        spec.threshold = g.at("value").get<double>();
        break;
      case GoalKind::SetPoint:
        spec.set_point = g.at("value").get<double>();
        spec.half_width = g.at("epsilon").get<double>();
        break;
      default:
        if (g.contains("value") || g.contains("epsilon"))
          throw std::runtime_error("config: optimization goals take no value/epsilon");
        break;
    }
    goals.push_back(spec);
  }
  validate_goal_set(goals);
  return goals;
}

UncertaintyProfile parse_profile(const json& j) {
  check_keys(j,
             {"load_min", "load_max", "snr_min", "snr_max", "snr_walk_step", "load_walk_step",
              "snr_init_min", "snr_init_max", "snr_init_jitter", "load_init_min",
              "load_init_max"},
             "profile");
  UncertaintyProfile p;
  if (j.contains("load_min")) p.load_min = j["load_min"].get<int>();
  if (j.contains("load_max")) p.load_max = j["load_max"].get<int>();
  if (j.contains("snr_min")) p.snr_min = j["snr_min"].get<double>();
  if (j.contains("snr_max")) p.snr_max = j["snr_max"].get<double>();
  if (j.contains("snr_walk_step")) p.snr_walk_step = j["snr_walk_step"].get<double>();
  if (j.contains("load_walk_step")) p.load_walk_step = j["load_walk_step"].get<int>();
  if (j.contains("snr_init_min")) p.snr_init_min = j["snr_init_min"].get<double>();
  if (j.contains("snr_init_max")) p.snr_init_max = j["snr_init_max"].get<double>();
  if (j.contains("snr_init_jitter")) p.snr_init_jitter = j["snr_init_jitter"].get<double>();
  if (j.contains("load_init_min")) p.load_init_min = j["load_init_min"].get<int>();
  if (j.contains("load_init_max")) p.load_init_max = j["load_init_max"].get<int>();
  return p;
}

VerifierConfig parse_verifier(const json& j) {
  check_keys(j, {"runs_per_option", "modeled_us_per_run", "relative_accuracy"}, "verifier");
  VerifierConfig v;
  if (j.contains("runs_per_option")) v.runs_per_option = j["runs_per_option"].get<int>();
  if (j.contains("modeled_us_per_run"))
    v.modeled_us_per_run = j["modeled_us_per_run"].get<double>();
  if (j.contains("relative_accuracy"))
    v.relative_accuracy = j["relative_accuracy"].get<double>();
  return v;
}

SimParams parse_sim(const json& j) {
  check_keys(j, {"slot_capacity", "tx_base_cost", "tx_power_cost"}, "sim");
  SimParams s;
  if (j.contains("slot_capacity")) s.slot_capacity = j["slot_capacity"].get<int>();
  if (j.contains("tx_base_cost")) s.tx_base_cost = j["tx_base_cost"].get<double>();
  if (j.contains("tx_power_cost")) s.tx_power_cost = j["tx_power_cost"].get<double>();
  return s;
}

HyperParams parse_model(const json& j) {
  check_keys(j,
             {"scaler", "batch_size", "learning_rate", "optimizer", "core_layers",
              "class_layers", "regr_layers"},
             "model");
  HyperParams hp;
  if (j.contains("scaler")) hp.scaler = scaler_kind_from_name(j["scaler"].get<std::string>());
  if (j.contains("batch_size")) hp.batch_size = j["batch_size"].get<int>();
  if (j.contains("learning_rate")) hp.learning_rate = j["learning_rate"].get<double>();
  if (j.contains("optimizer"))
    hp.optimizer = optimizer_kind_from_name(j["optimizer"].get<std::string>());
  if (j.contains("core_layers")) hp.core_layers = j["core_layers"].get<std::vector<int>>();
  if (j.contains("class_layers")) hp.class_layers = j["class_layers"].get<std::vector<int>>();
  if (j.contains("regr_layers")) hp.regr_layers = j["regr_layers"].get<std::vector<int>>();
  if (hp.batch_size < 1 || hp.learning_rate <= 0.0)
    throw std::runtime_error("config: model batch_size must be >= 1 and learning_rate > 0");
  return hp;
}

}  // namespace

ScenarioConfig load_scenario_config(const std::string& path) {
  const json j = load_json(path);
  check_keys(j,
             {"topology", "goals", "strategy", "cycles", "seed", "verifier", "reducer", "model",
              "profile", "sim", "oracle_eval", "random_selected_fraction", "output"},
             "scenario config");
  ScenarioConfig cfg;
  cfg.topology_path = resolve_near(path, j.at("topology").get<std::string>());
  cfg.run.topology = NetworkTopology::load(cfg.topology_path);
  cfg.run.goals = parse_goals(j.at("goals"));
  cfg.run.strategy = strategy_from_name(j.at("strategy").get<std::string>());

  const json& cycles = j.at("cycles");
  check_keys(cycles, {"training", "learning"}, "cycles");
  cfg.run.training_cycles = cycles.at("training").get<long>();
  cfg.run.learning_cycles = cycles.at("learning").get<long>();
  if (cfg.run.training_cycles < 0 || cfg.run.learning_cycles < 1)
    throw std::runtime_error("config: cycles.training >= 0 and cycles.learning >= 1 required");

  if (j.contains("seed")) cfg.run.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("verifier")) cfg.run.verifier = parse_verifier(j["verifier"]);
  if (j.contains("profile")) cfg.run.profile = parse_profile(j["profile"]);
  if (j.contains("sim")) cfg.run.verifier.sim = parse_sim(j["sim"]);
  if (j.contains("model")) cfg.run.hp = parse_model(j["model"]);
  if (j.contains("oracle_eval")) cfg.run.oracle_eval = j["oracle_eval"].get<bool>();
  if (j.contains("random_selected_fraction"))
    cfg.run.random_selected_fraction = j["random_selected_fraction"].get<double>();
  if (j.contains("output")) cfg.output_dir = j["output"].get<std::string>();

  if (j.contains("reducer")) {
    const json& r = j["reducer"];
    check_keys(r,
               {"exploration_rate", "train_epochs_per_cycle", "online_epochs", "window_cycles",
                "replay_samples"},
               "reducer");
    if (r.contains("exploration_rate"))
      cfg.run.reducer.exploration_rate = r["exploration_rate"].get<double>();
    if (r.contains("train_epochs_per_cycle"))
      cfg.run.reducer.train_epochs_per_cycle = r["train_epochs_per_cycle"].get<int>();
    if (r.contains("online_epochs"))
      cfg.run.reducer.online_epochs = r["online_epochs"].get<int>();
    if (r.contains("window_cycles"))
      cfg.run.reducer.window_cycles = r["window_cycles"].get<int>();
    if (r.contains("replay_samples"))
      cfg.run.reducer.replay_samples = r["replay_samples"].get<int>();
  }
  cfg.run.reducer.training_cycles = cfg.run.training_cycles;
  validate_reducer_config(cfg.run.reducer);
  validate_verifier_config(cfg.run.verifier);
  return cfg;
}

std::vector<HyperParams> GridSpec::expand() const {
  std::vector<HyperParams> out;
  for (ScalerKind sc : scalers)
    for (int bs : batch_sizes)
      for (double lr : learning_rates)
        for (OptimizerKind opt : optimizers)
          for (const auto& core : core_layouts)
            for (const auto& heads : head_layouts) {
              HyperParams hp;
              hp.scaler = sc;
              hp.batch_size = bs;
              hp.learning_rate = lr;
              hp.optimizer = opt;
              hp.core_layers = core;
              hp.class_layers = heads.class_layers;
              hp.regr_layers = heads.regr_layers;
              out.push_back(std::move(hp));
            }
  if (out.empty()) throw std::runtime_error("config: grid expands to zero combinations");
  return out;
}

GridSearchConfig load_gridsearch_config(const std::string& path) {
  const json j = load_json(path);
  check_keys(j, {"topology", "goals", "seed", "verifier", "profile", "sim", "data", "grid",
                 "output"},
             "gridsearch config");
  GridSearchConfig cfg;
  cfg.topology_path = resolve_near(path, j.at("topology").get<std::string>());
  cfg.topology = NetworkTopology::load(cfg.topology_path);
  cfg.goals = parse_goals(j.at("goals"));
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("verifier")) cfg.verifier = parse_verifier(j["verifier"]);
  if (j.contains("profile")) cfg.profile = parse_profile(j["profile"]);
  if (j.contains("sim")) cfg.verifier.sim = parse_sim(j["sim"]);
  if (j.contains("output")) cfg.output_dir = j["output"].get<std::string>();

  const json& data = j.at("data");
  check_keys(data, {"generate_cycles", "validation_cycles", "file"}, "data");
  if (data.contains("file")) cfg.data_file = resolve_near(path, data["file"].get<std::string>());
  if (data.contains("generate_cycles"))
    cfg.generate_cycles = data["generate_cycles"].get<long>();
  if (data.contains("validation_cycles"))
    cfg.validation_cycles = data["validation_cycles"].get<long>();
  if (cfg.data_file.empty() &&
      (cfg.validation_cycles < 1 || cfg.generate_cycles <= cfg.validation_cycles))
    throw std::runtime_error("config: data.generate_cycles must exceed data.validation_cycles");

  const json& g = j.at("grid");
  check_keys(g,
             {"scalers", "batch_sizes", "learning_rates", "optimizers", "core_layouts",
              "head_layouts", "epochs", "patience"},
             "grid");
  for (const auto& s : g.at("scalers"))
    cfg.grid.scalers.push_back(scaler_kind_from_name(s.get<std::string>()));
  cfg.grid.batch_sizes = g.at("batch_sizes").get<std::vector<int>>();
  cfg.grid.learning_rates = g.at("learning_rates").get<std::vector<double>>();
  for (const auto& s : g.at("optimizers"))
    cfg.grid.optimizers.push_back(optimizer_kind_from_name(s.get<std::string>()));
  cfg.grid.core_layouts = g.at("core_layouts").get<std::vector<std::vector<int>>>();
  for (const json& pair : g.at("head_layouts")) {
    check_keys(pair, {"class", "regr"}, "head_layouts[]");
    HeadLayoutPair p;
    p.class_layers = pair.at("class").get<std::vector<int>>();
    if (pair.contains("regr")) p.regr_layers = pair.at("regr").get<std::vector<int>>();
    cfg.grid.head_layouts.push_back(std::move(p));
  }
  if (g.contains("epochs")) cfg.grid.epochs = g["epochs"].get<int>();
  if (g.contains("patience")) cfg.grid.patience = g["patience"].get<int>();
  return cfg;
}

}  // namespace dlaser

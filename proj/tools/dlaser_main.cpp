#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dlaser/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"dlaser: adaptation-space reduction testbed"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 0;
  int verifier_runs = 0;
  std::string strategy;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "configuration file")->required();
    cmd->add_option("--out", out_dir, "output directory (overrides config)");
    cmd->add_option("--seed", seed, "top-level seed (overrides config)");
    cmd->add_option("--threads", threads, "worker threads for verification / grid search");
    cmd->add_option("--verifier-runs", verifier_runs, "simulation runs per option");
  };

  CLI::App* run = app.add_subcommand("run", "execute a scenario and write cycles/summary/model");
  add_common(run);
  run->add_option("--strategy", strategy,
                  "dlaser_plus | exhaustive_reference | random_reducer (overrides config)");

  CLI::App* grid = app.add_subcommand("gridsearch", "offline hyper-parameter grid search");
  add_common(grid);

  std::vector<std::string> run_dirs;
  std::string compare_out;
  CLI::App* compare = app.add_subcommand("compare", "compare completed runs (first is baseline)");
  compare->add_option("dirs", run_dirs, "run output directories")->required()->expected(-2);
  compare->add_option("--out", compare_out, "output directory")->required();

  CLI11_PARSE(app, argc, argv);

  dlaser::RunOverrides overrides;
  if (!out_dir.empty()) overrides.out = out_dir;
  if (run->count("--seed") || grid->count("--seed")) overrides.seed = seed;
  if (threads > 0) overrides.threads = threads;
  if (verifier_runs > 0) overrides.verifier_runs = verifier_runs;
  if (!strategy.empty()) overrides.strategy = strategy;

  if (app.got_subcommand(run)) return dlaser::cmd_run(config_path, overrides);
  if (app.got_subcommand(grid)) return dlaser::cmd_gridsearch(config_path, overrides);
  return dlaser::cmd_compare(run_dirs, compare_out);
}

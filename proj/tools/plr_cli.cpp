// Command-line driver: train, eval, sweep, compare, plot.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "plr/harness.hpp"
#include "plr/plot.hpp"

namespace {

using plr::ExperimentConfig;

int run_seeds(const ExperimentConfig& config) {
  std::cout << config.to_json().dump(2) << '\n';
  for (uint64_t seed : config.seeds) {
    const auto result = plr::run_training(config, seed);
    std::cout << "seed " << seed << ": final test return " << result.final_test_return << '\n';
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Prioritized level replay on the ChainMaze gridworld"};
  app.require_subcommand(1);

  // train
  auto* train = app.add_subcommand("train", "Train one or more seeds");
  std::string config_path;
  std::optional<std::string> metric, prioritization, output;
  std::optional<double> beta, rho;
  std::optional<uint64_t> seed;
  std::optional<int64_t> total_steps;
  bool baseline = false;
  train->add_option("--config", config_path, "JSON experiment config")->required()->check(CLI::ExistingFile);
  train->add_option("--metric", metric, "entropy|min_margin|least_confidence|td_error|gae|value_l1");
  train->add_option("--beta", beta, "rank/proportional temperature");
  train->add_option("--rho", rho, "staleness coefficient");
  train->add_option("--prioritization", prioritization, "rank|proportional|greedy");
  train->add_option("--seed", seed, "train this single seed instead of the config's list");
  train->add_option("--total-steps", total_steps, "override total environment steps");
  train->add_option("--output", output, "override output directory");
  train->add_flag("--baseline", baseline, "uniform direct level sampling");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate a parameter checkpoint on unseen levels");
  std::string checkpoint;
  int episodes = 200;
  int max_tier = plr::kMaxTier;
  uint64_t eval_seed = 0;
  bool greedy = false;
  eval->add_option("--checkpoint", checkpoint, "params.bin")->required()->check(CLI::ExistingFile);
  eval->add_option("--episodes", episodes, "number of test episodes");
  eval->add_option("--max-tier", max_tier, "environment max tier");
  eval->add_option("--seed", eval_seed, "test level / action seed");
  eval->add_flag("--greedy", greedy, "argmax actions instead of sampling");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Run every combination in a grid file");
  std::string grid_path;
  sweep->add_option("--grid", grid_path, "JSON grid: {base, metric, prioritization, beta, rho}")
      ->required()
      ->check(CLI::ExistingFile);

  // compare
  auto* compare = app.add_subcommand("compare", "Welch's t-test on final test returns of two run dirs");
  std::string dir_a, dir_b;
  compare->add_option("dir_a", dir_a)->required()->check(CLI::ExistingDirectory);
  compare->add_option("dir_b", dir_b)->required()->check(CLI::ExistingDirectory);

  // plot
  auto* plot = app.add_subcommand("plot", "Render SVG charts and curriculum CSV from a metrics log");
  std::string log_path;
  std::string plot_dir;
  plot->add_option("log", log_path)->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_dir, "output directory (default: next to the log)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      ExperimentConfig config = ExperimentConfig::load(config_path);
      if (metric) config.replay.metric = plr::parse_metric(*metric);
      if (prioritization) config.replay.prioritization = plr::parse_prioritization(*prioritization);
      if (beta) config.replay.beta = *beta;
      if (rho) config.replay.rho = *rho;
      if (seed) config.seeds = {*seed};
      if (total_steps) config.total_steps = *total_steps;
      if (output) config.output_dir = *output;
      if (baseline) config.baseline = true;
      config.validate();
      return run_seeds(config);
    }
    if (*eval) {
      const auto loaded = plr::load_params(checkpoint);
      const plr::Network net(loaded.config);
      const plr::EnvConfig env{max_tier};
      const auto encoding = plr::encoding_for_input_dim(env, loaded.config.input_dim);
      plr::require(encoding.has_value(), "checkpoint input size does not match --max-tier");
      const plr::ObservationEncoder encoder(env, *encoding);
      plr::TestLevelStream levels(eval_seed);
      plr::Rng rng(eval_seed);
      const auto stats = plr::evaluate_policy(net, encoder, loaded.params, episodes,
                                              [&] { return levels.next(); }, rng, greedy);
      std::cout << nlohmann::json{{"episodes", stats.episodes},
                                  {"mean", stats.mean},
                                  {"stderr", stats.stderr_}}
                       .dump()
                << '\n';
      return 0;
    }
    if (*sweep) {
      std::ifstream in(grid_path);
      const auto grid = nlohmann::json::parse(in);
      const ExperimentConfig base = ExperimentConfig::from_json(grid.value("base", nlohmann::json::object()));
      const auto metrics = grid.value("metric", std::vector<std::string>{std::string(plr::to_string(base.replay.metric))});
      const auto prios = grid.value("prioritization",
                                    std::vector<std::string>{std::string(plr::to_string(base.replay.prioritization))});
      const auto betas = grid.value("beta", std::vector<double>{0.1, 0.5, 1.0, 1.4, 2.0});
      const auto rhos = grid.value("rho", std::vector<double>{0.1, 0.3, 1.0});
      for (const auto& m : metrics) {
        for (const auto& p : prios) {
          for (double b : betas) {
            for (double r : rhos) {
              ExperimentConfig config = base;
              config.replay.metric = plr::parse_metric(m);
              config.replay.prioritization = plr::parse_prioritization(p);
              config.replay.beta = b;
              config.replay.rho = r;
              std::ostringstream name;
              name << m << '_' << p << "_b" << b << "_r" << r;
              config.output_dir = (std::filesystem::path(base.output_dir.empty() ? "sweep" : base.output_dir) /
                                   name.str())
                                      .string();
              config.validate();
              run_seeds(config);
            }
          }
        }
      }
      return 0;
    }
    if (*compare) {
      std::cout << plr::compare_runs(dir_a, dir_b).text();
      return 0;
    }
    if (*plot) {
      const auto records = plr::read_metrics_log(log_path);
      const std::filesystem::path dir =
          plot_dir.empty() ? std::filesystem::path(log_path).parent_path() : std::filesystem::path(plot_dir);
      plr::write_plot_files(plr::emit_plots(records), dir.empty() ? "." : dir);
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

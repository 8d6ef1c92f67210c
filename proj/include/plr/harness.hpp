#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "plr/env.hpp"
#include "plr/features.hpp"
#include "plr/learner.hpp"
#include "plr/rollout.hpp"
#include "plr/sampler.hpp"
#include "plr/stats.hpp"

namespace plr {

struct ExperimentConfig {
  EnvConfig env;
  int n_train_levels = 200;
  bool baseline = false;  // direct uniform level sampling instead of replay
  ReplayConfig replay;
  bool flip_uncertainty_sign = false;
  UpdateConfig update;
  std::vector<int> hidden = {64, 64};
  InputEncoding encoding = InputEncoding::kEgocentric;
  int64_t total_steps = 2'000'000;
  int64_t eval_every = 100'000;
  int n_test_episodes = 100;
  bool eval_greedy = false;
  int sample_window = 100;  // episodes in the sampled-difficulty frequency window
  std::vector<uint64_t> seeds = {0, 1, 2, 3, 4};
  std::string output_dir;

  void validate() const;
  ScoringOptions scoring() const { return {update.gamma, update.lambda, flip_uncertainty_sign}; }
  ObservationEncoder encoder() const { return {env, encoding}; }
  NetworkConfig network() const { return {encoder().size(), hidden, kNumActions, false}; }

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::filesystem::path& path);
};

/// Training level ids: 0 .. n-1. Test ids always have the top bit set, so
/// the two sets are disjoint by construction.
std::vector<LevelId> training_levels(int n);

class TestLevelStream {
 public:
  explicit TestLevelStream(uint64_t seed) : rng_(splitmix64(seed ^ 0x7e57'1e7e'15ULL)) {}
  LevelId next() { return (uint64_t{1} << 63) | rng_(); }

 private:
  Rng rng_;
};

struct EvalStats {
  double mean = 0.0;
  double stderr_ = 0.0;
  int episodes = 0;
};

using ActionPolicy = std::function<Action(const ChainMaze&)>;

/// Plays `n_episodes` episodes, one per level drawn from `next_level`.
EvalStats evaluate_policy(int n_episodes, const std::function<LevelId()>& next_level, int max_tier,
                          const ActionPolicy& policy);

/// Network policy; samples actions unless `greedy`.
EvalStats evaluate_policy(const Network& net, const ObservationEncoder& encoder, std::span<const float> params,
                          int n_episodes, const std::function<LevelId()>& next_level, Rng& rng,
                          bool greedy = false);

/// The encoding whose input size matches a checkpoint's network, if any.
std::optional<InputEncoding> encoding_for_input_dim(const EnvConfig& env, int input_dim);

struct TrainingResult {
  std::vector<nlohmann::json> records;  // the metrics log, in order
  std::vector<float> params;
  ScoreTable table;
  double final_test_return = 0.0;
};

/// One seed of the training loop: alternate collect_rollout and ppo_update
/// until total_steps. When config.output_dir is set, writes
/// <output_dir>/seed_<seed>/{metrics.jsonl, timing.jsonl, curriculum.csv,
/// params.bin, score_table.jsonl}.
TrainingResult run_training(const ExperimentConfig& config, uint64_t seed);

/// Serializes one metrics record exactly as it appears in metrics.jsonl.
std::string to_log_line(const nlohmann::json& record);

std::vector<nlohmann::json> read_metrics_log(const std::filesystem::path& path);

struct ComparisonReport {
  WelchResult welch;
  std::vector<double> final_a;
  std::vector<double> final_b;
  std::string text() const;
};

/// Welch's t-test on the final test returns of each seed in two run directories.
ComparisonReport compare_runs(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b);
ComparisonReport compare_logs(const std::vector<std::vector<nlohmann::json>>& logs_a,
                              const std::vector<std::vector<nlohmann::json>>& logs_b);

}  // namespace plr

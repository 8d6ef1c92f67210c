#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "plr/env.hpp"
#include "plr/features.hpp"
#include "plr/learner.hpp"
#include "plr/sampler.hpp"
#include "plr/scoring.hpp"

namespace plr {

enum class SamplingMode {
  kPrioritized,  // prioritized level replay
  kUniform,      // direct level sampling from the training set
};

/// Owns the training level set and decides which level each new episode
/// plays. In uniform mode no score table distribution is ever built.
class LevelCurriculum {
 public:
  LevelCurriculum(std::vector<LevelId> train_levels, ReplayConfig replay, ScoringOptions scoring,
                  SamplingMode mode, int max_tier, uint64_t seed);

  SamplingMode mode() const { return mode_; }
  bool scores_levels() const { return mode_ == SamplingMode::kPrioritized; }
  const ReplayConfig& replay_config() const { return replay_; }
  const ScoringOptions& scoring() const { return scoring_; }
  int max_tier() const { return max_tier_; }
  std::span<const LevelId> train_levels() const { return train_levels_; }

  ScoreTable& table() { return table_; }
  const ScoreTable& table() const { return table_; }
  int64_t levels_sampled() const { return sampled_; }
  bool warm_start_complete() const;

  SampledLevel next_level();
  const LevelSpec& level(LevelId id);

  /// Probability of drawing each training level on a replay decision,
  /// indexed like train_levels(). Levels not yet seen get 0.
  std::vector<double> level_probabilities() const;

  /// Probability mass per difficulty tier; entry k is tier k + 1.
  std::vector<double> tier_mass() const;

 private:
  std::vector<LevelId> train_levels_;
  ReplayConfig replay_;
  ScoringOptions scoring_;
  SamplingMode mode_;
  int max_tier_;
  Rng rng_;
  ScoreTable table_;
  int64_t sampled_ = 0;
  std::unordered_map<LevelId, LevelSpec> cache_;
};

struct CompletedEpisode {
  LevelId level = 0;
  int difficulty = 0;
  int length = 0;
  double ret = 0.0;  // undiscounted, unnormalized
};

/// T steps x N actors of experience, indexed [t * actors + k].
struct RolloutBuffer {
  int steps = 0;
  int actors = 0;
  int obs_dim = 0;
  int n_actions = 0;
  std::vector<uint8_t> observations;  // encoded network inputs
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> raw_rewards;
  std::vector<double> rewards;  // what the learner sees (normalized when enabled)
  std::vector<double> values;
  std::vector<uint8_t> dones;
  std::vector<double> policy;  // [t * actors + k][n_actions]
  std::vector<LevelId> levels;
  std::vector<double> last_values;  // V of each actor's state after the final step

  std::vector<CompletedEpisode> episodes;
  std::vector<int> sampled_difficulties;  // one entry per level-sampling event

  size_t index(int t, int k) const { return static_cast<size_t>(t) * actors + k; }
  size_t size() const { return actions.size(); }

  /// Actor k's column as a trajectory; `from`..`to` inclusive.
  Trajectory segment(int k, int from, int to, double bootstrap) const;
};

/// One environment instance plus the bookkeeping for its current episode.
struct Actor {
  explicit Actor(EnvConfig config) : env(config) {}

  ChainMaze env;
  std::optional<SampledLevel> level;  // nullopt until the first episode starts
  double episode_return = 0.0;
};

struct RolloutContext {
  const Network* net = nullptr;
  const ObservationEncoder* encoder = nullptr;
  std::span<const float> params;
  RewardNormalizer* normalizer = nullptr;  // optional
  Rng* rng = nullptr;
};

/// Collects `steps` steps from every actor. Episodes that end mid-rollout
/// finalize their level's score (merging any stored partial score) and
/// immediately draw the next level; episodes still running at the end store
/// their segment in the partial-score buffer. Sampler access happens in
/// ascending actor order at each step.
RolloutBuffer collect_rollout(LevelCurriculum& curriculum, std::span<Actor> actors,
                              const RolloutContext& ctx, int steps);

struct EpisodeResult {
  Trajectory trajectory;
  SampledLevel level;
  double ret = 0.0;
};

/// Plays one full episode on the next sampled level and assigns its score.
EpisodeResult collect_episode(LevelCurriculum& curriculum, ChainMaze& env, const Network& net,
                              const ObservationEncoder& encoder, std::span<const float> params, Rng& rng);

/// Turns a rollout into PPO samples with GAE targets.
PpoBatch make_ppo_batch(const RolloutBuffer& buffer, double gamma, double lambda,
                        bool normalize_advantages);

}  // namespace plr

#include "plr/rollout.hpp"

#include <algorithm>
#include <cmath>

#include "plr/error.hpp"

namespace plr {

namespace {

size_t sample_action(std::span<const float> probs, Rng& rng) {
  std::vector<double> p(probs.begin(), probs.end());
  return sample_index(p, rng);
}

}  // namespace

// ---------------------------------------------------------------------------
// LevelCurriculum

LevelCurriculum::LevelCurriculum(std::vector<LevelId> train_levels, ReplayConfig replay,
                                 ScoringOptions scoring, SamplingMode mode, int max_tier, uint64_t seed)
    : train_levels_(std::move(train_levels)),
      replay_(replay),
      scoring_(scoring),
      mode_(mode),
      max_tier_(max_tier),
      rng_(seed) {
  require(!train_levels_.empty(), "training level set must be nonempty");
  replay_.validate();
}

bool LevelCurriculum::warm_start_complete() const {
  if (mode_ == SamplingMode::kUniform) return sampled_ >= static_cast<int64_t>(train_levels_.size());
  return table_.size() == train_levels_.size();
}

SampledLevel LevelCurriculum::next_level() {
  ++sampled_;
  if (mode_ == SamplingMode::kPrioritized) {
    return sample_next_level(table_, replay_, train_levels_, rng_);
  }
  SampledLevel out;
  out.index = rng_.below(train_levels_.size());
  out.id = train_levels_[out.index];
  return out;
}

const LevelSpec& LevelCurriculum::level(LevelId id) {
  auto it = cache_.find(id);
  if (it == cache_.end()) it = cache_.emplace(id, generate_level(id, max_tier_)).first;
  return it->second;
}

std::vector<double> LevelCurriculum::level_probabilities() const {
  const size_t n = train_levels_.size();
  if (mode_ == SamplingMode::kUniform || table_.empty()) {
    return std::vector<double>(n, 1.0 / static_cast<double>(n));
  }
  const Distribution dist = replay_distribution(table_, replay_);
  std::vector<double> out(n, 0.0);
  for (size_t j = 0; j < n; ++j) {
    if (const auto i = table_.index_of(train_levels_[j])) out[j] = dist.probs[*i];
  }
  return out;
}

std::vector<double> LevelCurriculum::tier_mass() const {
  const auto probs = level_probabilities();
  std::vector<double> mass(static_cast<size_t>(max_tier_), 0.0);
  for (size_t j = 0; j < probs.size(); ++j) {
    mass[static_cast<size_t>(difficulty_of(train_levels_[j], max_tier_) - 1)] += probs[j];
  }
  return mass;
}

// ---------------------------------------------------------------------------
// Rollouts

Trajectory RolloutBuffer::segment(int k, int from, int to, double bootstrap) const {
  require(from >= 0 && from <= to && to < steps && k >= 0 && k < actors, "invalid segment bounds");
  Trajectory traj;
  traj.n_actions = n_actions;
  for (int t = from; t <= to; ++t) {
    const size_t i = index(t, k);
    traj.actions.push_back(actions[i]);
    traj.log_probs.push_back(log_probs[i]);
    traj.rewards.push_back(rewards[i]);
    traj.values.push_back(values[i]);
    traj.dones.push_back(dones[i] != 0);
    traj.policy.insert(traj.policy.end(), policy.begin() + static_cast<ptrdiff_t>(i * n_actions),
                       policy.begin() + static_cast<ptrdiff_t>((i + 1) * n_actions));
  }
  traj.bootstrap_value = bootstrap;
  return traj;
}

RolloutBuffer collect_rollout(LevelCurriculum& curriculum, std::span<Actor> actors,
                              const RolloutContext& ctx, int steps) {
  require(ctx.net != nullptr && ctx.encoder != nullptr && ctx.rng != nullptr, "rollout context is incomplete");
  require(steps > 0 && !actors.empty(), "rollout needs at least one step and one actor");
  const Network& net = *ctx.net;
  const int n = static_cast<int>(actors.size());
  const int obs_dim = net.config().input_dim;
  const int n_actions = net.config().n_actions;
  const ObservationEncoder& encoder = *ctx.encoder;
  require(encoder.size() == obs_dim, "encoder and network shapes differ");
  require(actors[0].env.config().obs_size() == encoder.env().obs_size(), "environment and encoder shapes differ");
  Observation raw(static_cast<size_t>(encoder.env().obs_size()));

  RolloutBuffer buf;
  buf.steps = steps;
  buf.actors = n;
  buf.obs_dim = obs_dim;
  buf.n_actions = n_actions;
  const size_t total = static_cast<size_t>(steps) * n;
  buf.observations.resize(total * obs_dim);
  buf.actions.resize(total);
  buf.log_probs.resize(total);
  buf.raw_rewards.resize(total);
  buf.rewards.resize(total);
  buf.values.resize(total);
  buf.dones.resize(total);
  buf.policy.resize(total * n_actions);
  buf.levels.resize(total);
  buf.last_values.resize(static_cast<size_t>(n));

  auto ws = net.make_workspace();
  std::vector<int> segment_start(static_cast<size_t>(n), 0);
  ScoreTable& table = curriculum.table();

  auto begin_episode = [&](Actor& actor) {
    actor.level = curriculum.next_level();
    buf.sampled_difficulties.push_back(difficulty_of(actor.level->id, curriculum.max_tier()));
    actor.env.reset(curriculum.level(actor.level->id));
    actor.episode_return = 0.0;
  };
  auto finish_segment = [&](int k, int to, double bootstrap) -> std::optional<PartialScore> {
    const Trajectory seg = buf.segment(k, segment_start[k], to, bootstrap);
    const double score = score_trajectory(seg, curriculum.replay_config().metric, curriculum.scoring());
    const auto steps_in_seg = static_cast<int64_t>(seg.length());
    const auto& prev = table.partial()[actors[k].level->index];
    if (!prev) return PartialScore{score, steps_in_seg};
    return PartialScore{combine_scores(prev->score, prev->steps, score, steps_in_seg),
                        prev->steps + steps_in_seg};
  };

  for (auto& actor : actors) {
    if (!actor.level || actor.env.done()) begin_episode(actor);
  }

  for (int t = 0; t < steps; ++t) {
    for (int k = 0; k < n; ++k) {
      Actor& actor = actors[k];
      const size_t i = buf.index(t, k);
      const std::span<uint8_t> obs(buf.observations.data() + i * obs_dim, static_cast<size_t>(obs_dim));
      actor.env.observe(raw);
      encoder.encode(raw, obs);
      std::copy(obs.begin(), obs.end(), ws.activations[0].begin());
      net.forward(ctx.params, ws);

      const size_t a = sample_action(ws.probs, *ctx.rng);
      const StepResult result = actor.env.step(static_cast<Action>(a));
      actor.episode_return += result.reward;

      buf.actions[i] = static_cast<int>(a);
      buf.log_probs[i] = ws.log_probs[a];
      buf.values[i] = ws.value;
      std::copy(ws.probs.begin(), ws.probs.end(), buf.policy.begin() + static_cast<ptrdiff_t>(i * n_actions));
      buf.raw_rewards[i] = result.reward;
      buf.rewards[i] = ctx.normalizer ? ctx.normalizer->normalize(k, result.reward, result.done) : result.reward;
      buf.dones[i] = result.done ? 1 : 0;
      buf.levels[i] = actor.level->id;

      if (result.done) {
        buf.episodes.push_back({actor.level->id, actor.env.level().difficulty(), actor.env.steps(),
                                actor.episode_return});
        if (curriculum.scores_levels()) {
          const auto merged = finish_segment(k, t, 0.0);
          update_level_score(table, actor.level->index, merged->score);
        }
        begin_episode(actor);
        segment_start[k] = t + 1;
      }
    }
  }

  std::vector<uint8_t> obs(static_cast<size_t>(obs_dim));
  for (int k = 0; k < n; ++k) {
    actors[k].env.observe(raw);
    encoder.encode(raw, obs);
    std::copy(obs.begin(), obs.end(), ws.activations[0].begin());
    net.forward(ctx.params, ws);
    buf.last_values[k] = ws.value;
  }
  if (curriculum.scores_levels()) {
    for (int k = 0; k < n; ++k) {
      if (segment_start[k] >= steps) continue;
      table.set_partial(actors[k].level->index, finish_segment(k, steps - 1, buf.last_values[k]));
    }
  }
  return buf;
}

EpisodeResult collect_episode(LevelCurriculum& curriculum, ChainMaze& env, const Network& net,
                              const ObservationEncoder& encoder, std::span<const float> params, Rng& rng) {
  EpisodeResult out;
  out.level = curriculum.next_level();
  env.reset(curriculum.level(out.level.id));
  auto ws = net.make_workspace();
  Trajectory& traj = out.trajectory;
  traj.n_actions = net.config().n_actions;
  while (!env.done()) {
    Observation obs(static_cast<size_t>(encoder.size()));
    encoder.encode(env.observe(), obs);
    std::copy(obs.begin(), obs.end(), ws.activations[0].begin());
    net.forward(params, ws);
    const size_t a = sample_action(ws.probs, rng);
    const StepResult result = env.step(static_cast<Action>(a));
    traj.observations.push_back(std::move(obs));
    traj.actions.push_back(static_cast<int>(a));
    traj.log_probs.push_back(ws.log_probs[a]);
    traj.rewards.push_back(result.reward);
    traj.values.push_back(ws.value);
    traj.dones.push_back(result.done);
    traj.policy.insert(traj.policy.end(), ws.probs.begin(), ws.probs.end());
    out.ret += result.reward;
  }
  traj.bootstrap_value = 0.0;
  if (curriculum.scores_levels()) {
    const double score = score_trajectory(traj, curriculum.replay_config().metric, curriculum.scoring());
    update_level_score(curriculum.table(), out.level.index, score);
  }
  return out;
}

PpoBatch make_ppo_batch(const RolloutBuffer& buffer, double gamma, double lambda,
                        bool normalize_advantages) {
  PpoBatch batch;
  batch.obs_dim = buffer.obs_dim;
  const size_t total = buffer.size();
  batch.observations.assign(buffer.observations.begin(), buffer.observations.end());
  batch.actions = buffer.actions;
  batch.old_log_probs = buffer.log_probs;
  batch.advantages.resize(total);
  batch.returns.resize(total);
  for (int k = 0; k < buffer.actors; ++k) {
    const Trajectory column = buffer.segment(k, 0, buffer.steps - 1, buffer.last_values[k]);
    const auto adv = compute_gae(column, gamma, lambda);
    for (int t = 0; t < buffer.steps; ++t) {
      const size_t i = buffer.index(t, k);
      batch.advantages[i] = adv[static_cast<size_t>(t)];
      batch.returns[i] = buffer.values[i] + adv[static_cast<size_t>(t)];
    }
  }
  if (normalize_advantages) normalize_in_place(batch.advantages);
  return batch;
}

}  // namespace plr

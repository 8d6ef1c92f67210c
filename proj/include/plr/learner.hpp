#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "plr/network.hpp"
#include "plr/rng.hpp"
#include "plr/scoring.hpp"

namespace plr {

using Network = ActorCritic<float>;

struct UpdateConfig {
  double gamma = 0.999;
  double lambda = 0.95;
  int rollout_length = 256;
  int epochs = 4;
  int minibatches = 8;
  double clip = 0.2;
  int workers = 8;
  double learning_rate = 7e-4;
  double adam_epsilon = 1e-5;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;  // <= 0 disables clipping
  bool reward_normalization = true;
  bool advantage_normalization = true;

  void validate() const;
};

/// Flattened on-policy samples ready for the PPO update.
struct PpoBatch {
  int obs_dim = 0;
  std::vector<float> observations;  // [size][obs_dim]
  std::vector<int> actions;
  std::vector<double> old_log_probs;
  std::vector<double> advantages;
  std::vector<double> returns;  // value targets

  size_t size() const { return actions.size(); }
  std::span<const float> observation(size_t i) const {
    return {observations.data() + i * obs_dim, static_cast<size_t>(obs_dim)};
  }
};

struct PolicyOutput {
  std::vector<double> probs;
  double value = 0.0;
};

PolicyOutput forward(const Network& net, std::span<const float> params, std::span<const uint8_t> obs);

struct Targets {
  std::vector<double> advantages;
  std::vector<double> value_targets;
};

/// GAE advantages and value targets V + A for each trajectory, concatenated
/// in order. Advantages are standardized over the whole batch when
/// `normalize_advantages` is set; targets always use the raw advantages.
Targets compute_targets(std::span<const Trajectory> batch, double gamma, double lambda,
                        bool normalize_advantages);

void normalize_in_place(std::vector<double>& xs);

struct LossTerms {
  double total = 0.0;
  double policy = 0.0;      // clipped surrogate, negated
  double value = 0.0;       // mean squared error
  double entropy = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

struct LossWeights {
  double clip = 0.2;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
};

/// PPO loss (to minimize) over the samples `indices`:
///   -min(r A, clip(r, 1-e, 1+e) A) + value_coef (V - target)^2 - entropy_coef H
/// averaged over the samples. When `grad` is nonempty the exact gradient is
/// accumulated into it.
template <typename Scalar>
LossTerms ppo_loss(const ActorCritic<Scalar>& net, std::span<const Scalar> params,
                   const PpoBatch& batch, std::span<const size_t> indices, const LossWeights& w,
                   std::span<Scalar> grad, typename ActorCritic<Scalar>::Workspace& ws) {
  LossTerms terms;
  const double inv_n = 1.0 / static_cast<double>(indices.size());
  const int n_actions = net.config().n_actions;
  std::vector<Scalar> d_logits(n_actions);
  for (size_t i : indices) {
    const auto obs = batch.observation(i);
    std::copy(obs.begin(), obs.end(), ws.activations[0].begin());
    net.forward(params, ws);

    const int a = batch.actions[i];
    const double adv = batch.advantages[i];
    const double log_ratio = static_cast<double>(ws.log_probs[a]) - batch.old_log_probs[i];
    const double ratio = std::exp(log_ratio);
    const double clipped = std::clamp(ratio, 1.0 - w.clip, 1.0 + w.clip);
    const double surr1 = ratio * adv;
    const double surr2 = clipped * adv;
    double entropy = 0.0;
    for (int j = 0; j < n_actions; ++j) entropy -= static_cast<double>(ws.probs[j] * ws.log_probs[j]);
    const double value_error = static_cast<double>(ws.value) - batch.returns[i];

    terms.policy += -std::min(surr1, surr2) * inv_n;
    terms.value += value_error * value_error * inv_n;
    terms.entropy += entropy * inv_n;
    terms.approx_kl += (ratio - 1.0 - log_ratio) * inv_n;
    if (std::abs(ratio - 1.0) > w.clip) terms.clip_fraction += inv_n;

    if (grad.empty()) continue;
    // d(-min(surr1, surr2)) / d log pi(a|s)
    double d_logp = 0.0;
    if (surr1 <= surr2) {
      d_logp = -adv * ratio;
    } else if (ratio > 1.0 - w.clip && ratio < 1.0 + w.clip) {
      d_logp = -adv * ratio;
    }
    for (int j = 0; j < n_actions; ++j) {
      const double p = static_cast<double>(ws.probs[j]);
      const double onehot = j == a ? 1.0 : 0.0;
      // dH/dz_j = -p_j (log p_j + H)
      const double d_entropy = -p * (static_cast<double>(ws.log_probs[j]) + entropy);
      d_logits[j] = static_cast<Scalar>((d_logp * (onehot - p) - w.entropy_coef * d_entropy) * inv_n);
    }
    const auto d_value = static_cast<Scalar>(2.0 * w.value_coef * value_error * inv_n);
    net.backward(params, ws, d_logits, d_value, grad);
  }
  terms.total = terms.policy + w.value_coef * terms.value - w.entropy_coef * terms.entropy;
  return terms;
}

class NonFiniteLoss : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adam with bias correction.
class Adam {
 public:
  Adam() = default;
  Adam(size_t n, double learning_rate, double epsilon, double beta1 = 0.9, double beta2 = 0.999);

  void step(std::span<float> params, std::span<const float> grad);
  int64_t steps() const { return t_; }

 private:
  std::vector<float> m_;
  std::vector<float> v_;
  double lr_ = 0.0;
  double eps_ = 0.0;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  int64_t t_ = 0;
};

struct UpdateDiagnostics {
  LossTerms mean_terms;  // averaged over every minibatch step
  double grad_norm = 0.0;
  int minibatch_steps = 0;
};

/// Epochs x minibatches of clipped-surrogate PPO. `params` is only modified
/// when every minibatch loss was finite; otherwise NonFiniteLoss is thrown
/// and the parameters are left as they were.
UpdateDiagnostics ppo_update(const Network& net, std::vector<float>& params, Adam& optimizer,
                             const PpoBatch& batch, const UpdateConfig& config, Rng& rng);

/// Divides rewards by the running standard deviation of each stream's
/// discounted return, then clips to [-clip, clip]. Sparse rewards make the
/// early std tiny, so unclipped first successes can be enormous.
class RewardNormalizer {
 public:
  RewardNormalizer() = default;
  RewardNormalizer(int streams, double gamma, double clip = 10.0, double epsilon = 1e-8);

  double normalize(int stream, double reward, bool done);
  double return_std() const;
  int64_t count() const { return count_; }

 private:
  std::vector<double> returns_;
  double gamma_ = 0.999;
  double clip_ = 10.0;
  double epsilon_ = 1e-8;
  int64_t count_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

// Parameter checkpoint: "PLRP", u32 version, u32 tensor count, per tensor
// u32 rank + u32 dims, then every tensor's float32 data in order. All
// integers and floats little-endian.
void save_params(const std::filesystem::path& path, const Network& net, std::span<const float> params);

struct LoadedParams {
  NetworkConfig config;
  std::vector<float> params;
};

LoadedParams load_params(const std::filesystem::path& path);

}  // namespace plr

#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace plr {

/// Per-trajectory learning-potential scores. The string forms are stable
/// identifiers used on the command line and in config files.
enum class ScoreMetric {
  kEntropy,          // "entropy": mean of sum_a pi log pi
  kMinMargin,        // "min_margin": mean top-1 minus top-2 probability
  kLeastConfidence,  // "least_confidence": mean 1 - max pi
  kTdError,          // "td_error": mean |delta_t|
  kGae,              // "gae": mean signed GAE
  kValueL1,          // "value_l1": mean |GAE|
};

std::string_view to_string(ScoreMetric metric);
ScoreMetric parse_metric(std::string_view name);
bool is_policy_metric(ScoreMetric metric);

/// One episode or rollout segment. Per-step arrays have length `length()`;
/// `policy` is row-major [length x n_actions]. `observations` may be left
/// empty when only scores are needed.
struct Trajectory {
  int n_actions = 0;
  std::vector<std::vector<uint8_t>> observations;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> rewards;
  std::vector<double> values;
  std::vector<bool> dones;
  std::vector<double> policy;
  double bootstrap_value = 0.0;  // V(s_T); ignored when the last step is done

  size_t length() const { return rewards.size(); }
  std::span<const double> policy_at(size_t t) const {
    return {policy.data() + t * n_actions, static_cast<size_t>(n_actions)};
  }

  /// Throws ContractViolation on inconsistent lengths or non-finite values.
  void validate() const;
};

std::vector<double> td_errors(const Trajectory& traj, double gamma);

/// Backward-recursion GAE with termination masking.
std::vector<double> compute_gae(const Trajectory& traj, double gamma, double lambda);

struct ScoringOptions {
  double gamma = 0.999;
  double lambda = 0.95;
  // Negates the entropy and min-margin rows so that uncertain policies score
  // high. Off by default: those rows are used exactly as tabulated.
  bool flip_uncertainty_sign = false;
};

double score_trajectory(const Trajectory& traj, ScoreMetric metric, const ScoringOptions& opts);

/// Score accumulated over the unfinished part of an episode that crossed a
/// rollout boundary.
struct PartialScore {
  double score = 0.0;
  int64_t steps = 0;
};

/// Step-weighted mean of an earlier partial score and the score of the
/// episode's final segment.
double merge_partial_score(const PartialScore& partial, const Trajectory& tail, ScoreMetric metric,
                           const ScoringOptions& opts);

/// Weighted-mean combination of two segment scores.
double combine_scores(double score_a, int64_t steps_a, double score_b, int64_t steps_b);

}  // namespace plr

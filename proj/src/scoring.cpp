#include "plr/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "plr/error.hpp"

namespace plr {

namespace {

constexpr std::pair<ScoreMetric, std::string_view> kMetricNames[] = {
    {ScoreMetric::kEntropy, "entropy"},
    {ScoreMetric::kMinMargin, "min_margin"},
    {ScoreMetric::kLeastConfidence, "least_confidence"},
    {ScoreMetric::kTdError, "td_error"},
    {ScoreMetric::kGae, "gae"},
    {ScoreMetric::kValueL1, "value_l1"},
};

double mean(const std::vector<double>& xs) {
  double sum = 0.0;
  for (double x : xs) sum += x;
  return sum / static_cast<double>(xs.size());
}

}  // namespace

std::string_view to_string(ScoreMetric metric) {
  for (const auto& [m, name] : kMetricNames) {
    if (m == metric) return name;
  }
  return "unknown";
}

ScoreMetric parse_metric(std::string_view name) {
  for (const auto& [m, n] : kMetricNames) {
    if (n == name) return m;
  }
  throw ContractViolation("unknown score metric: " + std::string(name));
}

bool is_policy_metric(ScoreMetric metric) {
  return metric == ScoreMetric::kEntropy || metric == ScoreMetric::kMinMargin ||
         metric == ScoreMetric::kLeastConfidence;
}

void Trajectory::validate() const {
  const size_t n = rewards.size();
  require(n >= 1, "trajectory must have at least one step");
  require(values.size() == n && dones.size() == n, "trajectory arrays have mismatched lengths");
  require(actions.empty() || actions.size() == n, "trajectory actions have wrong length");
  require(log_probs.empty() || log_probs.size() == n, "trajectory log_probs have wrong length");
  require(policy.empty() || (n_actions > 0 && policy.size() == n * n_actions),
          "trajectory policy has wrong shape");
  require(std::isfinite(bootstrap_value), "non-finite bootstrap value");
  for (size_t t = 0; t < n; ++t) {
    require(std::isfinite(rewards[t]) && std::isfinite(values[t]),
            "non-finite reward or value in trajectory");
  }
  for (double p : policy) require(std::isfinite(p) && p >= 0.0, "invalid policy probability");
}

std::vector<double> td_errors(const Trajectory& traj, double gamma) {
  traj.validate();
  const size_t n = traj.length();
  std::vector<double> delta(n);
  for (size_t t = 0; t < n; ++t) {
    const double next = t + 1 < n ? traj.values[t + 1] : traj.bootstrap_value;
    const double mask = traj.dones[t] ? 0.0 : 1.0;
    delta[t] = traj.rewards[t] + gamma * next * mask - traj.values[t];
  }
  return delta;
}

std::vector<double> compute_gae(const Trajectory& traj, double gamma, double lambda) {
  require(gamma >= 0.0 && gamma <= 1.0, "gamma must lie in [0, 1]");
  require(lambda >= 0.0 && lambda <= 1.0, "lambda must lie in [0, 1]");
  std::vector<double> adv = td_errors(traj, gamma);
  double running = 0.0;
  for (size_t t = adv.size(); t-- > 0;) {
    const double mask = traj.dones[t] ? 0.0 : 1.0;
    running = adv[t] + gamma * lambda * mask * running;
    adv[t] = running;
  }
  return adv;
}

double score_trajectory(const Trajectory& traj, ScoreMetric metric, const ScoringOptions& opts) {
  traj.validate();
  const size_t n = traj.length();
  const double sign = opts.flip_uncertainty_sign ? -1.0 : 1.0;
  std::vector<double> per_step(n);
  switch (metric) {
    case ScoreMetric::kEntropy:
    case ScoreMetric::kMinMargin:
    case ScoreMetric::kLeastConfidence: {
      require(!traj.policy.empty(), "policy metrics need the per-step policy");
      if (metric == ScoreMetric::kMinMargin) {
        require(traj.n_actions >= 2, "min-margin needs at least two actions");
      }
      for (size_t t = 0; t < n; ++t) {
        const auto pi = traj.policy_at(t);
        if (metric == ScoreMetric::kEntropy) {
          double s = 0.0;
          for (double p : pi) {
            if (p > 0.0) s += p * std::log(p);
          }
          per_step[t] = sign * s;
        } else if (metric == ScoreMetric::kMinMargin) {
          double top1 = -1.0;
          double top2 = -1.0;
          for (double p : pi) {
            if (p > top1) {
              top2 = top1;
              top1 = p;
            } else if (p > top2) {
              top2 = p;
            }
          }
          per_step[t] = sign * (top1 - top2);
        } else {
          per_step[t] = 1.0 - *std::max_element(pi.begin(), pi.end());
        }
      }
      break;
    }
    case ScoreMetric::kTdError:
      per_step = td_errors(traj, opts.gamma);
      for (double& d : per_step) d = std::abs(d);
      break;
    case ScoreMetric::kGae:
      per_step = compute_gae(traj, opts.gamma, opts.lambda);
      break;
    case ScoreMetric::kValueL1:
      per_step = compute_gae(traj, opts.gamma, opts.lambda);
      for (double& a : per_step) a = std::abs(a);
      break;
  }
  return mean(per_step);
}

double combine_scores(double score_a, int64_t steps_a, double score_b, int64_t steps_b) {
  require(steps_a >= 0 && steps_b >= 0 && steps_a + steps_b > 0, "step counts must be positive");
  const double na = static_cast<double>(steps_a);
  const double nb = static_cast<double>(steps_b);
  return (score_a * na + score_b * nb) / (na + nb);
}

double merge_partial_score(const PartialScore& partial, const Trajectory& tail, ScoreMetric metric,
                           const ScoringOptions& opts) {
  require(partial.steps >= 1, "partial score must cover at least one step");
  const double tail_score = score_trajectory(tail, metric, opts);
  return combine_scores(partial.score, partial.steps, tail_score,
                        static_cast<int64_t>(tail.length()));
}

}  // namespace plr

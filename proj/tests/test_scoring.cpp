#include <doctest.h>

#include <cmath>
#include <vector>

#include "plr/error.hpp"
#include "plr/rng.hpp"
#include "plr/scoring.hpp"

using namespace plr;

namespace {

Trajectory with_policy(std::vector<double> pi, size_t steps) {
  Trajectory traj;
  traj.n_actions = static_cast<int>(pi.size());
  for (size_t t = 0; t < steps; ++t) {
    traj.rewards.push_back(0.0);
    traj.values.push_back(0.0);
    traj.dones.push_back(false);
    traj.policy.insert(traj.policy.end(), pi.begin(), pi.end());
  }
  return traj;
}

Trajectory random_trajectory(Rng& rng, size_t steps, bool terminal) {
  Trajectory traj;
  traj.n_actions = 4;
  for (size_t t = 0; t < steps; ++t) {
    traj.rewards.push_back(rng.uniform(-1.0, 1.0));
    traj.values.push_back(rng.uniform(-2.0, 2.0));
    traj.dones.push_back(terminal && t + 1 == steps);
    double total = 0.0;
    std::vector<double> pi(4);
    for (double& p : pi) total += (p = rng.uniform(0.01, 1.0));
    for (double p : pi) traj.policy.push_back(p / total);
  }
  traj.bootstrap_value = rng.uniform(-2.0, 2.0);
  return traj;
}

// Independent oracle: the lambda-weighted average of every k-step advantage
// estimate, truncated at the end of the segment (the remaining weight goes
// to the longest estimate). Termination only occurs on the final step.
std::vector<double> brute_force_gae(const Trajectory& traj, double gamma, double lambda) {
  const size_t n = traj.length();
  const bool terminal = traj.dones.back();
  auto value_at = [&](size_t t) {
    if (t < n) return traj.values[t];
    return terminal ? 0.0 : traj.bootstrap_value;
  };
  std::vector<double> out(n);
  for (size_t t = 0; t < n; ++t) {
    const size_t horizon = n - t;
    double total = 0.0;
    for (size_t k = 1; k <= horizon; ++k) {
      double estimate = -traj.values[t];
      for (size_t l = 0; l < k; ++l) estimate += std::pow(gamma, static_cast<double>(l)) * traj.rewards[t + l];
      estimate += std::pow(gamma, static_cast<double>(k)) * value_at(t + k);
      const double weight = k < horizon ? (1.0 - lambda) * std::pow(lambda, static_cast<double>(k - 1))
                                        : std::pow(lambda, static_cast<double>(horizon - 1));
      total += weight * estimate;
    }
    out[t] = total;
  }
  return out;
}

const ScoringOptions kUnit{1.0, 1.0, false};

}  // namespace

TEST_CASE("GAE hand example") {
  Trajectory traj;
  traj.rewards = {0.0, 1.0};
  traj.values = {0.5, 0.5};
  traj.dones = {false, true};
  const auto delta = td_errors(traj, 1.0);
  CHECK(delta[0] == doctest::Approx(0.0));
  CHECK(delta[1] == doctest::Approx(0.5));
  const auto adv = compute_gae(traj, 1.0, 1.0);
  CHECK(adv[0] == doctest::Approx(0.5));
  CHECK(adv[1] == doctest::Approx(0.5));
  CHECK(score_trajectory(traj, ScoreMetric::kValueL1, kUnit) == doctest::Approx(0.5));
  CHECK(score_trajectory(traj, ScoreMetric::kTdError, kUnit) == doctest::Approx(0.25));
  CHECK(score_trajectory(traj, ScoreMetric::kGae, kUnit) == doctest::Approx(0.5));
}

TEST_CASE("GAE matches the k-step oracle") {
  Rng rng(42);
  for (int trial = 0; trial < 500; ++trial) {
    const size_t steps = 1 + rng.below(6);
    const Trajectory traj = random_trajectory(rng, steps, rng.below(2) == 0);
    const double gamma = rng.uniform(0.5, 1.0);
    const double lambda = rng.uniform();
    const auto fast = compute_gae(traj, gamma, lambda);
    const auto slow = brute_force_gae(traj, gamma, lambda);
    for (size_t t = 0; t < steps; ++t) CHECK(std::abs(fast[t] - slow[t]) <= 1e-10);
  }
}

TEST_CASE("lambda = 0 collapses GAE to the 1-step TD error") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Trajectory traj = random_trajectory(rng, 1 + rng.below(20), rng.below(2) == 0);
    CHECK(compute_gae(traj, 0.99, 0.0) == td_errors(traj, 0.99));
    const ScoringOptions opts{0.99, 0.0, false};
    CHECK(score_trajectory(traj, ScoreMetric::kValueL1, opts) == score_trajectory(traj, ScoreMetric::kTdError, opts));
  }
}

TEST_CASE("unsigned GAE equals the L1 value loss against GAE targets") {
  Rng rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    const Trajectory traj = random_trajectory(rng, 1 + rng.below(30), rng.below(2) == 0);
    const ScoringOptions opts{0.999, 0.95, false};
    const auto adv = compute_gae(traj, opts.gamma, opts.lambda);
    double l1 = 0.0;
    for (size_t t = 0; t < adv.size(); ++t) {
      const double target = traj.values[t] + adv[t];
      l1 += std::abs(target - traj.values[t]);
    }
    l1 /= static_cast<double>(adv.size());
    CHECK(std::abs(score_trajectory(traj, ScoreMetric::kValueL1, opts) - l1) <= 1e-9);
  }
}

TEST_CASE("policy metric examples") {
  const auto uniform = with_policy({0.25, 0.25, 0.25, 0.25}, 7);
  CHECK(score_trajectory(uniform, ScoreMetric::kEntropy, {}) == doctest::Approx(std::log(0.25)));
  CHECK(score_trajectory(uniform, ScoreMetric::kEntropy, {}) == doctest::Approx(-1.386294).epsilon(1e-6));

  const auto peaked = with_policy({0.7, 0.2, 0.1}, 4);
  CHECK(score_trajectory(peaked, ScoreMetric::kMinMargin, {}) == doctest::Approx(0.5));
  CHECK(score_trajectory(peaked, ScoreMetric::kLeastConfidence, {}) == doctest::Approx(0.3));

  ScoringOptions flipped;
  flipped.flip_uncertainty_sign = true;
  CHECK(score_trajectory(peaked, ScoreMetric::kMinMargin, flipped) == doctest::Approx(-0.5));
  CHECK(score_trajectory(uniform, ScoreMetric::kEntropy, flipped) == doctest::Approx(-std::log(0.25)));
  CHECK(score_trajectory(peaked, ScoreMetric::kLeastConfidence, flipped) == doctest::Approx(0.3));

  CHECK_THROWS_AS(score_trajectory(with_policy({1.0}, 2), ScoreMetric::kMinMargin, {}), ContractViolation);
}

TEST_CASE("accurate values give a zero value-loss score") {
  // V equals the discounted return of a deterministic terminal episode.
  Trajectory traj;
  traj.rewards = {0.0, 0.0, 1.0};
  traj.dones = {false, false, true};
  const double g = 0.9;
  traj.values = {g * g, g, 1.0};
  CHECK(score_trajectory(traj, ScoreMetric::kValueL1, {g, 0.95, false}) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(score_trajectory(traj, ScoreMetric::kTdError, {g, 0.95, false}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("score ranges") {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const Trajectory traj = random_trajectory(rng, 1 + rng.below(20), false);
    const ScoringOptions opts;
    const double entropy = score_trajectory(traj, ScoreMetric::kEntropy, opts);
    CHECK((entropy <= 0.0 && entropy >= -std::log(4.0) - 1e-12));
    const double margin = score_trajectory(traj, ScoreMetric::kMinMargin, opts);
    CHECK((margin >= 0.0 && margin <= 1.0));
    CHECK(score_trajectory(traj, ScoreMetric::kLeastConfidence, opts) >= 0.0);
    CHECK(score_trajectory(traj, ScoreMetric::kTdError, opts) >= 0.0);
    CHECK(score_trajectory(traj, ScoreMetric::kValueL1, opts) >= 0.0);
    CHECK(std::isfinite(score_trajectory(traj, ScoreMetric::kGae, opts)));
  }
}

TEST_CASE("reward and value scaling") {
  Rng rng(21);
  const ScoringOptions opts;
  for (int trial = 0; trial < 50; ++trial) {
    const Trajectory traj = random_trajectory(rng, 1 + rng.below(20), rng.below(2) == 0);
    Trajectory scaled = traj;
    for (double& r : scaled.rewards) r *= 2.0;
    for (double& v : scaled.values) v *= 2.0;
    scaled.bootstrap_value *= 2.0;
    for (auto m : {ScoreMetric::kTdError, ScoreMetric::kGae, ScoreMetric::kValueL1}) {
      CHECK(score_trajectory(scaled, m, opts) == doctest::Approx(2.0 * score_trajectory(traj, m, opts)));
    }
    for (auto m : {ScoreMetric::kEntropy, ScoreMetric::kMinMargin, ScoreMetric::kLeastConfidence}) {
      CHECK(score_trajectory(scaled, m, opts) == score_trajectory(traj, m, opts));
    }
  }
}

TEST_CASE("merge_partial_score examples") {
  // least-confidence with max pi = 0.2 scores 0.8 per step
  const auto tail = with_policy({0.2, 0.2, 0.2, 0.2, 0.2}, 10);
  CHECK(merge_partial_score({0.4, 10}, tail, ScoreMetric::kLeastConfidence, {}) == doctest::Approx(0.6));
  const auto half = with_policy({0.5, 0.5}, 15);
  CHECK(merge_partial_score({0.0, 5}, half, ScoreMetric::kLeastConfidence, {}) == doctest::Approx(0.375));
  const auto one = with_policy({0.5, 0.5}, 1);
  CHECK(merge_partial_score({0.5, 9}, one, ScoreMetric::kLeastConfidence, {}) == doctest::Approx(0.5));
  CHECK_THROWS_AS(merge_partial_score({0.5, 0}, one, ScoreMetric::kLeastConfidence, {}), ContractViolation);
}

namespace {

Trajectory slice(const Trajectory& traj, size_t from, size_t to) {
  Trajectory out;
  out.n_actions = traj.n_actions;
  for (size_t t = from; t < to; ++t) {
    out.rewards.push_back(traj.rewards[t]);
    out.values.push_back(traj.values[t]);
    out.dones.push_back(traj.dones[t]);
    const auto pi = traj.policy_at(t);
    out.policy.insert(out.policy.end(), pi.begin(), pi.end());
  }
  out.bootstrap_value = to < traj.length() ? traj.values[to] : traj.bootstrap_value;
  return out;
}

}  // namespace

TEST_CASE("splitting an episode and merging reproduces the per-step mean") {
  Rng rng(31);
  const ScoringOptions opts;
  for (int trial = 0; trial < 200; ++trial) {
    const size_t steps = 2 + rng.below(30);
    const Trajectory episode = random_trajectory(rng, steps, true);
    const size_t cut = 1 + rng.below(steps - 1);
    const Trajectory head = slice(episode, 0, cut);
    const Trajectory tail = slice(episode, cut, steps);
    for (auto m : {ScoreMetric::kEntropy, ScoreMetric::kMinMargin, ScoreMetric::kLeastConfidence,
                   ScoreMetric::kTdError}) {
      const PartialScore partial{score_trajectory(head, m, opts), static_cast<int64_t>(cut)};
      CHECK(std::abs(merge_partial_score(partial, tail, m, opts) - score_trajectory(episode, m, opts)) <= 1e-12);
    }
    // GAE-based metrics follow the per-segment bookkeeping: each segment's GAE
    // bootstraps from the value at its last state.
    for (auto m : {ScoreMetric::kGae, ScoreMetric::kValueL1}) {
      const auto head_adv = compute_gae(head, opts.gamma, opts.lambda);
      const auto tail_adv = compute_gae(tail, opts.gamma, opts.lambda);
      double expected = 0.0;
      for (double a : head_adv) expected += m == ScoreMetric::kGae ? a : std::abs(a);
      for (double a : tail_adv) expected += m == ScoreMetric::kGae ? a : std::abs(a);
      expected /= static_cast<double>(steps);
      const PartialScore partial{score_trajectory(head, m, opts), static_cast<int64_t>(cut)};
      CHECK(std::abs(merge_partial_score(partial, tail, m, opts) - expected) <= 1e-12);
    }
  }
}

TEST_CASE("invalid trajectories are rejected") {
  Trajectory traj;
  CHECK_THROWS_AS(compute_gae(traj, 0.99, 0.95), ContractViolation);
  traj.rewards = {1.0, std::nan("")};
  traj.values = {0.0, 0.0};
  traj.dones = {false, true};
  CHECK_THROWS_AS(compute_gae(traj, 0.99, 0.95), ContractViolation);
  traj.rewards = {1.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(compute_gae(traj, 0.99, 0.95), ContractViolation);
  traj.rewards = {1.0, 0.0};
  CHECK_THROWS_AS(compute_gae(traj, 1.5, 0.95), ContractViolation);
  traj.values = {0.0};
  CHECK_THROWS_AS(compute_gae(traj, 0.99, 0.95), ContractViolation);
}

TEST_CASE("metric identifiers are stable") {
  for (const char* name : {"entropy", "min_margin", "least_confidence", "td_error", "gae", "value_l1"}) {
    CHECK(to_string(parse_metric(name)) == name);
  }
  CHECK_THROWS_AS(parse_metric("l2"), ContractViolation);
}

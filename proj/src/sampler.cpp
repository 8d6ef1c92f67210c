#include "plr/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include <json.hpp>

#include "plr/error.hpp"

namespace plr {

namespace {

std::vector<double> uniform(size_t n) { return std::vector<double>(n, 1.0 / static_cast<double>(n)); }

// Normalizes exp((log_h - max log_h) / beta); working in log space keeps
// small temperatures from overflowing or underflowing to all-zero.
std::vector<double> tempered(const std::vector<double>& log_h, double beta) {
  const double top = *std::max_element(log_h.begin(), log_h.end());
  std::vector<double> w(log_h.size());
  double total = 0.0;
  for (size_t i = 0; i < w.size(); ++i) {
    w[i] = std::isinf(log_h[i]) ? 0.0 : std::exp((log_h[i] - top) / beta);
    total += w[i];
  }
  for (double& x : w) x /= total;
  return w;
}

}  // namespace

std::string_view to_string(Prioritization p) {
  switch (p) {
    case Prioritization::kRank:
      return "rank";
    case Prioritization::kProportional:
      return "proportional";
    case Prioritization::kGreedy:
      return "greedy";
  }
  return "unknown";
}

Prioritization parse_prioritization(std::string_view name) {
  if (name == "rank") return Prioritization::kRank;
  if (name == "proportional") return Prioritization::kProportional;
  if (name == "greedy") return Prioritization::kGreedy;
  throw ContractViolation("unknown prioritization: " + std::string(name));
}

void ReplayConfig::validate() const {
  require(beta > 0.0 && std::isfinite(beta), "beta must be positive");
  require(rho >= 0.0 && rho <= 1.0, "rho must lie in [0, 1]");
  require(replay_prob >= 0.0 && replay_prob <= 1.0, "replay_prob must lie in [0, 1]");
}

// ---------------------------------------------------------------------------
// ScoreTable

std::optional<size_t> ScoreTable::index_of(LevelId id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

size_t ScoreTable::add_level(LevelId id) {
  require(!contains(id), "level already present in score table");
  const size_t i = seen_levels_.size();
  seen_levels_.push_back(id);
  scores_.push_back(0.0);
  partial_.push_back(std::nullopt);
  timestamps_.push_back(0);
  index_.emplace(id, i);
  return i;
}

void ScoreTable::check_index(size_t i) const {
  require(i < seen_levels_.size(), "level index out of range");
}

void ScoreTable::set_score(size_t i, double score) {
  check_index(i);
  require(std::isfinite(score), "level score must be finite");
  scores_[i] = score;
}

void ScoreTable::set_partial(size_t i, std::optional<PartialScore> partial) {
  check_index(i);
  partial_[i] = partial;
}

void ScoreTable::set_timestamp(size_t i, int64_t stamp) {
  check_index(i);
  require(stamp >= 0 && stamp <= episode_counter_, "timestamp must lie in [0, c]");
  timestamps_[i] = stamp;
}

std::string ScoreTable::to_json_line() const {
  nlohmann::json partial = nlohmann::json::array();
  for (const auto& p : partial_) {
    if (p) {
      partial.push_back({p->score, p->steps});
    } else {
      partial.push_back(nullptr);
    }
  }
  const nlohmann::json j = {
      {"seen_levels", seen_levels_}, {"scores", scores_},         {"partial", partial},
      {"timestamps", timestamps_},   {"counter", episode_counter_},
  };
  return j.dump();
}

ScoreTable ScoreTable::from_json_line(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  ScoreTable table;
  const auto ids = j.at("seen_levels").get<std::vector<LevelId>>();
  const auto scores = j.at("scores").get<std::vector<double>>();
  const auto stamps = j.at("timestamps").get<std::vector<int64_t>>();
  require(scores.size() == ids.size() && stamps.size() == ids.size(),
          "score table checkpoint has mismatched list lengths");
  table.episode_counter_ = j.at("counter").get<int64_t>();
  for (size_t i = 0; i < ids.size(); ++i) {
    table.add_level(ids[i]);
    table.set_score(i, scores[i]);
    table.set_timestamp(i, stamps[i]);
  }
  if (j.contains("partial")) {
    const auto& partial = j.at("partial");
    require(partial.size() == ids.size(), "score table checkpoint has mismatched partial list");
    for (size_t i = 0; i < ids.size(); ++i) {
      if (!partial[i].is_null()) {
        table.set_partial(i, PartialScore{partial[i][0].get<double>(), partial[i][1].get<int64_t>()});
      }
    }
  }
  return table;
}

bool operator==(const ScoreTable& a, const ScoreTable& b) {
  if (a.seen_levels_ != b.seen_levels_ || a.scores_ != b.scores_ ||
      a.timestamps_ != b.timestamps_ || a.episode_counter_ != b.episode_counter_) {
    return false;
  }
  for (size_t i = 0; i < a.partial_.size(); ++i) {
    const auto& pa = a.partial_[i];
    const auto& pb = b.partial_[i];
    if (pa.has_value() != pb.has_value()) return false;
    if (pa && (pa->score != pb->score || pa->steps != pb->steps)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Distributions

Distribution score_distribution(const ScoreTable& table, const ReplayConfig& config) {
  config.validate();
  require(!table.empty(), "score distribution needs at least one seen level");
  const auto& scores = table.scores();
  const size_t n = scores.size();
  for (double s : scores) require(std::isfinite(s), "scores must be finite");

  switch (config.prioritization) {
    case Prioritization::kGreedy: {
      std::vector<double> probs(n, 0.0);
      probs[std::max_element(scores.begin(), scores.end()) - scores.begin()] = 1.0;
      return {std::move(probs), false};
    }
    case Prioritization::kRank: {
      // Descending by score; tied scores share the best rank of their group.
      std::vector<size_t> order(n);
      std::iota(order.begin(), order.end(), size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](size_t a, size_t b) { return scores[a] > scores[b]; });
      std::vector<double> log_h(n);
      size_t rank = 1;
      for (size_t r = 0; r < n; ++r) {
        if (r > 0 && scores[order[r]] != scores[order[r - 1]]) rank = r + 1;
        log_h[order[r]] = -std::log(static_cast<double>(rank));
      }
      return {tempered(log_h, config.beta), false};
    }
    case Prioritization::kProportional: {
      const bool any_negative = std::any_of(scores.begin(), scores.end(), [](double s) { return s < 0.0; });
      const bool all_zero = std::all_of(scores.begin(), scores.end(), [](double s) { return s == 0.0; });
      if (any_negative || all_zero) return {uniform(n), true};
      std::vector<double> log_h(n);
      for (size_t i = 0; i < n; ++i) {
        log_h[i] = scores[i] > 0.0 ? std::log(scores[i]) : -std::numeric_limits<double>::infinity();
      }
      return {tempered(log_h, config.beta), false};
    }
  }
  return {uniform(n), true};
}

Distribution staleness_distribution(const ScoreTable& table) {
  require(!table.empty(), "staleness distribution needs at least one seen level");
  const int64_t c = table.episode_counter();
  const auto& stamps = table.timestamps();
  std::vector<double> probs(stamps.size());
  double total = 0.0;
  for (size_t i = 0; i < stamps.size(); ++i) {
    require(stamps[i] <= c, "timestamp exceeds episode counter");
    probs[i] = static_cast<double>(c - stamps[i]);
    total += probs[i];
  }
  if (total <= 0.0) return {uniform(stamps.size()), true};
  for (double& p : probs) p /= total;
  return {std::move(probs), false};
}

Distribution replay_distribution(const ScoreTable& table, const ReplayConfig& config) {
  config.validate();
  if (config.rho == 0.0) return score_distribution(table, config);
  if (config.rho == 1.0) return staleness_distribution(table);
  const Distribution ps = score_distribution(table, config);
  const Distribution pc = staleness_distribution(table);
  Distribution out;
  out.uniform_fallback = ps.uniform_fallback || pc.uniform_fallback;
  out.probs.resize(ps.probs.size());
  for (size_t i = 0; i < out.probs.size(); ++i) {
    out.probs[i] = (1.0 - config.rho) * ps.probs[i] + config.rho * pc.probs[i];
  }
  return out;
}

size_t sample_index(std::span<const double> probs, Rng& rng) {
  require(!probs.empty(), "cannot sample from an empty distribution");
  const double u = rng.uniform();
  double cumulative = 0.0;
  for (size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  // Rounding left u above the final partial sum: take the last positive entry.
  for (size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

SampledLevel sample_next_level(ScoreTable& table, const ReplayConfig& config,
                               std::span<const LevelId> train_levels, Rng& rng) {
  config.validate();
  require(!train_levels.empty(), "training level set must be nonempty");
  const int64_t c = table.increment_counter();

  std::vector<LevelId> unseen;
  for (LevelId id : train_levels) {
    if (!table.contains(id)) unseen.push_back(id);
  }

  bool take_new = false;
  if (!unseen.empty()) {
    if (table.empty() || config.warm_start) {
      take_new = true;
    } else {
      take_new = !rng.bernoulli(config.replay_prob);
    }
  }

  SampledLevel out;
  if (take_new) {
    out.id = unseen[rng.below(unseen.size())];
    out.index = table.add_level(out.id);
    out.was_new = true;
  } else {
    const Distribution dist = replay_distribution(table, config);
    out.index = sample_index(dist.probs, rng);
    out.id = table.seen_levels()[out.index];
  }
  table.set_timestamp(out.index, c);
  return out;
}

void update_level_score(ScoreTable& table, size_t level_index, double score) {
  table.set_score(level_index, score);
  table.set_partial(level_index, std::nullopt);
}

}  // namespace plr

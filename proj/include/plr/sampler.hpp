#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "plr/rng.hpp"
#include "plr/scoring.hpp"

namespace plr {

using LevelId = uint64_t;

enum class Prioritization { kRank, kProportional, kGreedy };

std::string_view to_string(Prioritization p);
Prioritization parse_prioritization(std::string_view name);

struct ReplayConfig {
  ScoreMetric metric = ScoreMetric::kValueL1;
  Prioritization prioritization = Prioritization::kRank;
  double beta = 0.1;         // temperature
  double rho = 0.3;          // staleness coefficient
  double replay_prob = 1.0;  // P_D(d = 1) once the warm start is over
  bool warm_start = true;

  void validate() const;
};

/// Per-level bookkeeping over the visited levels. Index `i` in every list
/// refers to `seen_levels[i]`; levels are appended in first-visit order and
/// never removed.
class ScoreTable {
 public:
  ScoreTable() = default;

  size_t size() const { return seen_levels_.size(); }
  bool empty() const { return seen_levels_.empty(); }

  const std::vector<LevelId>& seen_levels() const { return seen_levels_; }
  const std::vector<double>& scores() const { return scores_; }
  const std::vector<std::optional<PartialScore>>& partial() const { return partial_; }
  const std::vector<int64_t>& timestamps() const { return timestamps_; }
  int64_t episode_counter() const { return episode_counter_; }

  bool contains(LevelId id) const { return index_.contains(id); }
  std::optional<size_t> index_of(LevelId id) const;

  /// Appends an unseen level with score 0, no partial score and timestamp 0.
  size_t add_level(LevelId id);

  void set_score(size_t i, double score);
  void set_partial(size_t i, std::optional<PartialScore> partial);
  void set_timestamp(size_t i, int64_t stamp);
  int64_t increment_counter() { return ++episode_counter_; }

  /// One JSON object on a single line (no trailing newline).
  std::string to_json_line() const;
  static ScoreTable from_json_line(std::string_view line);

  friend bool operator==(const ScoreTable&, const ScoreTable&);

 private:
  void check_index(size_t i) const;

  std::vector<LevelId> seen_levels_;
  std::vector<double> scores_;
  std::vector<std::optional<PartialScore>> partial_;
  std::vector<int64_t> timestamps_;
  int64_t episode_counter_ = 0;
  std::unordered_map<LevelId, size_t> index_;
};

struct Distribution {
  std::vector<double> probs;
  // True when a degenerate input forced the uniform fallback.
  bool uniform_fallback = false;
};

/// P_S: h(S_i)^(1/beta) normalized, h chosen by `config.prioritization`.
Distribution score_distribution(const ScoreTable& table, const ReplayConfig& config);

/// P_C: proportional to staleness c - C_i.
Distribution staleness_distribution(const ScoreTable& table);

/// (1 - rho) * P_S + rho * P_C.
Distribution replay_distribution(const ScoreTable& table, const ReplayConfig& config);

struct SampledLevel {
  LevelId id = 0;
  size_t index = 0;  // position in the table's seen list
  bool was_new = false;
};

/// Picks the next level to play and stamps it with the incremented episode
/// counter.
SampledLevel sample_next_level(ScoreTable& table, const ReplayConfig& config,
                               std::span<const LevelId> train_levels, Rng& rng);

void update_level_score(ScoreTable& table, size_t level_index, double score);

/// Inverse-CDF draw from a probability vector.
size_t sample_index(std::span<const double> probs, Rng& rng);

}  // namespace plr

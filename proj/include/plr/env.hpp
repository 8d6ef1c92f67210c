#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "plr/sampler.hpp"

namespace plr {

// ChainMaze: one to `max_tier` rooms with 5x5 interiors laid out left to
// right, neighbours joined by a single door. The agent starts in the first
// room and must reach the goal in the last one. Difficulty == room count.

inline constexpr int kRoomInterior = 5;
inline constexpr int kGridHeight = kRoomInterior + 2;
inline constexpr int kStepsPerRoom = 64;
inline constexpr int kMaxTier = 4;
inline constexpr int kNumActions = 4;
inline constexpr int kObsChannels = 3;

constexpr int grid_width(int rooms) { return rooms * (kRoomInterior + 1) + 1; }

enum class Cell : uint8_t { kFloor = 0, kWall = 1, kDoor = 2, kGoal = 3, kStart = 4 };

enum class Action : uint8_t { kUp = 0, kDown = 1, kLeft = 2, kRight = 3 };

struct Pos {
  int row = 0;
  int col = 0;
  friend bool operator==(Pos, Pos) = default;
};

struct LevelSpec {
  LevelId id = 0;
  int rooms = 1;
  int width = 0;
  int height = 0;
  std::vector<Cell> grid;  // row-major, height x width
  Pos start;
  Pos goal;

  int difficulty() const { return rooms; }
  Cell at(Pos p) const { return grid[static_cast<size_t>(p.row * width + p.col)]; }
  int t_max() const { return kStepsPerRoom * rooms; }

  /// FNV-1a over the layout; stable across platforms.
  uint64_t hash() const;
  std::string render() const;

  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

LevelSpec generate_level(LevelId id, int max_tier);

/// Same value as generate_level(id, max_tier).difficulty(), without building the grid.
int difficulty_of(LevelId id, int max_tier);

/// Reward for reaching the goal after `t` steps of a `t_max`-step budget.
double goal_reward(int t, int t_max);

/// True when the goal can be reached from the start through floor and doors.
bool goal_reachable(const LevelSpec& spec);

/// Minimal action sequence from start to goal; opening a door costs one
/// extra (blocked) move into it.
std::vector<Action> solve_level(const LevelSpec& spec);

struct EnvConfig {
  int max_tier = kMaxTier;

  int obs_width() const { return grid_width(max_tier); }
  int obs_height() const { return kGridHeight; }
  int obs_size() const { return obs_height() * obs_width() * kObsChannels; }
};

/// Full-grid observation, [row][col][channel], padded on the right to the
/// widest level of the configuration. Channel 0 is the cell type (0 floor or
/// padding, 1 wall, 2 door, 3 goal), channel 1 is 1 on open doors, channel 2
/// is 1 on the agent. All values lie in [0, 3].
using Observation = std::vector<uint8_t>;

struct StepResult {
  double reward = 0.0;
  bool done = false;
};

class ChainMaze {
 public:
  explicit ChainMaze(EnvConfig config = {});

  const EnvConfig& config() const { return config_; }
  const LevelSpec& level() const { return level_; }
  Pos agent() const { return agent_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }

  Observation reset(const LevelSpec& spec);
  StepResult step(Action action);

  Observation observe() const;
  void observe(std::span<uint8_t> out) const;
  std::string render() const;

 private:
  EnvConfig config_;
  LevelSpec level_;
  std::vector<uint8_t> door_open_;
  Pos agent_;
  int steps_ = 0;
  bool done_ = true;
};

}  // namespace plr

#include "plr/env.hpp"

#include <algorithm>
#include <deque>
#include <limits>

#include "plr/error.hpp"
#include "plr/rng.hpp"

namespace plr {

namespace {

constexpr std::array<Pos, kNumActions> kMoves = {Pos{-1, 0}, Pos{1, 0}, Pos{0, -1}, Pos{0, 1}};
constexpr int kMaxAttempts = 100;

size_t cell_index(const LevelSpec& spec, Pos p) { return static_cast<size_t>(p.row * spec.width + p.col); }

bool in_bounds(const LevelSpec& spec, Pos p) {
  return p.row >= 0 && p.row < spec.height && p.col >= 0 && p.col < spec.width;
}

Pos random_cell_in_room(int room, Rng& rng) {
  return {1 + static_cast<int>(rng.below(kRoomInterior)),
          room * (kRoomInterior + 1) + 1 + static_cast<int>(rng.below(kRoomInterior))};
}

LevelSpec build_layout(LevelId id, int rooms, Rng& rng) {
  LevelSpec spec;
  spec.id = id;
  spec.rooms = rooms;
  spec.width = grid_width(rooms);
  spec.height = kGridHeight;
  spec.grid.assign(static_cast<size_t>(spec.width * spec.height), Cell::kFloor);
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) {
      const bool border = r == 0 || r == spec.height - 1 || c % (kRoomInterior + 1) == 0;
      if (border) spec.grid[cell_index(spec, {r, c})] = Cell::kWall;
    }
  }
  for (int j = 1; j < rooms; ++j) {
    const Pos door{1 + static_cast<int>(rng.below(kRoomInterior)), j * (kRoomInterior + 1)};
    spec.grid[cell_index(spec, door)] = Cell::kDoor;
  }
  spec.start = random_cell_in_room(0, rng);
  do {
    spec.goal = random_cell_in_room(rooms - 1, rng);
  } while (spec.goal == spec.start);
  spec.grid[cell_index(spec, spec.start)] = Cell::kStart;
  spec.grid[cell_index(spec, spec.goal)] = Cell::kGoal;
  return spec;
}

// Dijkstra over cells where stepping onto a door costs 2 (touch, then move).
std::vector<int> distances_from(const LevelSpec& spec, Pos from, std::vector<int>* parent) {
  const size_t n = spec.grid.size();
  std::vector<int> dist(n, std::numeric_limits<int>::max());
  if (parent) parent->assign(n, -1);
  // Costs are 1 or 2, so a two-bucket deque search is exact.
  std::deque<std::pair<int, size_t>> frontier;
  dist[cell_index(spec, from)] = 0;
  frontier.emplace_back(0, cell_index(spec, from));
  while (!frontier.empty()) {
    auto it = std::min_element(frontier.begin(), frontier.end());
    const auto [d, idx] = *it;
    frontier.erase(it);
    if (d > dist[idx]) continue;
    const Pos p{static_cast<int>(idx) / spec.width, static_cast<int>(idx) % spec.width};
    for (const Pos m : kMoves) {
      const Pos q{p.row + m.row, p.col + m.col};
      if (!in_bounds(spec, q) || spec.at(q) == Cell::kWall) continue;
      const int cost = spec.at(q) == Cell::kDoor ? 2 : 1;
      const size_t qi = cell_index(spec, q);
      if (d + cost < dist[qi]) {
        dist[qi] = d + cost;
        if (parent) (*parent)[qi] = static_cast<int>(idx);
        frontier.emplace_back(dist[qi], qi);
      }
    }
  }
  return dist;
}

}  // namespace

uint64_t LevelSpec::hash() const {
  uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](uint64_t byte) {
    h ^= byte & 0xff;
    h *= 0x100000001b3ULL;
  };
  auto mix_int = [&mix](int64_t v) {
    for (int k = 0; k < 8; ++k) mix(static_cast<uint64_t>(v) >> (8 * k));
  };
  mix_int(rooms);
  mix_int(width);
  mix_int(height);
  for (Cell c : grid) mix(static_cast<uint64_t>(c));
  mix_int(start.row);
  mix_int(start.col);
  mix_int(goal.row);
  mix_int(goal.col);
  return h;
}

std::string LevelSpec::render() const {
  std::string out;
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      switch (at({r, c})) {
        case Cell::kFloor: out += '.'; break;
        case Cell::kWall: out += '#'; break;
        case Cell::kDoor: out += 'D'; break;
        case Cell::kGoal: out += 'G'; break;
        case Cell::kStart: out += 'S'; break;
      }
    }
    out += '\n';
  }
  return out;
}

int difficulty_of(LevelId id, int max_tier) {
  require(max_tier >= 1 && max_tier <= kMaxTier, "max_tier must lie in [1, 4]");
  return 1 + static_cast<int>(splitmix64(id) % static_cast<uint64_t>(max_tier));
}

LevelSpec generate_level(LevelId id, int max_tier) {
  require(max_tier >= 1 && max_tier <= kMaxTier, "max_tier must lie in [1, 4]");
  Rng rng(id);
  const int rooms = 1 + static_cast<int>(rng() % static_cast<uint64_t>(max_tier));
  for (int attempt = 0; attempt < kMaxAttempts; ++attempt) {
    LevelSpec spec = build_layout(id, rooms, rng);
    if (goal_reachable(spec)) return spec;
  }
  throw ContractViolation("level generation failed to produce a solvable layout");
}

double goal_reward(int t, int t_max) {
  return 1.0 - 0.9 * (static_cast<double>(t) / static_cast<double>(t_max));
}

bool goal_reachable(const LevelSpec& spec) {
  const auto dist = distances_from(spec, spec.start, nullptr);
  return dist[cell_index(spec, spec.goal)] != std::numeric_limits<int>::max();
}

std::vector<Action> solve_level(const LevelSpec& spec) {
  std::vector<int> parent;
  const auto dist = distances_from(spec, spec.start, &parent);
  require(dist[cell_index(spec, spec.goal)] != std::numeric_limits<int>::max(), "level is unsolvable");
  std::vector<Action> reversed;
  size_t idx = cell_index(spec, spec.goal);
  while (parent[idx] >= 0) {
    const size_t prev = static_cast<size_t>(parent[idx]);
    const int dr = static_cast<int>(idx) / spec.width - static_cast<int>(prev) / spec.width;
    const int dc = static_cast<int>(idx) % spec.width - static_cast<int>(prev) % spec.width;
    Action a = Action::kUp;
    for (int k = 0; k < kNumActions; ++k) {
      if (kMoves[k].row == dr && kMoves[k].col == dc) a = static_cast<Action>(k);
    }
    reversed.push_back(a);
    if (spec.grid[idx] == Cell::kDoor) reversed.push_back(a);
    idx = prev;
  }
  return {reversed.rbegin(), reversed.rend()};
}

// ---------------------------------------------------------------------------
// ChainMaze

ChainMaze::ChainMaze(EnvConfig config) : config_(config) {
  require(config_.max_tier >= 1 && config_.max_tier <= kMaxTier, "max_tier must lie in [1, 4]");
}

Observation ChainMaze::reset(const LevelSpec& spec) {
  require(spec.rooms >= 1 && spec.rooms <= config_.max_tier, "level does not fit the configured grid");
  level_ = spec;
  door_open_.assign(level_.grid.size(), 0);
  agent_ = level_.start;
  steps_ = 0;
  done_ = false;
  return observe();
}

StepResult ChainMaze::step(Action action) {
  require(!done_, "step called on a finished episode");
  const int a = static_cast<int>(action);
  require(a >= 0 && a < kNumActions, "invalid action");
  ++steps_;
  const Pos target{agent_.row + kMoves[a].row, agent_.col + kMoves[a].col};
  const size_t ti = cell_index(level_, target);
  switch (level_.at(target)) {
    case Cell::kWall:
      break;
    case Cell::kDoor:
      if (door_open_[ti]) {
        agent_ = target;
      } else {
        door_open_[ti] = 1;
      }
      break;
    default:
      agent_ = target;
      break;
  }
  StepResult result;
  if (agent_ == level_.goal) {
    result = {goal_reward(steps_, level_.t_max()), true};
  } else if (steps_ >= level_.t_max()) {
    result = {0.0, true};
  }
  done_ = result.done;
  return result;
}

Observation ChainMaze::observe() const {
  Observation obs(static_cast<size_t>(config_.obs_size()));
  observe(obs);
  return obs;
}

void ChainMaze::observe(std::span<uint8_t> out) const {
  require(out.size() == static_cast<size_t>(config_.obs_size()), "observation buffer has wrong size");
  std::fill(out.begin(), out.end(), uint8_t{0});
  const int stride = config_.obs_width() * kObsChannels;
  for (int r = 0; r < level_.height; ++r) {
    for (int c = 0; c < level_.width; ++c) {
      const size_t i = cell_index(level_, {r, c});
      uint8_t* cell = out.data() + r * stride + c * kObsChannels;
      const Cell type = level_.grid[i];
      cell[0] = type == Cell::kStart ? 0 : static_cast<uint8_t>(type);
      cell[1] = door_open_[i];
    }
  }
  out[static_cast<size_t>(agent_.row * stride + agent_.col * kObsChannels + 2)] = 1;
}

std::string ChainMaze::render() const {
  std::string out = level_.render();
  out[static_cast<size_t>(agent_.row * (level_.width + 1) + agent_.col)] = 'A';
  return out;
}

}  // namespace plr

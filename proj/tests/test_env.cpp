#include <doctest.h>

#include <algorithm>
#include <map>

#include "plr/env.hpp"
#include "plr/error.hpp"
#include "plr/rng.hpp"

using namespace plr;

namespace {

constexpr const char* kLevel7Render =
    "#########################\n"
    "#.....#.....#.....#.....#\n"
    "#.....#.....D.....#.....#\n"
    "#.....#.....#.....#.....#\n"
    "#.....#.....#.....D..G..#\n"
    "#S....D.....#.....#.....#\n"
    "#########################\n";
constexpr uint64_t kLevel7Hash = 6806338843812109621ULL;

// Replays the scripted solution and returns the episode return.
double play(ChainMaze& env, const LevelSpec& spec, const std::vector<Action>& actions) {
  env.reset(spec);
  double ret = 0.0;
  for (Action a : actions) {
    if (env.done()) break;
    ret += env.step(a).reward;
  }
  return ret;
}

}  // namespace

TEST_CASE("generation is deterministic") {
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    const LevelId id = rng();
    const LevelSpec a = generate_level(id, 4);
    const LevelSpec b = generate_level(id, 4);
    CHECK(a == b);
    CHECK(a.hash() == b.hash());
  }
}

TEST_CASE("layout golden") {
  // Frozen output of the generator; any change here changes every level.
  const LevelSpec spec = generate_level(7, 4);
  CHECK(spec.rooms == difficulty_of(7, 4));
  CHECK(spec.render() == kLevel7Render);
  CHECK(spec.hash() == kLevel7Hash);
}

TEST_CASE("max_tier = 1 gives single-room levels") {
  for (LevelId id = 0; id < 500; ++id) CHECK(generate_level(id, 1).difficulty() == 1);
}

TEST_CASE("tiers are close to uniform and match difficulty_of") {
  Rng rng(2024);
  std::map<int, int> counts;
  constexpr int kSeeds = 10000;
  for (int k = 0; k < kSeeds; ++k) {
    const LevelId id = rng();
    const LevelSpec spec = generate_level(id, 4);
    CHECK(spec.difficulty() == difficulty_of(id, 4));
    CHECK((spec.difficulty() >= 1 && spec.difficulty() <= 4));
    CHECK(goal_reachable(spec));
    ++counts[spec.difficulty()];
  }
  for (const auto& [tier, count] : counts) {
    const double freq = static_cast<double>(count) / kSeeds;
    CHECK((freq >= 0.22 && freq <= 0.28));
  }
}

TEST_CASE("level structure") {
  for (LevelId id = 0; id < 300; ++id) {
    const LevelSpec spec = generate_level(id, 4);
    CHECK(spec.width == grid_width(spec.rooms));
    CHECK(std::count(spec.grid.begin(), spec.grid.end(), Cell::kStart) == 1);
    CHECK(std::count(spec.grid.begin(), spec.grid.end(), Cell::kGoal) == 1);
    CHECK(std::count(spec.grid.begin(), spec.grid.end(), Cell::kDoor) == spec.rooms - 1);
    CHECK(spec.start.col < kRoomInterior + 1);
    CHECK(spec.goal.col > (spec.rooms - 1) * (kRoomInterior + 1));
  }
}

TEST_CASE("goal reward formula") {
  CHECK(goal_reward(0, 64) == 1.0);
  CHECK(goal_reward(64, 64) == doctest::Approx(0.1));
}

TEST_CASE("stepping onto an adjacent goal") {
  // Find a one-room level whose goal sits directly right of the start.
  LevelId id = 0;
  while (true) {
    const LevelSpec s = generate_level(id, 1);
    if (s.goal.row == s.start.row && s.goal.col == s.start.col + 1) break;
    ++id;
  }
  ChainMaze env(EnvConfig{1});
  env.reset(generate_level(id, 1));
  const StepResult r = env.step(Action::kRight);
  CHECK(r.done);
  CHECK(r.reward == doctest::Approx(1.0 - 0.9 * (1.0 / 64.0)));
  CHECK_THROWS_AS(env.step(Action::kRight), ContractViolation);
}

TEST_CASE("timeout ends the episode with zero return") {
  LevelId id = 0;
  while (generate_level(id, 4).rooms < 2) ++id;
  const LevelSpec spec = generate_level(id, 4);
  ChainMaze env;
  env.reset(spec);
  double ret = 0.0;
  int steps = 0;
  while (!env.done()) {
    ret += env.step(Action::kLeft).reward;
    ++steps;
  }
  CHECK(ret == 0.0);
  CHECK(steps == spec.t_max());
  CHECK(steps == 64 * spec.rooms);
}

TEST_CASE("walls block and doors open on touch") {
  LevelId id = 0;
  while (generate_level(id, 4).rooms < 2) ++id;
  const LevelSpec spec = generate_level(id, 4);
  ChainMaze env;
  env.reset(spec);
  // Walk to the first door's row, then push right until through it.
  int door_row = 0;
  for (int r = 1; r <= kRoomInterior; ++r) {
    if (spec.at({r, kRoomInterior + 1}) == Cell::kDoor) door_row = r;
  }
  while (env.agent().row < door_row) env.step(Action::kDown);
  while (env.agent().row > door_row) env.step(Action::kUp);
  while (env.agent().col < kRoomInterior) env.step(Action::kRight);
  const Pos before = env.agent();
  env.step(Action::kRight);  // touch: door opens, agent stays
  CHECK(env.agent() == before);
  auto obs = env.observe();
  const int stride = env.config().obs_width() * kObsChannels;
  CHECK(obs[static_cast<size_t>(door_row * stride + (kRoomInterior + 1) * kObsChannels + 1)] == 1);
  env.step(Action::kRight);
  CHECK(env.agent().col == kRoomInterior + 1);

  // Up from the top interior row hits the border wall.
  env.reset(spec);
  while (env.agent().row > 1) env.step(Action::kUp);
  const Pos top = env.agent();
  env.step(Action::kUp);
  CHECK(env.agent() == top);
}

TEST_CASE("observation encoding") {
  const EnvConfig cfg{4};
  CHECK(cfg.obs_size() == 7 * 25 * 3);
  ChainMaze env(cfg);
  for (LevelId id = 0; id < 50; ++id) {
    const LevelSpec spec = generate_level(id, 4);
    const Observation obs = env.reset(spec);
    REQUIRE(obs.size() == static_cast<size_t>(cfg.obs_size()));
    CHECK(*std::max_element(obs.begin(), obs.end()) <= 3);
    int agents = 0;
    for (size_t i = 2; i < obs.size(); i += 3) agents += obs[i];
    CHECK(agents == 1);
    // Padding to the right of narrow levels is all zero.
    const int stride = cfg.obs_width() * kObsChannels;
    for (int r = 0; r < kGridHeight; ++r) {
      for (int c = spec.width; c < cfg.obs_width(); ++c) {
        for (int ch = 0; ch < kObsChannels; ++ch) CHECK(obs[static_cast<size_t>(r * stride + c * 3 + ch)] == 0);
      }
    }
    const size_t goal = static_cast<size_t>(spec.goal.row * stride + spec.goal.col * 3);
    CHECK(obs[goal] == static_cast<uint8_t>(Cell::kGoal));
  }
  LevelId wide = 0;
  while (generate_level(wide, 4).rooms < 2) ++wide;
  ChainMaze narrow(EnvConfig{1});
  CHECK_THROWS_AS(narrow.reset(generate_level(wide, 4)), ContractViolation);
}

TEST_CASE("identical action lists give identical streams") {
  Rng actions(77);
  std::vector<Action> script;
  for (int k = 0; k < 300; ++k) script.push_back(static_cast<Action>(actions.below(4)));
  for (LevelId id : {3ULL, 19ULL, 12345ULL}) {
    ChainMaze a;
    ChainMaze b;
    std::vector<Observation> obs_a{a.reset(generate_level(id, 4))};
    std::vector<Observation> obs_b{b.reset(generate_level(id, 4))};
    for (Action act : script) {
      if (a.done()) break;
      const auto ra = a.step(act);
      const auto rb = b.step(act);
      CHECK(ra.reward == rb.reward);
      CHECK(ra.done == rb.done);
      obs_a.push_back(a.observe());
      obs_b.push_back(b.observe());
    }
    CHECK(obs_a == obs_b);
  }
}

TEST_CASE("returns are bounded and optimal return falls with room count") {
  Rng rng(8);
  std::map<int, std::pair<double, int>> optimal;
  ChainMaze env;
  for (int k = 0; k < 4000; ++k) {
    const LevelSpec spec = generate_level(rng(), 4);
    const auto path = solve_level(spec);
    const double ret = play(env, spec, path);
    CHECK(env.done());
    CHECK((ret > 0.0 && ret <= 1.0));
    CHECK(ret == doctest::Approx(goal_reward(static_cast<int>(path.size()), spec.t_max())));
    optimal[spec.rooms].first += ret;
    ++optimal[spec.rooms].second;

    // Random actions still give a return in [0, 1].
    env.reset(spec);
    double random_ret = 0.0;
    while (!env.done()) random_ret += env.step(static_cast<Action>(rng.below(4))).reward;
    CHECK((random_ret >= 0.0 && random_ret <= 1.0));
  }
  double previous = 2.0;
  for (const auto& [rooms, acc] : optimal) {
    const double mean = acc.first / acc.second;
    CHECK(mean < previous);
    previous = mean;
  }
}

TEST_CASE("ascii rendering") {
  const LevelSpec spec = generate_level(7, 4);
  const std::string text = spec.render();
  CHECK(std::count(text.begin(), text.end(), '\n') == spec.height);
  CHECK(std::count(text.begin(), text.end(), 'S') == 1);
  CHECK(std::count(text.begin(), text.end(), 'G') == 1);
  ChainMaze env;
  env.reset(spec);
  const std::string with_agent = env.render();
  CHECK(std::count(with_agent.begin(), with_agent.end(), 'A') == 1);
}

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>

#include "plr/error.hpp"
#include "plr/harness.hpp"
#include "plr/plot.hpp"

using namespace plr;
using nlohmann::json;

namespace {

const std::filesystem::path kGolden = PLR_GOLDEN_DIR;

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

size_t count(const std::string& haystack, const std::string& needle) {
  size_t n = 0;
  for (size_t pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  c.n_train_levels = 6;
  c.update.workers = 2;
  c.update.rollout_length = 64;
  c.update.minibatches = 2;
  c.update.epochs = 2;
  c.hidden = {8};
  c.total_steps = 1024;
  c.eval_every = 256;
  c.n_test_episodes = 4;
  c.seeds = {0};
  return c;
}

std::vector<json> run_log(const ExperimentConfig& c, uint64_t seed) {
  std::vector<json> out;
  for (auto& r : run_training(c, seed).records) out.push_back(r);
  return out;
}

std::vector<json> fake_log(double final_return) {
  std::vector<json> log;
  log.push_back(json{{"type", "final"}, {"step", 10}, {"test_return_mean", final_return}, {"tier_mass", {1.0}}});
  return log;
}

std::vector<std::vector<json>> fake_logs(std::initializer_list<double> finals) {
  std::vector<std::vector<json>> logs;
  for (double f : finals) logs.push_back(fake_log(f));
  return logs;
}

// Unseen test levels restricted to the hardest tier.
std::function<LevelId()> four_room_levels(uint64_t seed) {
  auto stream = std::make_shared<TestLevelStream>(seed);
  return [stream] {
    for (;;) {
      const LevelId id = stream->next();
      if (difficulty_of(id, kMaxTier) == kMaxTier) return id;
    }
  };
}

}  // namespace

TEST_CASE("direct level sampling is uniform over the training set") {
  const auto train = training_levels(200);
  LevelCurriculum curriculum(train, ReplayConfig{}, ScoringOptions{}, SamplingMode::kUniform, kMaxTier, 17);
  std::vector<int> counts(train.size(), 0);
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) ++counts[curriculum.next_level().index];
  CHECK(curriculum.table().empty());
  // chi-square with k - 1 degrees of freedom: mean k - 1, sd sqrt(2(k - 1))
  const double expected = static_cast<double>(draws) / static_cast<double>(train.size());
  double chi2 = 0.0;
  for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
  const double dof = static_cast<double>(train.size() - 1);
  CHECK(std::abs(chi2 - dof) < 3.0 * std::sqrt(2.0 * dof));
}

TEST_CASE("pure staleness with equal timestamps is uniform over seen levels") {
  ScoreTable table;
  for (LevelId id : {3, 1, 4, 5}) table.add_level(id);
  for (size_t i = 0; i < 4; ++i) table.set_score(i, 0.1 * static_cast<double>(i + 1));
  for (int k = 0; k < 9; ++k) table.increment_counter();
  for (size_t i = 0; i < 4; ++i) table.set_timestamp(i, 5);
  ReplayConfig cfg;
  cfg.rho = 1.0;
  for (double p : replay_distribution(table, cfg).probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("training and test level ids never overlap") {
  const auto train = training_levels(200);
  for (LevelId id : train) CHECK((id >> 63) == 0);
  TestLevelStream stream(5);
  for (int i = 0; i < 10000; ++i) CHECK((stream.next() >> 63) == 1);

  const auto result = run_training(tiny_config(), 2);
  for (LevelId id : result.table.seen_levels()) {
    CHECK(std::find(train.begin(), train.begin() + 6, id) != train.begin() + 6);
  }
}

TEST_CASE("random policy rarely solves four-room levels") {
  Rng rng(21);
  const auto stats = evaluate_policy(200, four_room_levels(1), kMaxTier,
                                     [&](const ChainMaze&) { return static_cast<Action>(rng.below(4)); });
  CHECK(stats.episodes == 200);
  CHECK(stats.mean < 0.05);
}

TEST_CASE("untrained uniform network policy scores near zero") {
  const ObservationEncoder encoder(EnvConfig{}, InputEncoding::kEgocentric);
  const Network net(NetworkConfig{encoder.size(), {16}, 4, true});
  Rng init(3);
  const auto params = net.init_params(init);
  Rng rng(4);
  const auto stats = evaluate_policy(net, encoder, params, 200, four_room_levels(2), rng);
  CHECK(stats.mean < 0.05);
}

TEST_CASE("scripted solver nearly maximizes return on one-room levels") {
  TestLevelStream levels(3);
  std::vector<Action> plan;
  size_t next = 0;
  const auto stats = evaluate_policy(200, [&] { return levels.next(); }, 1, [&](const ChainMaze& env) {
    if (env.steps() == 0) {
      plan = solve_level(env.level());
      next = 0;
    }
    return plan.at(next++);
  });
  CHECK(stats.mean > 0.85);
  CHECK(stats.stderr_ >= 0.0);
}

TEST_CASE("evaluation needs at least one episode") {
  CHECK_THROWS_AS(evaluate_policy(0, [] { return LevelId{1}; }, kMaxTier,
                                  [](const ChainMaze&) { return Action::kUp; }),
                  ContractViolation);
}

TEST_CASE("welch test cases") {
  SUBCASE("identical samples") {
    const std::vector<double> a = {0.2, 0.4, 0.3};
    const auto r = welch_t_test(a, a);
    CHECK(r.t == doctest::Approx(0.0));
    CHECK(r.p_two_sided > 0.99);
    CHECK_FALSE(r.significant);
  }
  SUBCASE("constant shift with zero variance") {
    const std::vector<double> a = {1.0, 1.0, 1.0};
    const std::vector<double> b = {2.0, 2.0, 2.0};
    const auto r = welch_t_test(a, b);
    CHECK(std::isfinite(r.t));
    CHECK(r.significant);
    CHECK(r.p_a_less < 0.05);
  }
  SUBCASE("hand computed") {
    const std::vector<double> a = {1, 2, 3};
    const std::vector<double> b = {4, 5, 6};
    const auto r = welch_t_test(a, b);
    CHECK(r.t == doctest::Approx(-3.674).epsilon(1e-3));
    CHECK(r.df == doctest::Approx(4.0));
    CHECK(r.p_two_sided == doctest::Approx(0.0213).epsilon(1e-2));
    CHECK(r.significant);
  }
}

TEST_CASE("spearman correlation") {
  const std::vector<double> x = {1, 2, 3, 4, 5};
  const std::vector<double> y = {2, 1, 4, 3, 5};
  const auto r = spearman(x, y);
  CHECK(r.rho == doctest::Approx(0.8));
  CHECK(r.p_two_sided == doctest::Approx(0.1041).epsilon(1e-2));
  const std::vector<double> tied = {1, 1, 2, 2};
  CHECK(average_ranks(tied) == std::vector<double>{1.5, 1.5, 3.5, 3.5});
}

TEST_CASE("comparing runs") {
  const auto a = fake_logs({0.3, 0.4, 0.5});
  const auto same = compare_logs(a, a);
  CHECK_FALSE(same.welch.significant);
  CHECK(same.welch.p_two_sided > 0.99);
  CHECK(same.text().find("not significant") != std::string::npos);

  auto odd = fake_log(0.4);
  odd[0]["extra"] = 1;
  auto with_odd = fake_logs({0.3});
  with_odd.push_back(odd);
  CHECK_THROWS_AS(compare_logs(a, with_odd), ContractViolation);
  CHECK_THROWS_AS(compare_logs(fake_logs({0.3}), a), ContractViolation);
}

TEST_CASE("plots: empty and single-point series") {
  const auto empty = line_chart_svg("t", "x", "y", {{"none", {}, {}}});
  CHECK(count(empty, "<line") == 2);
  CHECK(count(empty, "<polyline") == 0);
  CHECK(count(empty, "<circle") == 0);
  const auto single = line_chart_svg("t", "x", "y", {{"one", {3.0}, {0.5}}});
  CHECK(count(single, "<circle") == 1);
  CHECK(count(single, "<polyline") == 0);
  CHECK_THROWS_AS(emit_plots({json{{"type", "update"}}}), ContractViolation);
}

TEST_CASE("plots match the golden files") {
  const auto log = read_metrics_log(kGolden / "tiny_metrics.jsonl");
  const auto files = emit_plots(log);
  CHECK(files.test_return_svg == slurp(kGolden / "tiny_test_return.svg"));
  CHECK(files.tier_mass_svg == slurp(kGolden / "tiny_tier_mass.svg"));
  CHECK(files.curriculum_csv == slurp(kGolden / "tiny_curriculum.csv"));
}

TEST_CASE("training runs are deterministic and well formed") {
  const auto dir_a = std::filesystem::temp_directory_path() / "plr_harness_a";
  const auto dir_b = std::filesystem::temp_directory_path() / "plr_harness_b";
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
  auto config = tiny_config();
  config.output_dir = dir_a.string();
  const auto a = run_training(config, 7);
  config.output_dir = dir_b.string();
  const auto b = run_training(config, 7);
  CHECK(slurp(dir_a / "seed_7" / "metrics.jsonl") == slurp(dir_b / "seed_7" / "metrics.jsonl"));
  CHECK(a.params == b.params);
  for (const char* file : {"params.bin", "score_table.jsonl", "config.json", "curriculum.csv", "test_return.svg",
                           "tier_mass.svg", "timing.jsonl"}) {
    CHECK(std::filesystem::exists(dir_a / "seed_7" / file));
  }

  int updates = 0;
  int evals = 0;
  for (const auto& rec : a.records) {
    CHECK(rec.contains("step"));
    if (rec.contains("tier_mass")) {
      double total = 0.0;
      for (double m : rec["tier_mass"]) total += m;
      CHECK(std::abs(total - 1.0) <= 1e-9);
    }
    const std::string type = rec["type"];
    updates += type == "update";
    evals += type == "eval";
  }
  CHECK(updates == 8);  // 1024 steps / (2 workers x 64 steps)
  CHECK(evals == 3);
  CHECK(a.records.back()["type"] == "final");

  const auto reloaded = load_params(dir_a / "seed_7" / "params.bin");
  CHECK(reloaded.params == a.params);
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("different seeds give different runs") {
  CHECK(run_log(tiny_config(), 1) != run_log(tiny_config(), 2));
}

TEST_CASE("experiment config round trips through json") {
  ExperimentConfig c = tiny_config();
  c.baseline = true;
  c.replay.metric = ScoreMetric::kGae;
  c.replay.prioritization = Prioritization::kProportional;
  c.replay.beta = 0.5;
  c.replay.rho = 0.1;
  c.encoding = InputEncoding::kFlat;
  c.update.learning_rate = 3e-4;
  c.output_dir = "somewhere";
  const auto back = ExperimentConfig::from_json(c.to_json());
  CHECK(back.to_json() == c.to_json());
  CHECK(back.replay.metric == ScoreMetric::kGae);
  CHECK(back.encoding == InputEncoding::kFlat);

  json bad = c.to_json();
  bad["replay"]["rho"] = 1.5;
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ContractViolation);
  bad = c.to_json();
  bad["n_train_levels"] = 0;
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ContractViolation);
}

TEST_CASE("checkpoint input size identifies the encoding") {
  const EnvConfig env{};
  CHECK(encoding_for_input_dim(env, env.obs_size()) == InputEncoding::kFlat);
  CHECK(encoding_for_input_dim(env, ObservationEncoder(env, InputEncoding::kEgocentric).size()) ==
        InputEncoding::kEgocentric);
  CHECK_FALSE(encoding_for_input_dim(env, 17).has_value());
}

#include "plr/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "plr/error.hpp"
#include "plr/plot.hpp"

namespace plr {

using nlohmann::json;

namespace {

json nullable(double x, bool present) { return present ? json(x) : json(nullptr); }

void require_finite(const json& record, std::initializer_list<const char*> keys) {
  for (const char* key : keys) {
    const auto it = record.find(key);
    if (it != record.end() && it->is_number() && !std::isfinite(it->get<double>())) {
      throw std::runtime_error(std::string("non-finite metric '") + key + "'");
    }
  }
}

class RunFiles {
 public:
  RunFiles(const std::string& output_dir, uint64_t seed) {
    if (output_dir.empty()) return;
    dir_ = std::filesystem::path(output_dir) / ("seed_" + std::to_string(seed));
    std::filesystem::create_directories(dir_);
    metrics_.open(dir_ / "metrics.jsonl", std::ios::trunc);
    timing_.open(dir_ / "timing.jsonl", std::ios::trunc);
    require(metrics_.good() && timing_.good(), "cannot open run log files");
  }

  bool enabled() const { return !dir_.empty(); }
  const std::filesystem::path& dir() const { return dir_; }

  void append(const json& record) {
    if (!enabled()) return;
    metrics_ << to_log_line(record) << '\n';
    metrics_.flush();
  }

  void time(int64_t update, int64_t step, double seconds) {
    if (!enabled()) return;
    timing_ << json{{"update", update}, {"step", step}, {"wall_clock_s", seconds}}.dump() << '\n';
  }

 private:
  std::filesystem::path dir_;
  std::ofstream metrics_;
  std::ofstream timing_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  require(env.max_tier >= 1 && env.max_tier <= kMaxTier, "max_tier must lie in [1, 4]");
  require(n_train_levels >= 1, "n_train_levels must be at least 1");
  replay.validate();
  update.validate();
  require(total_steps > 0 && eval_every > 0, "total_steps and eval_every must be positive");
  require(n_test_episodes >= 1, "n_test_episodes must be at least 1");
  require(sample_window >= 1, "sample_window must be at least 1");
  require(!hidden.empty(), "network needs at least one hidden layer");
}

json ExperimentConfig::to_json() const {
  return {
      {"env", {{"max_tier", env.max_tier}}},
      {"n_train_levels", n_train_levels},
      {"baseline", baseline},
      {"replay",
       {{"metric", std::string(to_string(replay.metric))},
        {"prioritization", std::string(to_string(replay.prioritization))},
        {"beta", replay.beta},
        {"rho", replay.rho},
        {"replay_prob", replay.replay_prob},
        {"warm_start", replay.warm_start},
        {"flip_uncertainty_sign", flip_uncertainty_sign}}},
      {"update",
       {{"gamma", update.gamma},
        {"lambda", update.lambda},
        {"rollout_length", update.rollout_length},
        {"epochs", update.epochs},
        {"minibatches", update.minibatches},
        {"clip", update.clip},
        {"workers", update.workers},
        {"learning_rate", update.learning_rate},
        {"adam_epsilon", update.adam_epsilon},
        {"entropy_coef", update.entropy_coef},
        {"value_coef", update.value_coef},
        {"max_grad_norm", update.max_grad_norm},
        {"reward_normalization", update.reward_normalization},
        {"advantage_normalization", update.advantage_normalization}}},
      {"network", {{"hidden", hidden}, {"encoding", std::string(to_string(encoding))}}},
      {"total_steps", total_steps},
      {"eval_every", eval_every},
      {"n_test_episodes", n_test_episodes},
      {"eval_greedy", eval_greedy},
      {"sample_window", sample_window},
      {"seeds", seeds},
      {"output_dir", output_dir},
  };
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  if (j.contains("env")) c.env.max_tier = j["env"].value("max_tier", c.env.max_tier);
  c.n_train_levels = j.value("n_train_levels", c.n_train_levels);
  c.baseline = j.value("baseline", c.baseline);
  if (j.contains("replay")) {
    const json& r = j["replay"];
    if (r.contains("metric")) c.replay.metric = parse_metric(r["metric"].get<std::string>());
    if (r.contains("prioritization")) {
      c.replay.prioritization = parse_prioritization(r["prioritization"].get<std::string>());
    }
    c.replay.beta = r.value("beta", c.replay.beta);
    c.replay.rho = r.value("rho", c.replay.rho);
    c.replay.replay_prob = r.value("replay_prob", c.replay.replay_prob);
    c.replay.warm_start = r.value("warm_start", c.replay.warm_start);
    c.flip_uncertainty_sign = r.value("flip_uncertainty_sign", c.flip_uncertainty_sign);
  }
  if (j.contains("update")) {
    const json& u = j["update"];
    c.update.gamma = u.value("gamma", c.update.gamma);
    c.update.lambda = u.value("lambda", c.update.lambda);
    c.update.rollout_length = u.value("rollout_length", c.update.rollout_length);
    c.update.epochs = u.value("epochs", c.update.epochs);
    c.update.minibatches = u.value("minibatches", c.update.minibatches);
    c.update.clip = u.value("clip", c.update.clip);
    c.update.workers = u.value("workers", c.update.workers);
    c.update.learning_rate = u.value("learning_rate", c.update.learning_rate);
    c.update.adam_epsilon = u.value("adam_epsilon", c.update.adam_epsilon);
    c.update.entropy_coef = u.value("entropy_coef", c.update.entropy_coef);
    c.update.value_coef = u.value("value_coef", c.update.value_coef);
    c.update.max_grad_norm = u.value("max_grad_norm", c.update.max_grad_norm);
    c.update.reward_normalization = u.value("reward_normalization", c.update.reward_normalization);
    c.update.advantage_normalization = u.value("advantage_normalization", c.update.advantage_normalization);
  }
  if (j.contains("network")) {
    c.hidden = j["network"].value("hidden", c.hidden);
    if (j["network"].contains("encoding")) c.encoding = parse_encoding(j["network"]["encoding"].get<std::string>());
  }
  c.total_steps = j.value("total_steps", c.total_steps);
  c.eval_every = j.value("eval_every", c.eval_every);
  c.n_test_episodes = j.value("n_test_episodes", c.n_test_episodes);
  c.eval_greedy = j.value("eval_greedy", c.eval_greedy);
  c.sample_window = j.value("sample_window", c.sample_window);
  c.seeds = j.value("seeds", c.seeds);
  c.output_dir = j.value("output_dir", c.output_dir);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open config file");
  return from_json(json::parse(in));
}

std::vector<LevelId> training_levels(int n) {
  std::vector<LevelId> ids(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) ids[static_cast<size_t>(i)] = static_cast<LevelId>(i);
  return ids;
}

// ---------------------------------------------------------------------------
// Evaluation

EvalStats evaluate_policy(int n_episodes, const std::function<LevelId()>& next_level, int max_tier,
                          const ActionPolicy& policy) {
  require(n_episodes >= 1, "evaluation needs at least one episode");
  ChainMaze env(EnvConfig{max_tier});
  std::vector<double> returns;
  returns.reserve(static_cast<size_t>(n_episodes));
  for (int e = 0; e < n_episodes; ++e) {
    env.reset(generate_level(next_level(), max_tier));
    double ret = 0.0;
    while (!env.done()) ret += env.step(policy(env)).reward;
    returns.push_back(ret);
  }
  EvalStats stats;
  stats.episodes = n_episodes;
  for (double r : returns) stats.mean += r;
  stats.mean /= n_episodes;
  if (n_episodes > 1) {
    double var = 0.0;
    for (double r : returns) var += (r - stats.mean) * (r - stats.mean);
    var /= n_episodes - 1;
    stats.stderr_ = std::sqrt(var / n_episodes);
  }
  return stats;
}

EvalStats evaluate_policy(const Network& net, const ObservationEncoder& encoder, std::span<const float> params,
                          int n_episodes, const std::function<LevelId()>& next_level, Rng& rng, bool greedy) {
  require(encoder.size() == net.config().input_dim, "encoder and network shapes differ");
  auto ws = net.make_workspace();
  Observation raw(static_cast<size_t>(encoder.env().obs_size()));
  std::vector<uint8_t> obs(static_cast<size_t>(encoder.size()));
  std::vector<double> probs;
  return evaluate_policy(n_episodes, next_level, encoder.env().max_tier, [&](const ChainMaze& env) {
    env.observe(raw);
    encoder.encode(raw, obs);
    std::copy(obs.begin(), obs.end(), ws.activations[0].begin());
    net.forward(params, ws);
    if (greedy) {
      return static_cast<Action>(std::max_element(ws.probs.begin(), ws.probs.end()) - ws.probs.begin());
    }
    probs.assign(ws.probs.begin(), ws.probs.end());
    return static_cast<Action>(sample_index(probs, rng));
  });
}

std::optional<InputEncoding> encoding_for_input_dim(const EnvConfig& env, int input_dim) {
  for (auto encoding : {InputEncoding::kFlat, InputEncoding::kEgocentric}) {
    if (ObservationEncoder(env, encoding).size() == input_dim) return encoding;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Training

std::string to_log_line(const json& record) { return record.dump(); }

TrainingResult run_training(const ExperimentConfig& config, uint64_t seed) {
  config.validate();
  const auto wall_start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
  };

  Rng root(seed);
  Rng init_rng = root.fork(1);
  Rng action_rng = root.fork(2);
  const uint64_t curriculum_seed = root.fork(3)();
  Rng update_rng = root.fork(4);
  Rng eval_rng = root.fork(5);
  TestLevelStream test_levels(seed);

  const UpdateConfig& uc = config.update;
  const Network net(config.network());
  const ObservationEncoder encoder = config.encoder();
  std::vector<float> params = net.init_params(init_rng);
  Adam optimizer(net.param_count(), uc.learning_rate, uc.adam_epsilon);
  LevelCurriculum curriculum(training_levels(config.n_train_levels), config.replay, config.scoring(),
                             config.baseline ? SamplingMode::kUniform : SamplingMode::kPrioritized,
                             config.env.max_tier, curriculum_seed);
  std::vector<Actor> actors(static_cast<size_t>(uc.workers), Actor(config.env));
  RewardNormalizer normalizer(uc.workers, uc.gamma);

  RunFiles files(config.output_dir, seed);
  TrainingResult result;
  auto emit = [&](json record) {
    require_finite(record, {"train_return", "policy_loss", "value_loss", "entropy", "test_return_mean"});
    files.append(record);
    result.records.push_back(std::move(record));
  };
  auto evaluate = [&](int n) {
    return evaluate_policy(net, encoder, params, n, [&] { return test_levels.next(); }, eval_rng,
                           config.eval_greedy);
  };

  std::deque<int> window;
  std::vector<double> recent_returns;
  bool warm_start_logged = false;
  int64_t step = 0;
  int64_t update = 0;
  int64_t next_eval = config.eval_every;

  try {
    while (step < config.total_steps) {
      const RolloutContext ctx{&net, &encoder, params, uc.reward_normalization ? &normalizer : nullptr, &action_rng};
      const RolloutBuffer buffer = collect_rollout(curriculum, actors, ctx, uc.rollout_length);
      step += static_cast<int64_t>(buffer.size());
      ++update;

      const PpoBatch batch = make_ppo_batch(buffer, uc.gamma, uc.lambda, uc.advantage_normalization);
      const UpdateDiagnostics diag = ppo_update(net, params, optimizer, batch, uc, update_rng);

      for (int d : buffer.sampled_difficulties) {
        window.push_back(d);
        if (static_cast<int>(window.size()) > config.sample_window) window.pop_front();
      }
      std::vector<double> window_freq(static_cast<size_t>(config.env.max_tier), 0.0);
      for (int d : window) window_freq[static_cast<size_t>(d - 1)] += 1.0 / static_cast<double>(window.size());

      double train_return = 0.0;
      for (const auto& ep : buffer.episodes) train_return += ep.ret;
      const bool have_episodes = !buffer.episodes.empty();
      if (have_episodes) train_return /= static_cast<double>(buffer.episodes.size());
      for (const auto& ep : buffer.episodes) recent_returns.push_back(ep.ret);

      double difficulty = 0.0;
      for (int d : buffer.sampled_difficulties) difficulty += d;
      const bool have_samples = !buffer.sampled_difficulties.empty();
      if (have_samples) difficulty /= static_cast<double>(buffer.sampled_difficulties.size());

      const auto mass = curriculum.tier_mass();
      emit({{"type", "update"},
            {"update", update},
            {"step", step},
            {"episodes", buffer.episodes.size()},
            {"train_return", nullable(train_return, have_episodes)},
            {"levels_sampled", buffer.sampled_difficulties.size()},
            {"mean_sampled_difficulty", nullable(difficulty, have_samples)},
            {"tier_mass", mass},
            {"window_tier_freq", window_freq},
            {"policy_loss", diag.mean_terms.policy},
            {"value_loss", diag.mean_terms.value},
            {"entropy", diag.mean_terms.entropy},
            {"approx_kl", diag.mean_terms.approx_kl},
            {"clip_fraction", diag.mean_terms.clip_fraction}});
      files.time(update, step, elapsed());

      if (!warm_start_logged && curriculum.warm_start_complete()) {
        warm_start_logged = true;
        emit({{"type", "warm_start_complete"}, {"update", update}, {"step", step}, {"tier_mass", mass}});
      }

      if (step >= next_eval && step < config.total_steps) {
        next_eval += config.eval_every;
        const EvalStats test = evaluate(config.n_test_episodes);
        double train_mean = 0.0;
        for (double r : recent_returns) train_mean += r;
        const bool have_recent = !recent_returns.empty();
        if (have_recent) train_mean /= static_cast<double>(recent_returns.size());
        recent_returns.clear();
        emit({{"type", "eval"},
              {"update", update},
              {"step", step},
              {"test_return_mean", test.mean},
              {"test_return_stderr", test.stderr_},
              {"train_return_mean", nullable(train_mean, have_recent)},
              {"tier_mass", mass},
              {"window_tier_freq", window_freq}});
      }
    }
  } catch (const std::exception& e) {
    files.append({{"type", "abort"}, {"update", update}, {"step", step}, {"reason", e.what()}});
    throw;
  }

  const EvalStats final_eval = evaluate(config.n_test_episodes);
  emit({{"type", "final"},
        {"update", update},
        {"step", step},
        {"test_return_mean", final_eval.mean},
        {"test_return_stderr", final_eval.stderr_},
        {"n_test_episodes", final_eval.episodes},
        {"tier_mass", curriculum.tier_mass()}});
  files.time(update, step, elapsed());

  if (files.enabled()) {
    save_params(files.dir() / "params.bin", net, params);
    std::ofstream(files.dir() / "score_table.jsonl") << curriculum.table().to_json_line() << '\n';
    std::ofstream(files.dir() / "config.json") << config.to_json().dump(2) << '\n';
    write_plot_files(emit_plots(result.records), files.dir());
  }
  result.params = std::move(params);
  result.table = curriculum.table();
  result.final_test_return = final_eval.mean;
  return result;
}

std::vector<json> read_metrics_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open metrics log");
  std::vector<json> records;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) records.push_back(json::parse(line));
  }
  return records;
}

// ---------------------------------------------------------------------------
// Comparison

namespace {

const json& final_record(const std::vector<json>& log) {
  for (auto it = log.rbegin(); it != log.rend(); ++it) {
    if (it->value("type", "") == "final") return *it;
  }
  throw ContractViolation("metrics log has no final record");
}

std::set<std::string> keys_of(const json& record) {
  std::set<std::string> keys;
  for (const auto& item : record.items()) keys.insert(item.key());
  return keys;
}

std::vector<std::vector<json>> logs_in(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "metrics.jsonl")) {
      paths.push_back(entry.path() / "metrics.jsonl");
    }
  }
  std::sort(paths.begin(), paths.end());
  std::vector<std::vector<json>> logs;
  for (const auto& p : paths) logs.push_back(read_metrics_log(p));
  return logs;
}

}  // namespace

ComparisonReport compare_logs(const std::vector<std::vector<json>>& logs_a,
                              const std::vector<std::vector<json>>& logs_b) {
  require(logs_a.size() >= 2 && logs_b.size() >= 2, "comparison needs at least two seeds per side");
  const auto schema = keys_of(final_record(logs_a.front()));
  ComparisonReport report;
  const std::pair<const std::vector<std::vector<json>>*, std::vector<double>*> sides[] = {
      {&logs_a, &report.final_a}, {&logs_b, &report.final_b}};
  for (const auto& [logs, finals] : sides) {
    for (const auto& log : *logs) {
      const json& rec = final_record(log);
      require(keys_of(rec) == schema, "metric schemas differ between runs");
      finals->push_back(rec.at("test_return_mean").get<double>());
    }
  }
  report.welch = welch_t_test(report.final_a, report.final_b);
  return report;
}

ComparisonReport compare_runs(const std::filesystem::path& dir_a, const std::filesystem::path& dir_b) {
  return compare_logs(logs_in(dir_a), logs_in(dir_b));
}

std::string ComparisonReport::text() const {
  std::ostringstream out;
  out << std::setprecision(6);
  out << "runs: A=" << final_a.size() << " B=" << final_b.size() << '\n';
  out << "mean final test return: A=" << welch.mean_a << " B=" << welch.mean_b << '\n';
  out << "welch t=" << welch.t << " df=" << welch.df << " p(two-sided)=" << welch.p_two_sided
      << " p(A<B)=" << welch.p_a_less << '\n';
  out << (welch.significant ? "significant" : "not significant") << " at alpha=0.05\n";
  return out.str();
}

}  // namespace plr

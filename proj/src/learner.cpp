#include "plr/learner.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <numeric>

#include "plr/error.hpp"

namespace plr {

void UpdateConfig::validate() const {
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(lambda > 0.0 && lambda <= 1.0, "lambda must lie in (0, 1]");
  require(rollout_length > 0 && epochs > 0 && minibatches > 0 && workers > 0,
          "rollout length, epochs, minibatches and workers must be positive");
  require(clip > 0.0 && clip < 1.0, "clip must lie in (0, 1)");
  require(learning_rate > 0.0 && adam_epsilon > 0.0, "learning rate and epsilon must be positive");
  require(entropy_coef >= 0.0 && value_coef >= 0.0, "loss coefficients must be nonnegative");
}

PolicyOutput forward(const Network& net, std::span<const float> params, std::span<const uint8_t> obs) {
  require(obs.size() == static_cast<size_t>(net.config().input_dim), "observation shape mismatch");
  auto ws = net.make_workspace();
  std::copy(obs.begin(), obs.end(), ws.activations[0].begin());
  net.forward(params, ws);
  PolicyOutput out;
  out.probs.assign(ws.probs.begin(), ws.probs.end());
  out.value = ws.value;
  return out;
}

void normalize_in_place(std::vector<double>& xs) {
  if (xs.size() < 2) return;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size() - 1);
  const double scale = 1.0 / (std::sqrt(var) + 1e-8);
  for (double& x : xs) x = (x - mean) * scale;
}

Targets compute_targets(std::span<const Trajectory> batch, double gamma, double lambda,
                        bool normalize_advantages) {
  Targets out;
  for (const Trajectory& traj : batch) {
    const auto adv = compute_gae(traj, gamma, lambda);
    for (size_t t = 0; t < adv.size(); ++t) {
      out.advantages.push_back(adv[t]);
      out.value_targets.push_back(traj.values[t] + adv[t]);
    }
  }
  if (normalize_advantages) normalize_in_place(out.advantages);
  return out;
}

// ---------------------------------------------------------------------------
// Adam

Adam::Adam(size_t n, double learning_rate, double epsilon, double beta1, double beta2)
    : m_(n, 0.0f), v_(n, 0.0f), lr_(learning_rate), eps_(epsilon), beta1_(beta1), beta2_(beta2) {}

void Adam::step(std::span<float> params, std::span<const float> grad) {
  require(params.size() == m_.size() && grad.size() == m_.size(), "optimizer size mismatch");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const auto b1 = static_cast<float>(beta1_);
  const auto b2 = static_cast<float>(beta2_);
  const auto step_size = static_cast<float>(lr_ / c1);
  const auto inv_sqrt_c2 = static_cast<float>(1.0 / std::sqrt(c2));
  const auto eps = static_cast<float>(eps_);
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i] = b1 * m_[i] + (1.0f - b1) * grad[i];
    v_[i] = b2 * v_[i] + (1.0f - b2) * grad[i] * grad[i];
    params[i] -= step_size * m_[i] / (std::sqrt(v_[i]) * inv_sqrt_c2 + eps);
  }
}

// ---------------------------------------------------------------------------
// PPO

UpdateDiagnostics ppo_update(const Network& net, std::vector<float>& params, Adam& optimizer,
                             const PpoBatch& batch, const UpdateConfig& config, Rng& rng) {
  config.validate();
  require(batch.size() > 0, "empty PPO batch");
  require(batch.obs_dim == net.config().input_dim, "batch observation shape mismatch");
  const LossWeights weights{config.clip, config.value_coef, config.entropy_coef};

  std::vector<float> working = params;
  Adam working_opt = optimizer;
  auto ws = net.make_workspace();
  std::vector<float> grad(net.param_count());
  std::vector<size_t> order(batch.size());
  std::iota(order.begin(), order.end(), size_t{0});
  const size_t minibatch = std::max<size_t>(1, batch.size() / static_cast<size_t>(config.minibatches));

  UpdateDiagnostics diag;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (size_t start = 0; start + minibatch <= order.size(); start += minibatch) {
      std::fill(grad.begin(), grad.end(), 0.0f);
      const std::span<const size_t> idx(order.data() + start, minibatch);
      const LossTerms terms = ppo_loss<float>(net, working, batch, idx, weights, grad, ws);
      double norm_sq = 0.0;
      for (float g : grad) norm_sq += static_cast<double>(g) * g;
      const double norm = std::sqrt(norm_sq);
      if (!std::isfinite(terms.total) || !std::isfinite(norm)) {
        throw NonFiniteLoss("non-finite PPO loss at epoch " + std::to_string(epoch) +
                            ": policy=" + std::to_string(terms.policy) +
                            " value=" + std::to_string(terms.value) +
                            " entropy=" + std::to_string(terms.entropy));
      }
      if (config.max_grad_norm > 0.0 && norm > config.max_grad_norm) {
        const auto scale = static_cast<float>(config.max_grad_norm / norm);
        for (float& g : grad) g *= scale;
      }
      working_opt.step(working, grad);

      diag.mean_terms.total += terms.total;
      diag.mean_terms.policy += terms.policy;
      diag.mean_terms.value += terms.value;
      diag.mean_terms.entropy += terms.entropy;
      diag.mean_terms.approx_kl += terms.approx_kl;
      diag.mean_terms.clip_fraction += terms.clip_fraction;
      diag.grad_norm += norm;
      ++diag.minibatch_steps;
    }
  }
  const double k = 1.0 / std::max(1, diag.minibatch_steps);
  for (double* x : {&diag.mean_terms.total, &diag.mean_terms.policy, &diag.mean_terms.value,
                    &diag.mean_terms.entropy, &diag.mean_terms.approx_kl,
                    &diag.mean_terms.clip_fraction, &diag.grad_norm}) {
    *x *= k;
  }
  params = std::move(working);
  optimizer = std::move(working_opt);
  return diag;
}

// ---------------------------------------------------------------------------
// RewardNormalizer

RewardNormalizer::RewardNormalizer(int streams, double gamma, double clip, double epsilon)
    : returns_(static_cast<size_t>(streams), 0.0), gamma_(gamma), clip_(clip), epsilon_(epsilon) {}

double RewardNormalizer::normalize(int stream, double reward, bool done) {
  double& ret = returns_.at(static_cast<size_t>(stream));
  ret = ret * gamma_ + reward;
  ++count_;
  const double d = ret - mean_;
  mean_ += d / static_cast<double>(count_);
  m2_ += d * (ret - mean_);
  if (done) ret = 0.0;
  const double scaled = reward / std::sqrt(return_std() * return_std() + epsilon_);
  return std::clamp(scaled, -clip_, clip_);
}

double RewardNormalizer::return_std() const {
  if (count_ < 2) return 1.0;
  return std::sqrt(m2_ / static_cast<double>(count_));
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kMagic[4] = {'P', 'L', 'R', 'P'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& out, uint32_t v) {
  const char bytes[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
  out.write(bytes, 4);
}

uint32_t get_u32(std::istream& in) {
  unsigned char bytes[4];
  in.read(reinterpret_cast<char*>(bytes), 4);
  require(in.good(), "truncated parameter checkpoint");
  return static_cast<uint32_t>(bytes[0]) | (static_cast<uint32_t>(bytes[1]) << 8) |
         (static_cast<uint32_t>(bytes[2]) << 16) | (static_cast<uint32_t>(bytes[3]) << 24);
}

}  // namespace

void save_params(const std::filesystem::path& path, const Network& net, std::span<const float> params) {
  require(params.size() == net.param_count(), "parameter vector has wrong size");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), "cannot open checkpoint for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  std::vector<std::vector<uint32_t>> shapes;
  for (const auto& layer : net.hidden_layers()) {
    shapes.push_back({static_cast<uint32_t>(layer.in), static_cast<uint32_t>(layer.out)});
    shapes.push_back({static_cast<uint32_t>(layer.out)});
  }
  const auto& p = net.policy_head();
  shapes.push_back({static_cast<uint32_t>(p.in), static_cast<uint32_t>(p.out)});
  shapes.push_back({static_cast<uint32_t>(p.out)});
  const auto& v = net.value_head();
  shapes.push_back({static_cast<uint32_t>(v.in), 1});
  shapes.push_back({1});
  put_u32(out, static_cast<uint32_t>(shapes.size()));
  for (const auto& shape : shapes) {
    put_u32(out, static_cast<uint32_t>(shape.size()));
    for (uint32_t d : shape) put_u32(out, d);
  }
  // The flat layout already matches the tensor order above.
  for (float x : params) put_u32(out, std::bit_cast<uint32_t>(x));
  require(out.good(), "failed writing checkpoint");
}

LoadedParams load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), "cannot open checkpoint");
  char magic[4];
  in.read(magic, 4);
  require(in.good() && std::equal(magic, magic + 4, kMagic), "not a parameter checkpoint");
  require(get_u32(in) == kVersion, "unsupported checkpoint version");
  const uint32_t count = get_u32(in);
  require(count >= 6 && count % 2 == 0, "malformed checkpoint tensor table");
  std::vector<std::vector<uint32_t>> shapes(count);
  size_t total = 0;
  for (auto& shape : shapes) {
    shape.resize(get_u32(in));
    size_t n = 1;
    for (auto& d : shape) {
      d = get_u32(in);
      n *= d;
    }
    total += n;
  }
  LoadedParams out;
  out.config.input_dim = static_cast<int>(shapes[0].at(0));
  out.config.hidden.clear();
  for (size_t k = 0; k + 4 < shapes.size(); k += 2) out.config.hidden.push_back(static_cast<int>(shapes[k].at(1)));
  out.config.n_actions = static_cast<int>(shapes[shapes.size() - 4].at(1));
  require(Network(out.config).param_count() == total, "checkpoint shapes are inconsistent");
  out.params.resize(total);
  for (float& x : out.params) x = std::bit_cast<float>(get_u32(in));
  return out;
}

}  // namespace plr

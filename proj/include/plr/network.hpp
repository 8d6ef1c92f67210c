#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "plr/error.hpp"
#include "plr/rng.hpp"

namespace plr {

struct NetworkConfig {
  int input_dim = 0;
  std::vector<int> hidden = {64, 64};
  int n_actions = 4;
  bool zero_init_heads = false;
};

/// Feed-forward actor-critic: tanh hidden layers shared by a softmax policy
/// head and a scalar value head. Parameters live in one flat vector so the
/// optimizer and gradient checks can treat them uniformly.
///
/// Weight matrices are stored input-major ([in][out]); a zero input then
/// skips a whole contiguous row, which matters for the mostly-zero grid
/// observations.
template <typename Scalar>
class ActorCritic {
 public:
  struct Layer {
    size_t weights = 0;  // offset of the [in][out] matrix
    size_t bias = 0;
    int in = 0;
    int out = 0;
  };

  // Activations of one forward pass, reused across samples.
  struct Workspace {
    std::vector<std::vector<Scalar>> activations;  // [0] = input, then each hidden layer
    std::vector<Scalar> logits;
    std::vector<Scalar> probs;
    std::vector<Scalar> log_probs;
    Scalar value = 0;
    std::vector<Scalar> delta_next;
    std::vector<Scalar> delta;
  };

  ActorCritic() = default;

  explicit ActorCritic(NetworkConfig config) : config_(std::move(config)) {
    require(config_.input_dim > 0 && config_.n_actions > 0 && !config_.hidden.empty(),
            "network dimensions must be positive");
    size_t offset = 0;
    int in = config_.input_dim;
    for (int width : config_.hidden) {
      require(width > 0, "hidden widths must be positive");
      layers_.push_back({offset, offset + static_cast<size_t>(in) * width, in, width});
      offset += static_cast<size_t>(in) * width + width;
      in = width;
    }
    policy_ = {offset, offset + static_cast<size_t>(in) * config_.n_actions, in, config_.n_actions};
    offset += static_cast<size_t>(in) * config_.n_actions + config_.n_actions;
    value_ = {offset, offset + static_cast<size_t>(in), in, 1};
    offset += static_cast<size_t>(in) + 1;
    param_count_ = offset;
  }

  const NetworkConfig& config() const { return config_; }
  size_t param_count() const { return param_count_; }
  const std::vector<Layer>& hidden_layers() const { return layers_; }
  const Layer& policy_head() const { return policy_; }
  const Layer& value_head() const { return value_; }

  std::vector<Scalar> init_params(Rng& rng) const {
    std::vector<Scalar> params(param_count_, Scalar(0));
    auto fill = [&](const Layer& layer, double gain) {
      const double bound = gain * std::sqrt(6.0 / (layer.in + layer.out));
      for (size_t k = 0; k < static_cast<size_t>(layer.in) * layer.out; ++k) {
        params[layer.weights + k] = static_cast<Scalar>(rng.uniform(-bound, bound));
      }
    };
    for (const Layer& layer : layers_) fill(layer, 1.0);
    if (!config_.zero_init_heads) {
      fill(policy_, 0.01);
      fill(value_, 1.0);
    }
    return params;
  }

  Workspace make_workspace() const {
    Workspace ws;
    ws.activations.resize(layers_.size() + 1);
    ws.activations[0].resize(config_.input_dim);
    for (size_t l = 0; l < layers_.size(); ++l) ws.activations[l + 1].resize(layers_[l].out);
    ws.logits.resize(config_.n_actions);
    ws.probs.resize(config_.n_actions);
    ws.log_probs.resize(config_.n_actions);
    return ws;
  }

  /// Runs the network on `ws.activations[0]`, which the caller fills.
  void forward(std::span<const Scalar> params, Workspace& ws) const {
    require(params.size() == param_count_, "parameter vector has wrong size");
    require(ws.activations[0].size() == static_cast<size_t>(config_.input_dim),
            "observation has wrong size");
    for (size_t l = 0; l < layers_.size(); ++l) {
      const Layer& layer = layers_[l];
      const auto& x = ws.activations[l];
      auto& h = ws.activations[l + 1];
      std::copy_n(params.data() + layer.bias, layer.out, h.data());
      for (int i = 0; i < layer.in; ++i) {
        const Scalar xi = x[i];
        if (xi == Scalar(0)) continue;
        const Scalar* w = params.data() + layer.weights + static_cast<size_t>(i) * layer.out;
        for (int j = 0; j < layer.out; ++j) h[j] += xi * w[j];
      }
      for (Scalar& v : h) v = std::tanh(v);
    }
    const auto& top = ws.activations.back();
    std::copy_n(params.data() + policy_.bias, policy_.out, ws.logits.data());
    ws.value = params[value_.bias];
    for (int i = 0; i < policy_.in; ++i) {
      const Scalar* w = params.data() + policy_.weights + static_cast<size_t>(i) * policy_.out;
      for (int j = 0; j < policy_.out; ++j) ws.logits[j] += top[i] * w[j];
      ws.value += top[i] * params[value_.weights + i];
    }
    const Scalar max_logit = *std::max_element(ws.logits.begin(), ws.logits.end());
    Scalar total = 0;
    for (int j = 0; j < config_.n_actions; ++j) {
      ws.probs[j] = std::exp(ws.logits[j] - max_logit);
      total += ws.probs[j];
    }
    const Scalar log_total = std::log(total);
    for (int j = 0; j < config_.n_actions; ++j) {
      ws.probs[j] /= total;
      ws.log_probs[j] = ws.logits[j] - max_logit - log_total;
    }
  }

  /// Accumulates into `grad` the parameter gradient of a loss whose partials
  /// with respect to the logits and the value are given. Uses the
  /// activations left in `ws` by the last forward().
  void backward(std::span<const Scalar> params, Workspace& ws, std::span<const Scalar> d_logits,
                Scalar d_value, std::span<Scalar> grad) const {
    const auto& top = ws.activations.back();
    auto& delta = ws.delta;
    delta.assign(policy_.in, Scalar(0));
    for (int i = 0; i < policy_.in; ++i) {
      Scalar* gw = grad.data() + policy_.weights + static_cast<size_t>(i) * policy_.out;
      const Scalar* w = params.data() + policy_.weights + static_cast<size_t>(i) * policy_.out;
      Scalar acc = 0;
      for (int j = 0; j < policy_.out; ++j) {
        gw[j] += top[i] * d_logits[j];
        acc += w[j] * d_logits[j];
      }
      grad[value_.weights + i] += top[i] * d_value;
      delta[i] = acc + params[value_.weights + i] * d_value;
    }
    for (int j = 0; j < policy_.out; ++j) grad[policy_.bias + j] += d_logits[j];
    grad[value_.bias] += d_value;

    for (size_t l = layers_.size(); l-- > 0;) {
      const Layer& layer = layers_[l];
      const auto& h = ws.activations[l + 1];
      const auto& x = ws.activations[l];
      for (int j = 0; j < layer.out; ++j) delta[j] *= Scalar(1) - h[j] * h[j];
      for (int j = 0; j < layer.out; ++j) grad[layer.bias + j] += delta[j];
      const bool need_input_delta = l > 0;
      if (need_input_delta) ws.delta_next.assign(layer.in, Scalar(0));
      for (int i = 0; i < layer.in; ++i) {
        const Scalar xi = x[i];
        const size_t row = layer.weights + static_cast<size_t>(i) * layer.out;
        if (xi != Scalar(0)) {
          Scalar* gw = grad.data() + row;
          for (int j = 0; j < layer.out; ++j) gw[j] += xi * delta[j];
        }
        if (need_input_delta) {
          const Scalar* w = params.data() + row;
          Scalar acc = 0;
          for (int j = 0; j < layer.out; ++j) acc += w[j] * delta[j];
          ws.delta_next[i] = acc;
        }
      }
      if (need_input_delta) std::swap(delta, ws.delta_next);
    }
  }

 private:
  NetworkConfig config_;
  std::vector<Layer> layers_;
  Layer policy_;
  Layer value_;
  size_t param_count_ = 0;
};

}  // namespace plr

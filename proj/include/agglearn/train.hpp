#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <span>
#include <variant>
#include <vector>

#include "agglearn/model.hpp"
#include "agglearn/rng.hpp"

// Minibatch first-order optimization of ParamMap weights against an
// AggregateLoss: plain SGD and Adam with decoupled weight decay.

namespace agglearn {

struct SgdConfig {
  double lr = 0.1;
};

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

using OptimizerConfig = std::variant<SgdConfig, AdamWConfig>;

struct TrainConfig {
  OptimizerConfig optimizer = SgdConfig{};
  std::size_t epochs = 20;
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  double sigma = 1.0;  // homoscedastic scale handed to Gaussian/Cauchy losses
  bool log_progress = false;

  void validate() const {
    require(batch_size >= 1, "TrainConfig: batch_size must be >= 1");
    require(sigma > 0.0, "TrainConfig: sigma must be positive");
    if (const auto* sgd = std::get_if<SgdConfig>(&optimizer)) {
      require(sgd->lr > 0.0, "TrainConfig: learning rate must be positive");
    } else {
      const auto& adam = std::get<AdamWConfig>(optimizer);
      require(adam.lr > 0.0, "TrainConfig: learning rate must be positive");
      require(adam.beta1 >= 0.0 && adam.beta1 < 1.0 && adam.beta2 >= 0.0 && adam.beta2 < 1.0,
              "TrainConfig: betas must lie in [0, 1)");
    }
  }
};

struct TrainReport {
  std::vector<double> loss_per_epoch;
  std::vector<double> final_weights;
  double wall_time_seconds = 0.0;
};

inline void sgd_step(std::span<double> weights, std::span<const double> grad, double lr) {
  require(weights.size() == grad.size(), "sgd_step: shape mismatch");
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] -= lr * grad[i];
}

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  long long step = 0;

  static AdamWState zeros(std::size_t n) {
    return {std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), 0};
  }
};

/// Standard Adam moment updates with bias correction; weight decay is applied
/// as w -= lr * wd * w, decoupled from the adaptive term.
inline void adamw_step(AdamWState& state, std::span<double> weights, std::span<const double> grad,
                       const AdamWConfig& config) {
  require(weights.size() == grad.size() && state.m.size() == weights.size() &&
              state.v.size() == weights.size(),
          "adamw_step: shape mismatch");
  ++state.step;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < weights.size(); ++i) {
    state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
    state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
    const double mhat = state.m[i] / bc1;
    const double vhat = state.v[i] / bc2;
    weights[i] -= config.lr * (mhat / (std::sqrt(vhat) + config.eps) + config.weight_decay * weights[i]);
  }
}

/// Epochs of shuffled minibatch passes. The shuffle order is a pure function
/// of (seed, epoch); reruns with identical inputs are bitwise identical.
/// config.sigma is authoritative for the shared scale: it overrides both
/// loss.sigma and, for Cauchy targets, the map's fixed scale.
inline TrainReport fit(ParamMap& map, AggregateLoss loss, const AggregateDataset& data,
                       const TrainConfig& config) {
  map.validate();
  config.validate();
  require(data.size() > 0, "fit: empty dataset");
  loss.sigma = config.sigma;
  if (map.family == TargetFamily::CauchyLoc) map.fixed_scale = config.sigma;

  const auto started = std::chrono::steady_clock::now();
  TrainReport report;
  report.loss_per_epoch.reserve(config.epochs);

  AdamWState adam_state = AdamWState::zeros(map.weights.size());
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(mix_seed(config.seed, epoch));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t size = std::min(config.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, size);
      auto [loss_value, grad] = batch_loss_and_grad_indexed(map, loss, data, batch);
      if (const auto* sgd = std::get_if<SgdConfig>(&config.optimizer)) {
        sgd_step(map.weights, grad, sgd->lr);
      } else {
        adamw_step(adam_state, map.weights, grad, std::get<AdamWConfig>(config.optimizer));
      }
      epoch_loss += loss_value * static_cast<double>(size);
      seen += size;
    }
    const double mean_loss = (seen > 0) ? epoch_loss / static_cast<double>(seen) : 0.0;
    report.loss_per_epoch.push_back(mean_loss);
    if (config.log_progress) std::cerr << "epoch " << epoch << " loss " << mean_loss << '\n';
  }

  report.final_weights = map.weights;
  report.wall_time_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return report;
}

}  // namespace agglearn

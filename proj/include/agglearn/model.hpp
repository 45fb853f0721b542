#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "agglearn/core.hpp"
#include "agglearn/likelihood.hpp"
#include "agglearn/rng.hpp"

// The deterministic parameter map f: X -> theta. Linear model and a one-hidden
// layer ReLU MLP with hand-derived reverse-mode gradients (affine, ReLU,
// softmax) from d nll / d theta down to d nll / d W.

namespace agglearn {

enum class Architecture { Linear, Mlp };
enum class Head { Softmax, Identity, ExpPositive };
enum class TargetFamily { ClassProbs, GaussLoc, CauchyLoc, PoissonRate, GumbelScore, ExpRate };

inline Head head_for(TargetFamily family) {
  switch (family) {
    case TargetFamily::ClassProbs: return Head::Softmax;
    case TargetFamily::GaussLoc:
    case TargetFamily::CauchyLoc:
    case TargetFamily::GumbelScore: return Head::Identity;
    case TargetFamily::PoissonRate:
    case TargetFamily::ExpRate: return Head::ExpPositive;
  }
  return Head::Identity;
}

/// Number of trainable entries at the head of the parameter-gradient block
/// (CauchyLoc carries [da, db] but only the location is mapped from X).
inline std::size_t trainable_theta_dim(TargetFamily family, std::size_t out_dim) {
  return family == TargetFamily::ClassProbs ? out_dim : 1;
}

struct ParamMap {
  Architecture architecture = Architecture::Linear;
  Head head = Head::Identity;
  TargetFamily family = TargetFamily::GaussLoc;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 0;  // Mlp only
  std::size_t out_dim = 1;     // C for ClassProbs, 1 otherwise
  double fixed_scale = 1.0;    // CauchyLoc b
  std::vector<double> weights;

  static ParamMap linear(std::size_t input_dim, std::size_t out_dim, TargetFamily family) {
    ParamMap m;
    m.architecture = Architecture::Linear;
    m.family = family;
    m.head = head_for(family);
    m.input_dim = input_dim;
    m.out_dim = out_dim;
    m.weights.assign(m.parameter_count(), 0.0);
    return m;
  }

  static ParamMap mlp(std::size_t input_dim, std::size_t hidden_dim, std::size_t out_dim,
                      TargetFamily family) {
    ParamMap m;
    m.architecture = Architecture::Mlp;
    m.family = family;
    m.head = head_for(family);
    m.input_dim = input_dim;
    m.hidden_dim = hidden_dim;
    m.out_dim = out_dim;
    m.weights.assign(m.parameter_count(), 0.0);
    return m;
  }

  // Weight layout: Linear = [W (out x in) row-major, bias (out)];
  // Mlp = [W1 (hidden x in), b1 (hidden), W2 (out x hidden), b2 (out)].
  std::size_t parameter_count() const {
    if (architecture == Architecture::Linear) return out_dim * input_dim + out_dim;
    return hidden_dim * input_dim + hidden_dim + out_dim * hidden_dim + out_dim;
  }

  void validate() const {
    require(input_dim > 0 && out_dim > 0, "ParamMap: dimensions must be positive");
    require(architecture == Architecture::Linear || hidden_dim > 0,
            "ParamMap: MLP needs a hidden layer");
    require(weights.size() == parameter_count(), "ParamMap: weight vector has wrong length");
    require(family != TargetFamily::ClassProbs || out_dim >= 2,
            "ParamMap: classification needs at least two classes");
    require(family == TargetFamily::ClassProbs || out_dim == 1,
            "ParamMap: scalar target families need out_dim = 1");
  }
};

namespace detail {

struct ForwardCache {
  std::vector<double> hidden;  // post-ReLU activations (Mlp)
  std::vector<double> pre;     // pre-head outputs
  std::vector<double> out;     // post-head outputs
};

constexpr double kSoftmaxFloor = 1e-12;

inline void affine(std::span<const double> w, std::size_t rows, std::size_t cols,
                   std::span<const double> x, std::span<double> y) {
  // w holds the row-major matrix followed by the bias vector.
  for (std::size_t r = 0; r < rows; ++r) {
    double acc = w[rows * cols + r];
    const double* row = w.data() + r * cols;
    for (std::size_t c = 0; c < cols; ++c) acc += row[c] * x[c];
    y[r] = acc;
  }
}

inline ForwardCache run_forward(const ParamMap& map, std::span<const double> x) {
  require(x.size() == map.input_dim, "forward: feature dimension mismatch");
  ForwardCache cache;
  cache.pre.resize(map.out_dim);
  if (map.architecture == Architecture::Linear) {
    affine(map.weights, map.out_dim, map.input_dim, x, cache.pre);
  } else {
    cache.hidden.resize(map.hidden_dim);
    affine(map.weights, map.hidden_dim, map.input_dim, x, cache.hidden);
    for (double& h : cache.hidden) h = std::max(h, 0.0);
    const std::size_t offset = map.hidden_dim * map.input_dim + map.hidden_dim;
    affine(std::span<const double>(map.weights).subspan(offset), map.out_dim, map.hidden_dim,
           cache.hidden, cache.pre);
  }
  cache.out = cache.pre;
  switch (map.head) {
    case Head::Identity:
      break;
    case Head::ExpPositive:
      for (double& v : cache.out) v = std::exp(v);
      break;
    case Head::Softmax: {
      const double m = *std::max_element(cache.out.begin(), cache.out.end());
      double sum = 0.0;
      for (double& v : cache.out) {
        v = std::exp(v - m);
        sum += v;
      }
      for (double& v : cache.out) v = std::max(v / sum, kSoftmaxFloor);
      break;
    }
  }
  return cache;
}

inline TargetParams to_target_params(const ParamMap& map, const ForwardCache& cache) {
  switch (map.family) {
    case TargetFamily::ClassProbs: return ClassProbs{cache.out};
    case TargetFamily::GaussLoc: return GaussLoc{cache.out[0]};
    case TargetFamily::CauchyLoc: return CauchyLoc{cache.out[0], map.fixed_scale};
    case TargetFamily::PoissonRate: return PoissonRate{cache.out[0]};
    case TargetFamily::GumbelScore: return GumbelScore{cache.out[0]};
    case TargetFamily::ExpRate: return ExpRate{cache.out[0]};
  }
  throw std::invalid_argument("forward: unknown target family");
}

/// Accumulates d nll / d W into grad, given d nll / d (head output).
inline void run_backward(const ParamMap& map, std::span<const double> x, const ForwardCache& cache,
                         std::span<const double> dtheta, std::span<double> grad) {
  require(dtheta.size() == map.out_dim, "backward: gradient dimension mismatch");
  std::vector<double> dpre(map.out_dim);
  switch (map.head) {
    case Head::Identity:
      std::copy(dtheta.begin(), dtheta.end(), dpre.begin());
      break;
    case Head::ExpPositive:
      for (std::size_t i = 0; i < map.out_dim; ++i) dpre[i] = dtheta[i] * cache.out[i];
      break;
    case Head::Softmax: {
      double dot = 0.0;
      for (std::size_t i = 0; i < map.out_dim; ++i) dot += dtheta[i] * cache.out[i];
      for (std::size_t i = 0; i < map.out_dim; ++i) dpre[i] = cache.out[i] * (dtheta[i] - dot);
      break;
    }
  }
  if (map.architecture == Architecture::Linear) {
    for (std::size_t r = 0; r < map.out_dim; ++r) {
      for (std::size_t c = 0; c < map.input_dim; ++c) grad[r * map.input_dim + c] += dpre[r] * x[c];
      grad[map.out_dim * map.input_dim + r] += dpre[r];
    }
    return;
  }
  const std::size_t w1 = 0;
  const std::size_t b1 = map.hidden_dim * map.input_dim;
  const std::size_t w2 = b1 + map.hidden_dim;
  const std::size_t b2 = w2 + map.out_dim * map.hidden_dim;
  std::vector<double> dhidden(map.hidden_dim, 0.0);
  for (std::size_t r = 0; r < map.out_dim; ++r) {
    for (std::size_t c = 0; c < map.hidden_dim; ++c) {
      grad[w2 + r * map.hidden_dim + c] += dpre[r] * cache.hidden[c];
      dhidden[c] += map.weights[w2 + r * map.hidden_dim + c] * dpre[r];
    }
    grad[b2 + r] += dpre[r];
  }
  for (std::size_t h = 0; h < map.hidden_dim; ++h) {
    if (cache.hidden[h] <= 0.0) continue;  // ReLU gate
    for (std::size_t c = 0; c < map.input_dim; ++c) grad[w1 + h * map.input_dim + c] += dhidden[h] * x[c];
    grad[b1 + h] += dhidden[h];
  }
}

}  // namespace detail

/// Head-transformed network output as TargetParams; pure in (weights, x).
inline TargetParams forward(const ParamMap& map, std::span<const double> x) {
  map.validate();
  return detail::to_target_params(map, detail::run_forward(map, x));
}

/// d nll / d W by the chain rule; dtheta is the gradient with respect to the
/// head outputs (the trainable slice of the TargetParams).
inline std::vector<double> backward(const ParamMap& map, std::span<const double> x,
                                    std::span<const double> dtheta) {
  map.validate();
  std::vector<double> grad(map.weights.size(), 0.0);
  const detail::ForwardCache cache = detail::run_forward(map, x);
  detail::run_backward(map, x, cache, dtheta, grad);
  return grad;
}

namespace detail {

inline double example_loss_and_grad(const ParamMap& map, const AggregateLoss& loss,
                                    const AggregateExample& example, std::span<double> grad,
                                    std::vector<ForwardCache>& caches,
                                    std::vector<TargetParams>& thetas) {
  const std::size_t k = example.features.size();
  caches.clear();
  thetas.clear();
  for (std::size_t i = 0; i < k; ++i) {
    caches.push_back(run_forward(map, example.features[i]));
    thetas.push_back(to_target_params(map, caches.back()));
  }
  const LossResult r = aggregate_nll(loss, example, thetas);
  const std::size_t dim = trainable_theta_dim(map.family, map.out_dim);
  for (std::size_t i = 0; i < k; ++i) {
    run_backward(map, example.features[i], caches[i],
                 std::span<const double>(r.grad_theta[i]).first(dim), grad);
  }
  return r.nll;
}

}  // namespace detail

/// Mean per-example nll and the matching averaged weight gradient.
inline std::pair<double, std::vector<double>> batch_loss_and_grad(
    const ParamMap& map, const AggregateLoss& loss, std::span<const AggregateExample> batch) {
  map.validate();
  require(!batch.empty(), "batch_loss_and_grad: empty batch");
  std::vector<double> grad(map.weights.size(), 0.0);
  std::vector<detail::ForwardCache> caches;
  std::vector<TargetParams> thetas;
  double total = 0.0;
  for (const auto& example : batch) {
    total += detail::example_loss_and_grad(map, loss, example, grad, caches, thetas);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (double& g : grad) g *= inv;
  return {total * inv, std::move(grad)};
}

/// Same as batch_loss_and_grad but over dataset rows selected by index.
inline std::pair<double, std::vector<double>> batch_loss_and_grad_indexed(
    const ParamMap& map, const AggregateLoss& loss, const AggregateDataset& data,
    std::span<const std::size_t> indices) {
  map.validate();
  require(!indices.empty(), "batch_loss_and_grad_indexed: empty batch");
  std::vector<double> grad(map.weights.size(), 0.0);
  std::vector<detail::ForwardCache> caches;
  std::vector<TargetParams> thetas;
  double total = 0.0;
  for (std::size_t idx : indices) {
    total += detail::example_loss_and_grad(map, loss, data.examples[idx], grad, caches, thetas);
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (double& g : grad) g *= inv;
  return {total * inv, std::move(grad)};
}

/// Glorot-uniform weights, zero biases; deterministic per seed.
inline std::vector<double> init_weights(const ParamMap& map, std::uint64_t seed) {
  std::vector<double> w(map.parameter_count(), 0.0);
  Rng rng(seed);
  auto fill_layer = [&](std::size_t offset, std::size_t fan_out, std::size_t fan_in) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (std::size_t i = 0; i < fan_out * fan_in; ++i) {
      w[offset + i] = rng.next_uniform(-bound, bound);
    }
  };
  if (map.architecture == Architecture::Linear) {
    fill_layer(0, map.out_dim, map.input_dim);
  } else {
    fill_layer(0, map.hidden_dim, map.input_dim);
    fill_layer(map.hidden_dim * map.input_dim + map.hidden_dim, map.out_dim, map.hidden_dim);
  }
  return w;
}

// ---------------------------------------------------------------------------
// Checkpoints: one text header line describing the architecture, then one
// hexfloat per line. Hexfloat round-trips every finite double bit-exactly.

inline void save_weights(const ParamMap& map, std::ostream& os) {
  os << "agglearn-weights v1"
     << " arch=" << (map.architecture == Architecture::Linear ? "linear" : "mlp")
     << " family=" << static_cast<int>(map.family) << " in=" << map.input_dim
     << " hidden=" << map.hidden_dim << " out=" << map.out_dim << " scale=" << std::hexfloat
     << map.fixed_scale << std::defaultfloat << " count=" << map.weights.size() << '\n';
  os << std::hexfloat;
  for (double w : map.weights) os << w << '\n';
  os << std::defaultfloat;
}

inline ParamMap load_weights(std::istream& is) {
  std::string line;
  require(static_cast<bool>(std::getline(is, line)), "load_weights: missing header");
  std::istringstream header(line);
  std::string magic, version;
  header >> magic >> version;
  require(magic == "agglearn-weights" && version == "v1", "load_weights: bad header");
  ParamMap map;
  std::size_t count = 0;
  std::string field;
  while (header >> field) {
    const auto eq = field.find('=');
    require(eq != std::string::npos, "load_weights: malformed header field");
    const std::string key = field.substr(0, eq);
    const std::string value = field.substr(eq + 1);
    if (key == "arch") {
      map.architecture = (value == "mlp") ? Architecture::Mlp : Architecture::Linear;
    } else if (key == "family") {
      map.family = static_cast<TargetFamily>(std::stoi(value));
    } else if (key == "in") {
      map.input_dim = std::stoull(value);
    } else if (key == "hidden") {
      map.hidden_dim = std::stoull(value);
    } else if (key == "out") {
      map.out_dim = std::stoull(value);
    } else if (key == "scale") {
      map.fixed_scale = std::strtod(value.c_str(), nullptr);
    } else if (key == "count") {
      count = std::stoull(value);
    }
  }
  map.head = head_for(map.family);
  map.weights.resize(count);
  for (double& w : map.weights) {
    require(static_cast<bool>(std::getline(is, line)), "load_weights: truncated payload");
    w = std::strtod(line.c_str(), nullptr);
  }
  require(count == map.parameter_count(), "load_weights: weight count mismatch");
  return map;
}

inline void save_weights(const ParamMap& map, const std::filesystem::path& path) {
  std::ofstream os(path);
  require(os.good(), "save_weights: cannot open " + path.string());
  save_weights(map, os);
}

inline ParamMap load_weights(const std::filesystem::path& path) {
  std::ifstream is(path);
  require(is.good(), "load_weights: cannot open " + path.string());
  return load_weights(is);
}

}  // namespace agglearn

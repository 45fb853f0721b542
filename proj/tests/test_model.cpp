#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstring>
#include <sstream>
#include <vector>

#include "agglearn/model.hpp"
#include "agglearn/oracle.hpp"
#include "agglearn/rng.hpp"

using namespace agglearn;
using Catch::Matchers::WithinAbs;

namespace {

double max_relative_error(std::span<const double> a, std::span<const double> b) {
  REQUIRE(a.size() == b.size());
  double err = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    err = std::max(err, std::fabs(a[i] - b[i]) / std::max({1.0, std::fabs(a[i]), std::fabs(b[i])}));
  }
  return err;
}

}  // namespace

TEST_CASE("forward basics") {
  SECTION("zero linear weights give zero location") {
    ParamMap map = ParamMap::linear(3, 1, TargetFamily::GaussLoc);
    const std::vector<double> x = {1.0, -2.0, 0.5};
    CHECK(std::get<GaussLoc>(forward(map, x)).mu == 0.0);
  }

  SECTION("zero logits give the uniform simplex") {
    ParamMap map = ParamMap::linear(2, 4, TargetFamily::ClassProbs);
    const std::vector<double> x = {0.3, 0.7};
    const auto probs = std::get<ClassProbs>(forward(map, x));
    for (double p : probs.p) CHECK_THAT(p, WithinAbs(0.25, 1e-12));
  }

  SECTION("fixed seed weights give reproducible MLP output") {
    ParamMap map = ParamMap::mlp(2, 16, 3, TargetFamily::ClassProbs);
    map.weights = init_weights(map, 123);
    const std::vector<double> x = {0.4, -1.1};
    const auto a = std::get<ClassProbs>(forward(map, x));
    const auto b = std::get<ClassProbs>(forward(map, x));
    CHECK(a.p == b.p);
  }

  SECTION("softmax output is a floored simplex") {
    ParamMap map = ParamMap::mlp(2, 8, 5, TargetFamily::ClassProbs);
    map.weights = init_weights(map, 9);
    Rng rng(10);
    for (int i = 0; i < 50; ++i) {
      const std::vector<double> x = {rng.next_uniform(-30.0, 30.0), rng.next_uniform(-30.0, 30.0)};
      const auto probs = std::get<ClassProbs>(forward(map, x));
      double sum = 0.0;
      for (double p : probs.p) {
        CHECK(p >= 1e-12);
        sum += p;
      }
      CHECK_THAT(sum, WithinAbs(1.0, 1e-9));
    }
  }

  SECTION("dimension mismatch is rejected") {
    ParamMap map = ParamMap::linear(3, 1, TargetFamily::GaussLoc);
    CHECK_THROWS_AS(forward(map, std::vector<double>{1.0, 2.0}), std::invalid_argument);
  }
}

TEST_CASE("backward basics") {
  ParamMap map = ParamMap::linear(3, 2, TargetFamily::ClassProbs);
  map.weights = init_weights(map, 5);
  const std::vector<double> x = {0.5, -1.0, 2.0};

  SECTION("zero upstream gradient gives a zero weight gradient") {
    const std::vector<double> zero = {0.0, 0.0};
    for (double g : backward(map, x, zero)) CHECK(g == 0.0);
  }

  SECTION("identity-head linear gradient is dtheta times x") {
    ParamMap lin = ParamMap::linear(3, 1, TargetFamily::GaussLoc);
    lin.weights = init_weights(lin, 6);
    const std::vector<double> dtheta = {1.7};
    const auto grad = backward(lin, x, dtheta);
    for (std::size_t j = 0; j < 3; ++j) CHECK_THAT(grad[j], WithinAbs(1.7 * x[j], 1e-15));
    CHECK_THAT(grad[3], WithinAbs(1.7, 1e-15));
  }
}

TEST_CASE("end-to-end gradients match finite differences") {
  // A fast spot check per head; the acceptance suite sweeps every loss family.
  Rng rng(60);
  const auto indicator = ClassDistanceMatrix::indicator(3);

  auto fd_check = [&](ParamMap map, const AggregateLoss& loss, const AggregateExample& example) {
    map.weights = init_weights(map, rng.next_u64());
    const AggregateExample batch[] = {example};
    const auto [nll, grad] = batch_loss_and_grad(map, loss, batch);
    ParamMap probe = map;
    const auto fd = oracle::finite_diff_grad(
        [&](std::span<const double> w) {
          probe.weights.assign(w.begin(), w.end());
          return batch_loss_and_grad(probe, loss, batch).first;
        },
        map.weights);
    CHECK(max_relative_error(grad, fd) <= 1e-4);
  };

  auto random_x = [&](std::size_t d) {
    std::vector<double> x(d);
    for (double& v : x) v = rng.next_gaussian();
    return x;
  };

  for (int i = 0; i < 5; ++i) {
    {  // softmax head through the triplet loss, MLP
      AggregateExample ex;
      ex.features = {random_x(3), random_x(3), random_x(3)};
      ex.observation = static_cast<int>(rng.next_below(2));
      AggregateLoss loss;
      loss.family = LossFamily::Triplet;
      loss.distance = indicator;
      fd_check(ParamMap::mlp(3, 8, 3, TargetFamily::ClassProbs), loss, ex);
    }
    {  // identity head through the mean loss, linear
      AggregateExample ex;
      ex.features = {random_x(4), random_x(4), random_x(4)};
      ex.observation = rng.next_uniform(-2.0, 2.0);
      AggregateLoss loss;
      loss.family = LossFamily::MeanGauss;
      fd_check(ParamMap::linear(4, 1, TargetFamily::GaussLoc), loss, ex);
    }
    {  // exp-positive head through the Poisson loss, MLP
      AggregateExample ex;
      ex.features = {random_x(3), random_x(3)};
      ex.observation = static_cast<double>(rng.next_below(6));
      AggregateLoss loss;
      loss.family = LossFamily::SumPoisson;
      fd_check(ParamMap::mlp(3, 8, 1, TargetFamily::PoissonRate), loss, ex);
    }
  }
}

TEST_CASE("batch_loss_and_grad averaging") {
  Rng rng(61);
  ParamMap map = ParamMap::linear(2, 1, TargetFamily::GaussLoc);
  map.weights = init_weights(map, 62);
  AggregateLoss loss;
  loss.family = LossFamily::MeanGauss;

  AggregateExample ex;
  ex.features = {{0.5, 1.0}, {-0.5, 2.0}};
  ex.observation = 0.7;

  const AggregateExample once[] = {ex};
  const AggregateExample twice[] = {ex, ex};
  const auto [l1, g1] = batch_loss_and_grad(map, loss, once);
  const auto [l2, g2] = batch_loss_and_grad(map, loss, twice);
  CHECK_THAT(l1, WithinAbs(l2, 1e-15));
  CHECK(max_relative_error(g1, g2) <= 1e-14);

  SECTION("a batch of one equals the hand-composed pipeline") {
    std::vector<TargetParams> thetas;
    for (const auto& x : ex.features) thetas.push_back(forward(map, x));
    const LossResult r = aggregate_nll(loss, ex, thetas);
    std::vector<double> manual(map.weights.size(), 0.0);
    for (std::size_t i = 0; i < ex.features.size(); ++i) {
      const auto g = backward(map, ex.features[i], r.grad_theta[i]);
      for (std::size_t j = 0; j < manual.size(); ++j) manual[j] += g[j];
    }
    CHECK_THAT(l1, WithinAbs(r.nll, 1e-15));
    CHECK(max_relative_error(g1, manual) <= 1e-14);
  }
  CHECK_THROWS_AS(batch_loss_and_grad(map, loss, std::span<const AggregateExample>{}),
                  std::invalid_argument);
}

TEST_CASE("init_weights") {
  ParamMap map = ParamMap::mlp(10, 32, 4, TargetFamily::ClassProbs);

  SECTION("deterministic per seed") {
    CHECK(init_weights(map, 7) == init_weights(map, 7));
    CHECK(init_weights(map, 7) != init_weights(map, 8));
  }

  SECTION("biases are zero, weights bounded by the layer limit") {
    const auto w = init_weights(map, 7);
    const std::size_t b1 = 32 * 10;
    for (std::size_t i = b1; i < b1 + 32; ++i) CHECK(w[i] == 0.0);
    const std::size_t b2 = b1 + 32 + 4 * 32;
    for (std::size_t i = b2; i < b2 + 4; ++i) CHECK(w[i] == 0.0);
    const double bound1 = std::sqrt(6.0 / (10 + 32));
    for (std::size_t i = 0; i < b1; ++i) CHECK(std::fabs(w[i]) <= bound1);
  }

  SECTION("layer weight sample mean is near zero") {
    ParamMap wide = ParamMap::linear(100, 100, TargetFamily::ClassProbs);
    const auto w = init_weights(wide, 11);
    double mean = 0.0;
    const std::size_t n = 100 * 100;
    for (std::size_t i = 0; i < n; ++i) mean += w[i];
    mean /= static_cast<double>(n);
    const double bound = std::sqrt(6.0 / 200.0);
    // uniform(-b, b): sd of the sample mean is b/sqrt(3 n)
    CHECK(std::fabs(mean) <= 4.0 * bound / std::sqrt(3.0 * n));
  }
}

TEST_CASE("weight checkpoints round-trip bit-exactly") {
  ParamMap map = ParamMap::mlp(5, 8, 3, TargetFamily::ClassProbs);
  map.weights = init_weights(map, 77);
  std::stringstream buffer;
  save_weights(map, buffer);
  const ParamMap loaded = load_weights(buffer);
  CHECK(loaded.architecture == map.architecture);
  CHECK(loaded.family == map.family);
  CHECK(loaded.input_dim == map.input_dim);
  CHECK(loaded.hidden_dim == map.hidden_dim);
  CHECK(loaded.out_dim == map.out_dim);
  REQUIRE(loaded.weights.size() == map.weights.size());
  for (std::size_t i = 0; i < map.weights.size(); ++i) {
    CHECK(std::memcmp(&loaded.weights[i], &map.weights[i], sizeof(double)) == 0);
  }
}

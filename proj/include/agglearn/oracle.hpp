#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "agglearn/core.hpp"
#include "agglearn/likelihood.hpp"

// Independent brute-force and numerical references used by tests and by the
// CLI verify subcommand. Nothing here may route through the likelihood-module
// implementations it is meant to check: probabilities are enumerated or
// integrated from densities written out with std::exp directly.

namespace agglearn::oracle {

/// Literal marginalization: sum over all C^K joint class assignments of
/// prod_i p_i(z_i) * [aggregate(z) == y]. Budget: C^K <= 1e6.
inline double enumerate_class_likelihood(
    std::span<const ClassProbs> ps, const std::function<int(std::span<const std::size_t>)>& aggregate,
    int y) {
  require(!ps.empty(), "enumerate_class_likelihood: empty set");
  const std::size_t k = ps.size();
  const std::size_t c = ps.front().classes();
  double budget = 1.0;
  for (std::size_t i = 0; i < k; ++i) {
    require(ps[i].classes() == c, "enumerate_class_likelihood: class count mismatch");
    budget *= static_cast<double>(c);
    require(budget <= 1e6, "enumerate_class_likelihood: C^K budget exceeded");
  }
  std::vector<std::size_t> z(k, 0);
  double total = 0.0;
  while (true) {
    if (aggregate(z) == y) {
      double joint = 1.0;
      for (std::size_t i = 0; i < k; ++i) joint *= ps[i].p[z[i]];
      total += joint;
    }
    std::size_t pos = 0;
    while (pos < k && ++z[pos] == c) {
      z[pos] = 0;
      ++pos;
    }
    if (pos == k) break;
  }
  return total;
}

/// P(Z1 > Z2) for independent Gaussians by direct integration of the joint
/// density over the half-plane: an inner cumulative of the second density is
/// built on a shared grid, then integrated against the first density
/// (composite trapezoid; absolute error well under 1e-7).
inline double quad_rank_gauss(double mu1, double mu2, double sigma1, double sigma2) {
  require(sigma1 > 0.0 && sigma2 > 0.0, "quad_rank_gauss: sigma must be positive");
  const double lo = std::min(mu1 - 9.0 * sigma1, mu2 - 9.0 * sigma2);
  const double hi = std::max(mu1 + 9.0 * sigma1, mu2 + 9.0 * sigma2);
  const double fine = std::min(sigma1, sigma2) / 8000.0;
  const std::size_t steps = std::min<std::size_t>(
      4'000'000, static_cast<std::size_t>(std::ceil((hi - lo) / fine)));
  const double h = (hi - lo) / static_cast<double>(steps);
  const double norm1 = 1.0 / (sigma1 * std::sqrt(2.0 * std::numbers::pi));
  const double norm2 = 1.0 / (sigma2 * std::sqrt(2.0 * std::numbers::pi));
  auto density1 = [&](double z) {
    const double t = (z - mu1) / sigma1;
    return norm1 * std::exp(-0.5 * t * t);
  };
  auto density2 = [&](double z) {
    const double t = (z - mu2) / sigma2;
    return norm2 * std::exp(-0.5 * t * t);
  };
  double integral = 0.0;
  double cdf2 = 0.0;  // running integral of density2 from lo to the grid point
  double prev1 = density1(lo);
  double prev2 = density2(lo);
  double prev_product = prev1 * cdf2;
  for (std::size_t i = 1; i <= steps; ++i) {
    const double z = lo + h * static_cast<double>(i);
    const double f1 = density1(z);
    const double f2 = density2(z);
    cdf2 += 0.5 * h * (prev2 + f2);
    const double product = f1 * cdf2;
    integral += 0.5 * h * (prev_product + product);
    prev1 = f1;
    prev2 = f2;
    prev_product = product;
  }
  return integral;
}

/// Central differences (f(w + e_i eps_i) - f(w - e_i eps_i)) / (2 eps_i) with
/// eps_i = epsilon_scale * max(1, |w_i|).
inline std::vector<double> finite_diff_grad(
    const std::function<double(std::span<const double>)>& f, std::span<const double> point,
    double epsilon_scale = 1e-5) {
  std::vector<double> w(point.begin(), point.end());
  std::vector<double> grad(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double eps = epsilon_scale * std::max(1.0, std::fabs(w[i]));
    const double saved = w[i];
    w[i] = saved + eps;
    const double up = f(w);
    w[i] = saved - eps;
    const double down = f(w);
    w[i] = saved;
    require(std::isfinite(up) && std::isfinite(down), "finite_diff_grad: non-finite evaluation");
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

/// Globally minimal assignment by full permutation search; C <= 8.
inline std::pair<std::vector<std::size_t>, double> exhaustive_assignment(const Matrix& cost) {
  require(cost.rows() == cost.cols() && cost.rows() > 0, "exhaustive_assignment: bad matrix");
  require(cost.rows() <= 8, "exhaustive_assignment: C too large");
  const std::size_t n = cost.rows();
  std::vector<std::size_t> perm(n), best(n);
  for (std::size_t i = 0; i < n; ++i) perm[i] = i;
  best = perm;
  double best_cost = std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += cost(i, perm[i]);
    if (total < best_cost) {
      best_cost = total;
      best = perm;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return {best, best_cost};
}

/// pmf of a sum of independent Poissons by numeric convolution of the
/// individual pmfs (built by the multiplicative recurrence, truncated at
/// cumulative mass 1 - 1e-12).
inline double poisson_convolution_pmf(std::span<const double> rates, long long y) {
  require(!rates.empty(), "poisson_convolution_pmf: empty set");
  require(y >= 0, "poisson_convolution_pmf: negative count");
  auto single_pmf = [](double rate) {
    require(rate > 0.0, "poisson_convolution_pmf: rates must be positive");
    std::vector<double> pmf;
    double p = std::exp(-rate);
    double mass = p;
    pmf.push_back(p);
    for (long long k = 1; mass < 1.0 - 1e-12; ++k) {
      p *= rate / static_cast<double>(k);
      mass += p;
      pmf.push_back(p);
    }
    return pmf;
  };
  std::vector<double> acc = single_pmf(rates[0]);
  for (std::size_t i = 1; i < rates.size(); ++i) {
    const std::vector<double> next = single_pmf(rates[i]);
    std::vector<double> conv(acc.size() + next.size() - 1, 0.0);
    for (std::size_t a = 0; a < acc.size(); ++a) {
      for (std::size_t b = 0; b < next.size(); ++b) conv[a + b] += acc[a] * next[b];
    }
    acc = std::move(conv);
  }
  const auto idx = static_cast<std::size_t>(y);
  return idx < acc.size() ? acc[idx] : 0.0;
}

/// Probability of one full ordering (given as score indices, best first)
/// under Gumbel scores: the sequential-choice product evaluated directly in
/// the probability domain.
inline double plackett_luce_order_prob(std::span<const double> scores,
                                       std::span<const std::size_t> order) {
  require(scores.size() == order.size() && scores.size() >= 1,
          "plackett_luce_order_prob: bad inputs");
  double prob = 1.0;
  for (std::size_t i = 0; i + 1 < order.size(); ++i) {
    double denom = 0.0;
    for (std::size_t j = i; j < order.size(); ++j) denom += std::exp(scores[order[j]]);
    prob *= std::exp(scores[order[i]]) / denom;
  }
  return prob;
}

}  // namespace agglearn::oracle

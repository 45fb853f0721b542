#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "agglearn/aggregate.hpp"
#include "agglearn/core.hpp"
#include "agglearn/math.hpp"

// Closed-form aggregate negative log-likelihoods and their analytic gradients
// with respect to the per-instance target-distribution parameters.
//
// Gradient layout per instance (used by LossResult::grad_theta and
// ProbResult::dprob):
//   ClassProbs   -> C entries, d/dp_i
//   GaussLoc     -> 1 entry,   d/dmu        (sigma is a shared hyperparameter)
//   CauchyLoc    -> 2 entries, d/da, d/db   (b trainable only if the model maps it)
//   PoissonRate  -> 1 entry,   d/dlambda
//   GumbelScore  -> 1 entry,   d/ds         (scale fixed at 1)
//   ExpRate      -> 1 entry,   d/dlambda

namespace agglearn {

struct ClassProbs {
  std::vector<double> p;

  std::size_t classes() const { return p.size(); }

  void validate() const {
    double sum = 0.0;
    for (double v : p) {
      require(v > 0.0, "ClassProbs: entries must be positive");
      sum += v;
    }
    require(std::fabs(sum - 1.0) <= 1e-9, "ClassProbs: entries must sum to 1");
  }
};

struct GaussLoc {
  double mu = 0.0;
};
struct CauchyLoc {
  double a = 0.0;
  double b = 1.0;
};
struct PoissonRate {
  double rate = 1.0;
};
struct GumbelScore {
  double s = 0.0;
};
struct ExpRate {
  double rate = 1.0;
};

using TargetParams = std::variant<ClassProbs, GaussLoc, CauchyLoc, PoissonRate, GumbelScore, ExpRate>;

struct LossResult {
  double nll = 0.0;
  std::vector<std::vector<double>> grad_theta;  // one gradient block per instance
};

/// A probability p(Y=1) together with its gradient blocks per instance.
struct ProbResult {
  double prob = 0.0;
  std::vector<std::vector<double>> dprob;
};

// ---------------------------------------------------------------------------
// Classification likelihoods

/// p(Y=1) = sum_i p1_i p2_i for the same-class observation Y = [Z1 = Z2].
inline ProbResult sim_prob(const ClassProbs& p1, const ClassProbs& p2) {
  require(p1.classes() == p2.classes(), "sim_prob: class count mismatch");
  const std::size_t c = p1.classes();
  ProbResult r;
  r.dprob = {std::vector<double>(c), std::vector<double>(c)};
  for (std::size_t i = 0; i < c; ++i) {
    r.prob += p1.p[i] * p2.p[i];
    r.dprob[0][i] = p2.p[i];
    r.dprob[1][i] = p1.p[i];
  }
  return r;
}

/// p(Y=1) = sum over index triples with d(i,j) < d(i,k) of p1_i p2_j p3_k.
/// Direct O(C^3) summation; C stays small in every experiment.
/// TODO: precompute the partner marginals per anchor class for O(C^2) if a
/// large-C use case shows up.
inline ProbResult triplet_prob(const ClassProbs& p1, const ClassProbs& p2, const ClassProbs& p3,
                               const ClassDistanceMatrix& dist) {
  const std::size_t c = p1.classes();
  require(p2.classes() == c && p3.classes() == c, "triplet_prob: class count mismatch");
  require(dist.classes() == c, "triplet_prob: distance matrix size mismatch");
  ProbResult r;
  r.dprob = {std::vector<double>(c), std::vector<double>(c), std::vector<double>(c)};
  for (std::size_t i = 0; i < c; ++i) {
    for (std::size_t j = 0; j < c; ++j) {
      for (std::size_t k = 0; k < c; ++k) {
        if (dist(i, j) < dist(i, k)) {
          r.prob += p1.p[i] * p2.p[j] * p3.p[k];
          r.dprob[0][i] += p2.p[j] * p3.p[k];
          r.dprob[1][j] += p1.p[i] * p3.p[k];
          r.dprob[2][k] += p1.p[i] * p2.p[j];
        }
      }
    }
  }
  return r;
}

/// p(Y=1) = 1 - prod_i (1 - p_i[pos]) for "the set contains a positive".
inline ProbResult multi_instance_prob(std::span<const ClassProbs> ps, std::size_t positive_class) {
  require(!ps.empty(), "multi_instance_prob: empty set");
  const std::size_t c = ps.front().classes();
  ProbResult r;
  r.dprob.resize(ps.size());
  double prod = 1.0;
  for (const auto& p : ps) {
    require(p.classes() == c, "multi_instance_prob: class count mismatch");
    require(positive_class < c, "multi_instance_prob: positive class out of range");
    prod *= 1.0 - p.p[positive_class];
  }
  r.prob = 1.0 - prod;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    r.dprob[i].assign(c, 0.0);
    double partial = 1.0;
    for (std::size_t j = 0; j < ps.size(); ++j) {
      if (j != i) partial *= 1.0 - ps[j].p[positive_class];
    }
    r.dprob[i][positive_class] = partial;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Binary cross entropy on an aggregate probability

/// -y ln p - (1-y) ln(1-p) with p clamped to [1e-12, 1 - 1e-12];
/// chain-rules the probability gradients through.
inline LossResult binary_nll(double p_y1, int y, std::vector<std::vector<double>> dprob) {
  require(y == 0 || y == 1, "binary_nll: observation must be a bit");
  const double p = std::clamp(p_y1, 1e-12, 1.0 - 1e-12);
  LossResult r;
  r.nll = (y == 1) ? -std::log(p) : -std::log(1.0 - p);
  const double dnll_dp = (y == 1) ? -1.0 / p : 1.0 / (1.0 - p);
  r.grad_theta = std::move(dprob);
  for (auto& block : r.grad_theta) {
    for (double& g : block) g *= dnll_dp;
  }
  return r;
}

inline LossResult binary_nll(const ProbResult& prob, int y) {
  return binary_nll(prob.prob, y, prob.dprob);
}

// ---------------------------------------------------------------------------
// Regression likelihoods

/// Squared-error form of the mean-observation Gaussian likelihood:
/// nll = (y - mean(mus))^2. The log-normalization constant and the
/// 1/(2 sigma^2 / K) factor are dropped; the argmin is unchanged.
inline LossResult mean_gauss_nll(double y, std::span<const double> mus, double sigma) {
  require(!mus.empty(), "mean_gauss_nll: empty set");
  require(sigma > 0.0, "mean_gauss_nll: sigma must be positive");
  const double k = static_cast<double>(mus.size());
  const double mbar = agg_mean(mus);
  LossResult r;
  r.nll = (y - mbar) * (y - mbar);
  const double d = -2.0 / k * (y - mbar);
  r.grad_theta.assign(mus.size(), {d});
  return r;
}

/// Negative log Cauchy density of y under location mean(as), scale mean(bs).
inline LossResult mean_cauchy_nll(double y, std::span<const double> locations,
                                  std::span<const double> scales) {
  require(!locations.empty() && locations.size() == scales.size(),
          "mean_cauchy_nll: location/scale size mismatch");
  const double k = static_cast<double>(locations.size());
  const double loc = agg_mean(locations);
  double scale = 0.0;
  for (double b : scales) {
    require(b > 0.0, "mean_cauchy_nll: scales must be positive");
    scale += b;
  }
  scale /= k;
  const double u = (y - loc) / scale;
  LossResult r;
  r.nll = std::log(std::numbers::pi * scale) + std::log1p(u * u);
  const double dloc = -2.0 * u / ((1.0 + u * u) * k * scale);
  const double dscale = (1.0 - u * u) / ((1.0 + u * u) * k * scale);
  r.grad_theta.assign(locations.size(), {dloc, dscale});
  return r;
}

/// The sum of independent Poissons is Poisson(sum of rates).
inline LossResult sum_poisson_nll(long long y, std::span<const double> rates) {
  require(!rates.empty(), "sum_poisson_nll: empty set");
  require(y >= 0, "sum_poisson_nll: negative count");
  double total = 0.0;
  for (double rate : rates) {
    require(rate > 0.0, "sum_poisson_nll: rates must be positive");
    total += rate;
  }
  LossResult r;
  r.nll = -poisson_log_pmf(y, total);
  const double d = 1.0 - static_cast<double>(y) / total;
  r.grad_theta.assign(rates.size(), {d});
  return r;
}

// ---------------------------------------------------------------------------
// Pairwise rank likelihoods: p(Z1 > Z2) under each target distribution

/// Gaussian targets: p = 1/2 [1 + erf((mu1-mu2)/sqrt(2(s1^2+s2^2)))].
/// Computed through erfc so the far tail keeps ~1e-300 resolution.
inline ProbResult rank_gauss_prob(double mu1, double mu2, double sigma1, double sigma2) {
  require(sigma1 > 0.0 && sigma2 > 0.0, "rank_gauss_prob: sigma must be positive");
  const double denom = std::sqrt(2.0 * (sigma1 * sigma1 + sigma2 * sigma2));
  const double u = (mu1 - mu2) / denom;
  ProbResult r;
  r.prob = 0.5 * erfc(-u);
  const double d = 0.5 * erf_deriv(u) / denom;
  r.dprob = {{d}, {-d}};
  return r;
}

/// Gumbel targets with unit scale: p = logistic(s1 - s2).
inline ProbResult rank_gumbel_prob(double s1, double s2) {
  ProbResult r;
  r.prob = logistic(s1 - s2);
  const double d = r.prob * (1.0 - r.prob);
  r.dprob = {{d}, {-d}};
  return r;
}

/// Cauchy targets: p = (1/pi) arctan((a1-a2)/(b1+b2)) + 1/2.
inline ProbResult rank_cauchy_prob(double a1, double a2, double b1, double b2) {
  require(b1 > 0.0 && b2 > 0.0, "rank_cauchy_prob: scales must be positive");
  const double bsum = b1 + b2;
  const double u = (a1 - a2) / bsum;
  ProbResult r;
  r.prob = std::atan(u) / std::numbers::pi + 0.5;
  const double da = 1.0 / (std::numbers::pi * (1.0 + u * u) * bsum);
  const double db = -u / (std::numbers::pi * (1.0 + u * u) * bsum);
  r.dprob = {{da, db}, {-da, db}};
  return r;
}

/// Exponential targets: p = rate2 / (rate1 + rate2). With rate = e^{-s}
/// this coincides with rank_gumbel_prob(s1, s2).
inline ProbResult rank_exponential_prob(double rate1, double rate2) {
  require(rate1 > 0.0 && rate2 > 0.0, "rank_exponential_prob: rates must be positive");
  const double total = rate1 + rate2;
  ProbResult r;
  r.prob = rate2 / total;
  r.dprob = {{-rate2 / (total * total)}, {rate1 / (total * total)}};
  return r;
}

// ---------------------------------------------------------------------------
// Listwise rank likelihood (Gumbel scores, Plackett-Luce factorization)

/// nll = -sum_{i=1}^{K-1} [s_i - log sum_{j>=i} e^{s_j}] for scores listed in
/// the observed (decreasing) order; softmax-style analytic gradient.
inline LossResult listwise_gumbel_nll(std::span<const double> scores_in_observed_order) {
  const std::size_t k = scores_in_observed_order.size();
  require(k >= 2, "listwise_gumbel_nll: need at least two scores");
  LossResult r;
  r.grad_theta.assign(k, {0.0});
  for (std::size_t i = 0; i + 1 < k; ++i) {
    const auto tail = scores_in_observed_order.subspan(i);
    const double lse = log_sum_exp(tail);
    r.nll -= scores_in_observed_order[i] - lse;
    for (std::size_t j = i; j < k; ++j) {
      r.grad_theta[j][0] += std::exp(scores_in_observed_order[j] - lse);
    }
    r.grad_theta[i][0] -= 1.0;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Dispatcher

enum class LossFamily {
  Similarity,
  Triplet,
  MultiInstance,
  MeanGauss,
  MeanCauchy,
  SumPoisson,
  RankGauss,
  RankGumbel,
  RankCauchy,
  RankExponential,
  ListGumbel,
};

inline const char* to_string(LossFamily family) {
  switch (family) {
    case LossFamily::Similarity: return "similarity";
    case LossFamily::Triplet: return "triplet";
    case LossFamily::MultiInstance: return "multi_instance";
    case LossFamily::MeanGauss: return "mean_gauss";
    case LossFamily::MeanCauchy: return "mean_cauchy";
    case LossFamily::SumPoisson: return "sum_poisson";
    case LossFamily::RankGauss: return "rank_gauss";
    case LossFamily::RankGumbel: return "rank_gumbel";
    case LossFamily::RankCauchy: return "rank_cauchy";
    case LossFamily::RankExponential: return "rank_exponential";
    case LossFamily::ListGumbel: return "list_gumbel";
  }
  return "?";
}

/// Binds an aggregate function to a target-distribution family.
struct AggregateLoss {
  LossFamily family = LossFamily::MeanGauss;
  double sigma = 1.0;                           // shared homoscedastic scale, not trained
  std::size_t positive_class = 0;               // MultiInstance only
  std::optional<ClassDistanceMatrix> distance;  // Triplet only

  AggregationTag expected_tag() const {
    switch (family) {
      case LossFamily::Similarity: return AggregationTag::Similarity;
      case LossFamily::Triplet: return AggregationTag::Triplet;
      case LossFamily::MultiInstance: return AggregationTag::MultiInstance;
      case LossFamily::MeanGauss:
      case LossFamily::MeanCauchy: return AggregationTag::Mean;
      case LossFamily::SumPoisson: return AggregationTag::Sum;
      case LossFamily::RankGauss:
      case LossFamily::RankGumbel:
      case LossFamily::RankCauchy:
      case LossFamily::RankExponential: return AggregationTag::RankPair;
      case LossFamily::ListGumbel: return AggregationTag::RankList;
    }
    return AggregationTag::Mean;
  }
};

namespace detail {

template <typename T>
const T& theta_as(const TargetParams& theta, const char* what) {
  const T* v = std::get_if<T>(&theta);
  require(v != nullptr, std::string("aggregate_nll: parameter variant mismatch for ") + what);
  return *v;
}

inline int bit_observation(const Observation& obs) {
  const int* bit = std::get_if<int>(&obs);
  require(bit != nullptr, "aggregate_nll: expected a binary observation");
  return *bit;
}

inline double real_observation(const Observation& obs) {
  const double* value = std::get_if<double>(&obs);
  require(value != nullptr, "aggregate_nll: expected a real observation");
  return *value;
}

}  // namespace detail

/// Per-example negative log-likelihood and per-instance parameter gradients.
inline LossResult aggregate_nll(const AggregateLoss& loss, const AggregateExample& example,
                                std::span<const TargetParams> thetas) {
  const std::size_t k = thetas.size();
  require(example.features.size() == k, "aggregate_nll: instance count mismatch");
  switch (loss.family) {
    case LossFamily::Similarity: {
      require(k == 2, "similarity expects K = 2");
      const auto& p1 = detail::theta_as<ClassProbs>(thetas[0], "similarity");
      const auto& p2 = detail::theta_as<ClassProbs>(thetas[1], "similarity");
      return binary_nll(sim_prob(p1, p2), detail::bit_observation(example.observation));
    }
    case LossFamily::Triplet: {
      require(k == 3, "triplet expects K = 3");
      require(loss.distance.has_value(), "triplet loss needs a class distance matrix");
      const auto& p1 = detail::theta_as<ClassProbs>(thetas[0], "triplet");
      const auto& p2 = detail::theta_as<ClassProbs>(thetas[1], "triplet");
      const auto& p3 = detail::theta_as<ClassProbs>(thetas[2], "triplet");
      return binary_nll(triplet_prob(p1, p2, p3, *loss.distance),
                        detail::bit_observation(example.observation));
    }
    case LossFamily::MultiInstance: {
      std::vector<ClassProbs> ps;
      ps.reserve(k);
      for (const auto& theta : thetas) {
        ps.push_back(detail::theta_as<ClassProbs>(theta, "multi_instance"));
      }
      return binary_nll(multi_instance_prob(ps, loss.positive_class),
                        detail::bit_observation(example.observation));
    }
    case LossFamily::MeanGauss: {
      std::vector<double> mus(k);
      for (std::size_t i = 0; i < k; ++i) mus[i] = detail::theta_as<GaussLoc>(thetas[i], "mean_gauss").mu;
      return mean_gauss_nll(detail::real_observation(example.observation), mus, loss.sigma);
    }
    case LossFamily::MeanCauchy: {
      std::vector<double> as(k), bs(k);
      for (std::size_t i = 0; i < k; ++i) {
        const auto& c = detail::theta_as<CauchyLoc>(thetas[i], "mean_cauchy");
        as[i] = c.a;
        bs[i] = c.b;
      }
      return mean_cauchy_nll(detail::real_observation(example.observation), as, bs);
    }
    case LossFamily::SumPoisson: {
      std::vector<double> rates(k);
      for (std::size_t i = 0; i < k; ++i) {
        rates[i] = detail::theta_as<PoissonRate>(thetas[i], "sum_poisson").rate;
      }
      const double y = detail::real_observation(example.observation);
      require(y >= 0.0 && y == std::floor(y), "sum_poisson expects a nonnegative integer observation");
      return sum_poisson_nll(static_cast<long long>(y), rates);
    }
    case LossFamily::RankGauss: {
      require(k == 2, "rank_pair expects K = 2");
      const double mu1 = detail::theta_as<GaussLoc>(thetas[0], "rank_gauss").mu;
      const double mu2 = detail::theta_as<GaussLoc>(thetas[1], "rank_gauss").mu;
      return binary_nll(rank_gauss_prob(mu1, mu2, loss.sigma, loss.sigma),
                        detail::bit_observation(example.observation));
    }
    case LossFamily::RankGumbel: {
      require(k == 2, "rank_pair expects K = 2");
      const double s1 = detail::theta_as<GumbelScore>(thetas[0], "rank_gumbel").s;
      const double s2 = detail::theta_as<GumbelScore>(thetas[1], "rank_gumbel").s;
      return binary_nll(rank_gumbel_prob(s1, s2), detail::bit_observation(example.observation));
    }
    case LossFamily::RankCauchy: {
      require(k == 2, "rank_pair expects K = 2");
      const auto& c1 = detail::theta_as<CauchyLoc>(thetas[0], "rank_cauchy");
      const auto& c2 = detail::theta_as<CauchyLoc>(thetas[1], "rank_cauchy");
      return binary_nll(rank_cauchy_prob(c1.a, c2.a, c1.b, c2.b),
                        detail::bit_observation(example.observation));
    }
    case LossFamily::RankExponential: {
      require(k == 2, "rank_pair expects K = 2");
      const double r1 = detail::theta_as<ExpRate>(thetas[0], "rank_exponential").rate;
      const double r2 = detail::theta_as<ExpRate>(thetas[1], "rank_exponential").rate;
      return binary_nll(rank_exponential_prob(r1, r2), detail::bit_observation(example.observation));
    }
    case LossFamily::ListGumbel: {
      const auto* order = std::get_if<std::vector<std::size_t>>(&example.observation);
      require(order != nullptr && order->size() == k, "list_gumbel expects an index permutation");
      std::vector<double> scores(k);
      for (std::size_t i = 0; i < k; ++i) {
        scores[i] = detail::theta_as<GumbelScore>(thetas[(*order)[i]], "list_gumbel").s;
      }
      LossResult ordered = listwise_gumbel_nll(scores);
      LossResult r;
      r.nll = ordered.nll;
      r.grad_theta.assign(k, {0.0});
      for (std::size_t i = 0; i < k; ++i) r.grad_theta[(*order)[i]] = ordered.grad_theta[i];
      return r;
    }
  }
  throw std::invalid_argument("aggregate_nll: unknown loss family");
}

}  // namespace agglearn

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <vector>

#include "agglearn/math.hpp"

using Catch::Matchers::WithinAbs;

namespace {

// Independent reference for erf: composite Simpson quadrature of
// (2/sqrt(pi)) integral_0^x exp(-t^2) dt. Error far below 1e-12 for |x| <= 6.
double erf_by_quadrature(double x) {
  const int n = 40000;  // even
  const double h = x / n;
  auto f = [](double t) { return std::exp(-t * t); };
  double sum = f(0.0) + f(x);
  for (int i = 1; i < n; ++i) sum += (i % 2 == 1 ? 4.0 : 2.0) * f(i * h);
  return 2.0 / std::sqrt(std::numbers::pi) * sum * h / 3.0;
}

}  // namespace

TEST_CASE("erf matches quadrature and anchor values") {
  CHECK(agglearn::erf(0.0) == 0.0);
  CHECK_THAT(agglearn::erf(1.0), WithinAbs(0.8427007929, 1e-9));
  CHECK_THAT(agglearn::erf(1.0), WithinAbs(erf_by_quadrature(1.0), 1e-12));
  for (double x : {0.05, 0.3, 0.7, 1.3, 2.0, 3.5, 4.7, 5.5}) {
    CHECK_THAT(agglearn::erf(x), WithinAbs(erf_by_quadrature(x), 1e-12));
  }
}

TEST_CASE("erf is odd, bounded, and monotone") {
  for (double x : {0.3, 1.7}) {
    CHECK(agglearn::erf(-x) == -agglearn::erf(x));
  }
  double prev = -1.0;
  for (double x = -6.0; x <= 6.0; x += 0.05) {
    const double v = agglearn::erf(x);
    CHECK(std::fabs(v) < 1.0);
    CHECK(agglearn::erf(-x) == -v);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("erfc complements erf and resolves far tails") {
  for (double x : {0.1, 1.0, 3.0, 5.0}) {
    CHECK_THAT(agglearn::erfc(x) + agglearn::erf(x), WithinAbs(1.0, 1e-15));
  }
  CHECK(agglearn::erfc(10.0) > 0.0);
  CHECK(agglearn::erfc(10.0) < 1e-40);
  CHECK(agglearn::erfc(20.0) > 0.0);
}

TEST_CASE("erf_deriv") {
  CHECK_THAT(agglearn::erf_deriv(0.0), WithinAbs(2.0 / std::sqrt(std::numbers::pi), 1e-15));
  CHECK(agglearn::erf_deriv(10.0) < 1e-40);
  const double h = 1e-6;
  const double fd = (agglearn::erf(0.5 + h) - agglearn::erf(0.5 - h)) / (2.0 * h);
  CHECK_THAT(agglearn::erf_deriv(0.5), WithinAbs(fd, 1e-7));
}

TEST_CASE("gaussian_cdf") {
  CHECK_THAT(agglearn::gaussian_cdf(2.0, 2.0, 0.7), WithinAbs(0.5, 1e-15));
  // quadrature of the standard normal density on [0, 1]
  const double phi1 = 0.5 + 0.5 * erf_by_quadrature(1.0 / std::numbers::sqrt2);
  CHECK_THAT(agglearn::gaussian_cdf(1.5, 0.5, 1.0), WithinAbs(phi1, 1e-6));
  CHECK_THAT(agglearn::gaussian_cdf(1.5, 0.5, 1.0), WithinAbs(0.8413447, 1e-6));
  CHECK(agglearn::gaussian_cdf(-50.0, 0.0, 1.0) < 1e-12);
  CHECK_THROWS_AS(agglearn::gaussian_cdf(0.0, 0.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(agglearn::gaussian_cdf(0.0, 0.0, -1.0), std::invalid_argument);

  SECTION("symmetry identity") {
    for (double x : {-3.0, -0.4, 0.0, 1.1, 2.7}) {
      const double a = agglearn::gaussian_cdf(x, 0.5, 1.3);
      const double b = agglearn::gaussian_cdf(2.0 * 0.5 - x, 0.5, 1.3);
      CHECK_THAT(a + b, WithinAbs(1.0, 1e-12));
    }
  }
}

TEST_CASE("logistic") {
  CHECK(agglearn::logistic(0.0) == 0.5);
  CHECK_THAT(agglearn::logistic(std::log(3.0)), WithinAbs(0.75, 1e-15));
  for (double t : {-5.0, 0.1, 40.0}) {
    CHECK_THAT(agglearn::logistic(t) + agglearn::logistic(-t), WithinAbs(1.0, 1e-15));
  }
  CHECK(std::isfinite(agglearn::logistic(700.0)));
  CHECK(std::isfinite(agglearn::logistic(-700.0)));
  CHECK(agglearn::logistic(-700.0) >= 0.0);
}

TEST_CASE("log_sum_exp") {
  const std::vector<double> single = {3.25};
  CHECK(agglearn::log_sum_exp(single) == 3.25);
  const std::vector<double> pair = {0.0, 0.0};
  CHECK_THAT(agglearn::log_sum_exp(pair), WithinAbs(std::log(2.0), 1e-15));
  const std::vector<double> large = {1000.0, 1000.0};
  CHECK_THAT(agglearn::log_sum_exp(large), WithinAbs(1000.0 + std::log(2.0), 1e-12));
  CHECK_THROWS_AS(agglearn::log_sum_exp(std::vector<double>{}), std::invalid_argument);

  SECTION("shift invariance") {
    const std::vector<double> v = {-1.0, 0.3, 2.0, 0.9};
    const double base = agglearn::log_sum_exp(v);
    for (double c : {-7.5, 0.25, 13.0}) {
      std::vector<double> shifted = v;
      for (double& x : shifted) x += c;
      CHECK_THAT(agglearn::log_sum_exp(shifted), WithinAbs(base + c, 1e-12));
    }
  }
}

TEST_CASE("cauchy_cdf") {
  CHECK_THAT(agglearn::cauchy_cdf(1.5, 1.5, 0.3), WithinAbs(0.5, 1e-15));
  CHECK_THAT(agglearn::cauchy_cdf(1.8, 1.5, 0.3), WithinAbs(0.75, 1e-15));
  CHECK_THROWS_AS(agglearn::cauchy_cdf(0.0, 0.0, 0.0), std::invalid_argument);
  double prev = 0.0;
  for (double x = -10.0; x <= 10.0; x += 0.25) {
    const double v = agglearn::cauchy_cdf(x, 0.7, 1.2);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("log_gamma against factorials") {
  double log_factorial = 0.0;
  for (int k = 1; k <= 30; ++k) {
    log_factorial += std::log(static_cast<double>(k));
    CHECK_THAT(agglearn::log_gamma(k + 1.0), WithinAbs(log_factorial, 1e-10 * (1.0 + log_factorial)));
  }
  CHECK_THAT(agglearn::log_gamma(0.5), WithinAbs(0.5 * std::log(std::numbers::pi), 1e-12));
}

TEST_CASE("poisson_log_pmf") {
  CHECK_THAT(agglearn::poisson_log_pmf(0, 3.0), WithinAbs(-3.0, 1e-12));
  CHECK_THAT(agglearn::poisson_log_pmf(2, 2.0), WithinAbs(2.0 * std::log(2.0) - 2.0 - std::log(2.0), 1e-12));
  CHECK_THROWS_AS(agglearn::poisson_log_pmf(-1, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(agglearn::poisson_log_pmf(2, 0.0), std::invalid_argument);

  SECTION("normalization over k") {
    for (double lambda : {0.5, 1.0, 4.0, 10.0}) {
      double mass = 0.0;
      for (long long k = 0; k <= 200; ++k) mass += std::exp(agglearn::poisson_log_pmf(k, lambda));
      CHECK_THAT(mass, WithinAbs(1.0, 1e-10));
    }
  }
}

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

#include "agglearn/core.hpp"

// Special functions and distribution primitives shared by the likelihood
// layer: error function, stable logistic/log-sum-exp, Gaussian and Cauchy
// CDFs, and the Poisson log-pmf.

namespace agglearn {

namespace detail {

// Rational Chebyshev approximation for erf/erfc after W. J. Cody,
// "Rational Chebyshev approximation of the error function",
// Math. Comp. 23 (1969). Absolute error is below 1e-16 everywhere,
// and erfc stays accurate down to ~1e-300 (x up to ~26.5).
// mode 0: erf(x), mode 1: erfc(x).
inline double erf_cody(double x, int mode) {
  static constexpr double a[5] = {3.1611237438705656, 113.864154151050156, 377.485237685302021,
                                  3209.37758913846947, 0.185777706184603153};
  static constexpr double b[4] = {23.6012909523441209, 244.024637934444173, 1282.61652607737228,
                                  2844.23683343917062};
  static constexpr double c[9] = {0.564188496988670089, 8.88314979438837594, 66.1191906371416295,
                                  298.635138197400131,  881.95222124176909,  1712.04761263407058,
                                  2051.07837782607147,  1230.33935479799725, 2.15311535474403846e-8};
  static constexpr double d[8] = {15.7449261107098347, 117.693950891312499, 537.181101862009858,
                                  1621.38957456669019, 3290.79923573345963, 4362.61909014324716,
                                  3439.36767414372164, 1230.33935480374942};
  static constexpr double p[6] = {0.305326634961232344, 0.360344899949804439, 0.125781726111229246,
                                  0.0160837851487422766, 6.58749161529837803e-4, 0.0163153871373020978};
  static constexpr double q[5] = {2.56852019228982242, 1.87295284992346047, 0.527905102951428412,
                                  0.0605183413124413191, 0.00233520497626869185};
  static constexpr double inv_sqrt_pi = 0.56418958354775628695;
  static constexpr double thresh = 0.46875;
  static constexpr double x_small = 1.11e-16;
  static constexpr double x_big = 26.543;

  const double y = std::fabs(x);
  double result = 0.0;

  if (y <= thresh) {
    // erf on [0, 0.46875]
    const double ysq = (y > x_small) ? y * y : 0.0;
    double num = a[4] * ysq;
    double den = ysq;
    for (int i = 0; i < 3; ++i) {
      num = (num + a[i]) * ysq;
      den = (den + b[i]) * ysq;
    }
    result = x * (num + a[3]) / (den + b[3]);
    return (mode == 0) ? result : 1.0 - result;
  }

  if (y <= 4.0) {
    // erfc on (0.46875, 4]
    double num = c[8] * y;
    double den = y;
    for (int i = 0; i < 7; ++i) {
      num = (num + c[i]) * y;
      den = (den + d[i]) * y;
    }
    result = (num + c[7]) / (den + d[7]);
    const double ysq = std::floor(y * 16.0) / 16.0;
    const double del = (y - ysq) * (y + ysq);
    result *= std::exp(-ysq * ysq) * std::exp(-del);
  } else if (y < x_big) {
    // erfc on (4, 26.543)
    const double ysq = 1.0 / (y * y);
    double num = p[5] * ysq;
    double den = ysq;
    for (int i = 0; i < 4; ++i) {
      num = (num + p[i]) * ysq;
      den = (den + q[i]) * ysq;
    }
    result = ysq * (num + p[4]) / (den + q[4]);
    result = (inv_sqrt_pi - result) / y;
    const double ycut = std::floor(y * 16.0) / 16.0;
    const double del = (y - ycut) * (y + ycut);
    result *= std::exp(-ycut * ycut) * std::exp(-del);
  } else {
    result = 0.0;  // erfc underflows
  }

  if (mode == 0) {
    result = (0.5 - result) + 0.5;  // erf = 1 - erfc
    if (x < 0.0) result = -result;
  } else if (x < 0.0) {
    result = 2.0 - result;
  }
  return result;
}

}  // namespace detail

/// Gauss error function; odd, monotone, range strictly inside (-1, 1)
/// (saturating one ulp below 1), absolute error < 1e-15.
inline double erf(double x) {
  constexpr double limit = 0x1.fffffffffffffp-1;  // largest double below 1
  return std::clamp(detail::erf_cody(x, 0), -limit, limit);
}

/// Complementary error function, accurate in the far tail (x up to ~26.5).
inline double erfc(double x) { return detail::erf_cody(x, 1); }

/// d/dx erf(x) = (2/sqrt(pi)) exp(-x^2).
inline double erf_deriv(double x) {
  constexpr double two_over_sqrt_pi = 1.1283791670955125739;
  return two_over_sqrt_pi * std::exp(-x * x);
}

/// Clamp applied to every CDF-type probability before it can reach a log.
inline double clamp_probability(double p) { return std::clamp(p, 1e-300, 1.0 - 1e-16); }

inline double gaussian_cdf(double x, double mu, double sigma) {
  require(sigma > 0.0, "gaussian_cdf: sigma must be positive");
  const double t = (x - mu) / (sigma * std::numbers::sqrt2);
  return clamp_probability(0.5 * erfc(-t));
}

/// 1 / (1 + e^{-t}), stable for |t| up to ~700 (branch on sign).
inline double logistic(double t) {
  if (t >= 0.0) {
    return 1.0 / (1.0 + std::exp(-t));
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

/// log sum_i e^{v_i} with max-subtraction.
inline double log_sum_exp(std::span<const double> v) {
  require(!v.empty(), "log_sum_exp: empty sequence");
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

inline double cauchy_cdf(double x, double a, double b) {
  require(b > 0.0, "cauchy_cdf: scale must be positive");
  return clamp_probability(std::atan((x - a) / b) / std::numbers::pi + 0.5);
}

/// ln Gamma(x) via the Lanczos approximation (g = 7, 9 terms);
/// relative error below 1e-13 for x > 0.
inline double log_gamma(double x) {
  require(x > 0.0 || x != std::floor(x), "log_gamma: nonpositive integer argument");
  static constexpr double coef[9] = {0.99999999999980993,  676.5203681218851,    -1259.1392167224028,
                                     771.32342877765313,   -176.61502916214059,  12.507343278686905,
                                     -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
  constexpr double g = 7.0;
  if (x < 0.5) {
    // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
    return std::log(std::numbers::pi / std::fabs(std::sin(std::numbers::pi * x))) - log_gamma(1.0 - x);
  }
  const double z = x - 1.0;
  double series = coef[0];
  for (int i = 1; i < 9; ++i) series += coef[i] / (z + static_cast<double>(i));
  const double t = z + g + 0.5;
  constexpr double half_log_two_pi = 0.91893853320467274178;
  return half_log_two_pi + (z + 0.5) * std::log(t) - t + std::log(series);
}

/// k ln(lambda) - lambda - ln k!
inline double poisson_log_pmf(long long k, double lambda) {
  require(k >= 0, "poisson_log_pmf: negative count");
  require(lambda > 0.0, "poisson_log_pmf: rate must be positive");
  const double kd = static_cast<double>(k);
  return kd * std::log(lambda) - lambda - log_gamma(kd + 1.0);
}

}  // namespace agglearn

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "agglearn/core.hpp"

// Evaluation metrics: accuracy, permutation-optimal accuracy via linear sum
// assignment, MSE, and the shift-minimized MSE (error variance).

namespace agglearn {

/// Minimum-cost assignment for a square cost matrix (Hungarian algorithm with
/// potentials, O(n^3)). Returns the column assigned to each row.
inline std::vector<std::size_t> linear_sum_assignment(const Matrix& cost) {
  require(cost.rows() == cost.cols(), "linear_sum_assignment: matrix must be square");
  require(cost.rows() > 0, "linear_sum_assignment: empty matrix");
  for (double v : cost.values()) {
    require(std::isfinite(v), "linear_sum_assignment: entries must be finite");
  }
  const std::size_t n = cost.rows();
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; p[j] = row matched to column j (0 = none).
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      std::size_t j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> assignment(n);
  for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
  return assignment;
}

struct ConfusionMatrix {
  std::size_t classes = 0;
  std::vector<long long> counts;  // row = true class, column = predicted class

  long long at(std::size_t truth, std::size_t pred) const { return counts[truth * classes + pred]; }
  long long total() const {
    long long t = 0;
    for (long long c : counts) t += c;
    return t;
  }
};

inline ConfusionMatrix confusion_matrix(std::span<const std::size_t> pred,
                                        std::span<const std::size_t> truth, std::size_t classes) {
  require(pred.size() == truth.size(), "confusion_matrix: length mismatch");
  ConfusionMatrix cm{classes, std::vector<long long>(classes * classes, 0)};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    require(pred[i] < classes && truth[i] < classes, "confusion_matrix: class index out of range");
    ++cm.counts[truth[i] * classes + pred[i]];
  }
  return cm;
}

inline double accuracy(std::span<const std::size_t> pred, std::span<const std::size_t> truth) {
  require(pred.size() == truth.size() && !pred.empty(), "accuracy: bad input lengths");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == truth[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

/// The class relabeling of predictions maximizing agreement with the truth,
/// obtained by linear sum assignment on negated confusion counts.
/// Returns perm with perm[predicted] = relabeled class.
inline std::vector<std::size_t> optimal_label_permutation(const ConfusionMatrix& cm) {
  Matrix negated(cm.classes, cm.classes);
  for (std::size_t t = 0; t < cm.classes; ++t) {
    for (std::size_t p = 0; p < cm.classes; ++p) {
      negated(p, t) = -static_cast<double>(cm.at(t, p));
    }
  }
  return linear_sum_assignment(negated);
}

/// Accuracy maximized over all permutations of the predicted classes.
inline double permutation_accuracy(std::span<const std::size_t> pred,
                                   std::span<const std::size_t> truth, std::size_t classes) {
  require(!pred.empty(), "permutation_accuracy: empty input");
  const ConfusionMatrix cm = confusion_matrix(pred, truth, classes);
  const std::vector<std::size_t> perm = optimal_label_permutation(cm);
  long long hits = 0;
  for (std::size_t p = 0; p < classes; ++p) hits += cm.at(perm[p], p);
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

inline double mse(std::span<const double> pred, std::span<const double> truth) {
  require(pred.size() == truth.size() && !pred.empty(), "mse: bad input lengths");
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = pred[i] - truth[i];
    sum += r * r;
  }
  return sum / static_cast<double>(pred.size());
}

/// MSE minimized over a constant shift of the predictions: the population
/// variance (divide by N) of the residuals. Population variance is what makes
/// the min-over-shift identity exact.
inline double error_variance(std::span<const double> pred, std::span<const double> truth) {
  require(pred.size() == truth.size() && !pred.empty(), "error_variance: bad input lengths");
  const double n = static_cast<double>(pred.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) mean += truth[i] - pred[i];
  mean /= n;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double r = truth[i] - pred[i] - mean;
    sum += r * r;
  }
  return sum / n;
}

struct TrialStats {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation (divide by n-1), 0 for n = 1
  std::size_t count = 0;
};

inline TrialStats aggregate_trials(std::span<const double> values) {
  require(!values.empty(), "aggregate_trials: no trials");
  TrialStats stats;
  stats.count = values.size();
  for (double v : values) stats.mean += v;
  stats.mean /= static_cast<double>(values.size());
  if (values.size() > 1) {
    double sum = 0.0;
    for (double v : values) sum += (v - stats.mean) * (v - stats.mean);
    stats.stddev = std::sqrt(sum / static_cast<double>(values.size() - 1));
  }
  return stats;
}

/// metric TAB mean TAB std
inline std::string format_metric_line(const std::string& name, const TrialStats& stats) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.6f\t%.6f", stats.mean, stats.stddev);
  return name + '\t' + buf;
}

}  // namespace agglearn

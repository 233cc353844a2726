#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

#include "mpfedxgb/common.hpp"
#include "mpfedxgb/loss.hpp"

namespace mpfedxgb {

struct Metrics {
  double accuracy = 0;
  double f1 = 0;
  std::optional<double> auc;  // undefined with a single class
  double mse = 0;
};

// Rank-based AUC with midranks for ties.
inline std::optional<double> auc_score(const std::vector<double>& y, const std::vector<double>& score) {
  if (y.size() != score.size()) throw ShapeError("auc: length mismatch");
  const std::size_t n = y.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && score[idx[j + 1]] == score[idx[i]]) ++j;
    const double r = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[idx[k]] = r;
    i = j + 1;
  }
  double pos = 0, rsum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (y[i] > 0.5) {
      pos += 1;
      rsum += rank[i];
    }
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0 || neg == 0) return std::nullopt;
  return (rsum - pos * (pos + 1) / 2) / (pos * neg);
}

// O(n^2) pair count, for tests.
inline std::optional<double> auc_pairs(const std::vector<double>& y, const std::vector<double>& score) {
  double num = 0, pairs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] <= 0.5) continue;
    for (std::size_t j = 0; j < y.size(); ++j) {
      if (y[j] > 0.5) continue;
      pairs += 1;
      if (score[i] > score[j]) num += 1;
      else if (score[i] == score[j]) num += 0.5;
    }
  }
  if (pairs == 0) return std::nullopt;
  return num / pairs;
}

// Scores are raw margins; logloss thresholds the sigmoid at 1/2.
inline Metrics evaluate(const std::vector<double>& y, const std::vector<double>& score, Loss loss) {
  if (y.size() != score.size()) throw ShapeError("evaluate: length mismatch");
  Metrics m;
  double tp = 0, fp = 0, fn = 0, correct = 0, se = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double p = loss == Loss::kLogloss ? sigmoid(score[i]) : score[i];
    const bool pred = p >= 0.5;
    const bool truth = y[i] > 0.5;
    correct += pred == truth;
    tp += pred && truth;
    fp += pred && !truth;
    fn += !pred && truth;
    se += (p - y[i]) * (p - y[i]);
  }
  const double n = static_cast<double>(y.size());
  m.accuracy = n > 0 ? correct / n : 0;
  m.f1 = tp > 0 ? 2 * tp / (2 * tp + fp + fn) : 0;
  m.mse = n > 0 ? se / n : 0;
  m.auc = auc_score(y, score);
  return m;
}

}  // namespace mpfedxgb

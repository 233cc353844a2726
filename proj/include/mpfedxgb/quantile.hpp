#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "mpfedxgb/common.hpp"

namespace mpfedxgb {

// Equal-frequency thresholds: Q[k] is the order statistic at rank
// ceil((k + 1) N / K). Repeated thresholds collapse, so a column with few
// distinct values yields fewer effective buckets.
inline std::vector<double> quantile_thresholds(std::span<const double> column, int buckets) {
  if (buckets < 1) throw ConfigError("buckets must be >= 1");
  if (column.empty()) throw ShapeError("quantiles of an empty column");
  std::vector<double> sorted(column.begin(), column.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> q;
  q.reserve(buckets);
  for (int k = 0; k < buckets; ++k) {
    const std::size_t rank = (static_cast<std::size_t>(k + 1) * n + buckets - 1) / buckets;
    const double v = sorted[rank - 1];
    if (q.empty() || v != q.back()) q.push_back(v);
  }
  return q;
}

// Bucket k holds Q[k-1] < x <= Q[k]; values above the last threshold land in
// the last bucket.
inline int bucket_of(double x, const std::vector<double>& q) {
  auto it = std::lower_bound(q.begin(), q.end(), x);
  if (it == q.end()) return static_cast<int>(q.size()) - 1;
  return static_cast<int>(it - q.begin());
}

// Row-major N x K one-hot membership matrix.
inline std::vector<double> bucket_mask(std::span<const double> column,
                                       const std::vector<double>& q) {
  const std::size_t K = q.size();
  std::vector<double> mask(column.size() * K, 0.0);
  for (std::size_t i = 0; i < column.size(); ++i) {
    mask[i * K + bucket_of(column[i], q)] = 1.0;
  }
  return mask;
}

}  // namespace mpfedxgb

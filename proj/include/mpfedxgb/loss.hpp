#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "mpfedxgb/params.hpp"

namespace mpfedxgb {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double loss_value(Loss loss, double y, double yhat) {
  if (loss == Loss::kMse) return 0.5 * (yhat - y) * (yhat - y);
  // log(1 + e^yhat) - y yhat, written to avoid overflow
  const double soft = yhat > 0 ? yhat + std::log1p(std::exp(-yhat)) : std::log1p(std::exp(yhat));
  return soft - y * yhat;
}

// First and second derivatives of the loss in yhat.
inline std::pair<std::vector<double>, std::vector<double>> compute_gradients(
    const std::vector<double>& y, const std::vector<double>& yhat, Loss loss) {
  if (y.size() != yhat.size()) throw ShapeError("labels and scores differ in length");
  std::vector<double> g(y.size()), h(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (loss == Loss::kLogloss) {
      const double p = sigmoid(yhat[i]);
      g[i] = p - y[i];
      h[i] = p * (1.0 - p);
    } else {
      g[i] = yhat[i] - y[i];
      h[i] = 1.0;
    }
  }
  return {g, h};
}

}  // namespace mpfedxgb

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "mpfedxgb/party.hpp"
#include "mpfedxgb/shares.hpp"

namespace mpfedxgb {

// Descent steps needed so that |w - w*| <= eps given v = A'/(mu lambda)
// and x = a eps / |b|.
inline int iteration_bound(double v, double mu, double x) {
  if (!(mu > 1)) throw ConfigError("mu must be > 1");
  if (!(v > 1.0 / mu)) throw ProtocolError("perturbed magnitude ratio below 1/mu");
  if (!(x > 0)) throw ConfigError("ratio a*eps/b must be positive");
  if (x >= 1) return 1;
  const double vm = v * mu;
  double t = std::ceil(std::log(x) / std::log((vm - 1) / vm));
  if (v > 1) t = std::min(t, std::ceil(std::log(x) / std::log(1.0 / v)));
  if (!(t < static_cast<double>(std::numeric_limits<int>::max()))) {
    throw ProtocolError("iteration bound overflow");
  }
  return std::max(1, static_cast<int>(t));
}

struct StepPlan {
  double eta = 0;   // 1 / (a + sum sigma)
  int steps = 0;
  double v = 0;     // (a + sum sigma) / (mu lambda)
};

struct LeafWeightOptions {
  double lambda = 1.0;
  double mu = 2.0;
  double ratio_floor = 1e-14;
  // test-only: no perturbation, eta = 1/a, a single step
  bool exact_step = false;
};

struct LeafWeightResult {
  ShareVector w;
  StepPlan plan;  // as broadcast by P1
};

// P1 learns only a + sum(sigma); every descent step is one MUL.
inline LeafWeightResult secure_leaf_weight(Party& p, const ShareVector& a, const ShareVector& b,
                                           const LeafWeightOptions& opt) {
  if (a.size() != 1 || b.size() != 1) throw ShapeError("leaf weight expects scalar shares");
  double sigma = 0.0;
  if (!opt.exact_step) {
    const double cap = opt.mu * opt.lambda / p.parties();
    do {
      sigma = p.sigma_rng().open_closed(cap);
    } while (!(sigma > 0));
  }
  ShareVector report(p.id(), std::vector<double>{a[0] + sigma});
  const auto r = p.next_round();
  const std::vector<double> total = p.open_to(kActiveParty, report, Tag::kMagnitudeReport, 0, r);
  std::vector<double> plan_msg;
  if (p.active()) {
    const double A = total[0];
    if (!(A > 0)) throw ProtocolError("non-positive perturbed magnitude");
    StepPlan plan;
    plan.eta = 1.0 / A;
    plan.v = A / (opt.mu * opt.lambda);
    plan.steps = opt.exact_step ? 1 : iteration_bound(plan.v, opt.mu, opt.ratio_floor);
    plan_msg = {plan.eta, static_cast<double>(plan.steps), plan.v};
  }
  plan_msg = p.broadcast(kActiveParty, std::move(plan_msg), Tag::kStepSize, 0, r);
  if (plan_msg.size() != 3) throw ProtocolError("step plan payload");
  StepPlan plan{plan_msg[0], static_cast<int>(plan_msg[1]), plan_msg[2]};

  ShareVector w = p.zeros(1);
  for (int t = 0; t < plan.steps; ++t) {
    const ShareVector aw = p.mul(a, w, MulPhase::kLeafWeight);
    w = w - scaled(aw + b, plan.eta);
  }
  return {w, plan};
}

// Plaintext replay of the descent with step eta, returning w after t steps.
inline double descent_replay(double a, double b, double eta, int t) {
  double w = 0.0;
  for (int i = 0; i < t; ++i) w -= eta * (a * w + b);
  return w;
}

}  // namespace mpfedxgb

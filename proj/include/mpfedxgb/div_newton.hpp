#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "mpfedxgb/party.hpp"
#include "mpfedxgb/shares.hpp"

namespace mpfedxgb {

// Order of magnitude of a share: |s| = s' 10^mu with s' in (0.1, 1].
inline int magnitude_order(double share) {
  if (share == 0.0) return std::numeric_limits<int>::min();
  return static_cast<int>(std::floor(std::log10(std::fabs(share)))) + 1;
}

struct ReciprocalInit {
  ShareVector x0;
  int mu_max = 0;
  double x0_plain = 0;  // public after the broadcast
};

// Each party reports the order of magnitude of its share of d to P1, which
// picks x0 = 10^-(mu_max + 1); the parties hold x0 / M each.
inline ReciprocalInit init_reciprocal(Party& p, const ShareVector& d) {
  if (d.size() != 1) throw ShapeError("reciprocal expects a scalar share");
  const int mine = magnitude_order(d[0]);
  const auto r = p.next_round();
  std::vector<double> msg;
  if (p.active()) {
    int mu_max = mine;
    for (PartyId m = 2; m <= p.parties(); ++m) {
      Message in = p.endpoint().recv(m, Tag::kMagnitudeReport, r, 1);
      if (in.payload.size() != 1) throw ProtocolError("magnitude report payload");
      if (in.payload[0] > mu_max) mu_max = static_cast<int>(in.payload[0]);
    }
    if (mu_max == std::numeric_limits<int>::min()) {
      throw ProtocolError("all shares of the divisor are zero");
    }
    msg = {static_cast<double>(mu_max), std::pow(10.0, -(mu_max + 1))};
  } else {
    const double rep = mine == std::numeric_limits<int>::min() ? -1e9 : static_cast<double>(mine);
    p.endpoint().send(kActiveParty, Tag::kMagnitudeReport, r, {rep}, 1);
  }
  msg = p.broadcast(kActiveParty, std::move(msg), Tag::kStepSize, 1, r);
  if (msg.size() != 2) throw ProtocolError("reciprocal start payload");
  if (msg[0] < -1e8) throw ProtocolError("all shares of the divisor are zero");
  ReciprocalInit out;
  out.mu_max = static_cast<int>(msg[0]);
  out.x0_plain = msg[1];
  out.x0 = p.constant(msg[1]);
  return out;
}

// x <- x (2 - d x), two MULs per iteration.
inline ShareVector newton_reciprocal(Party& p, const ShareVector& d, int iterations,
                                     std::vector<ShareVector>* trace = nullptr) {
  if (iterations < 1) throw ConfigError("newton iterations must be >= 1");
  ReciprocalInit init = init_reciprocal(p, d);
  ShareVector x = init.x0;
  const ShareVector two = p.constant(2.0);
  if (trace) trace->push_back(x);
  for (int n = 0; n < iterations; ++n) {
    const ShareVector dx = p.mul(d, x, MulPhase::kDivision);
    x = p.mul(x, two - dx, MulPhase::kDivision);
    if (trace) trace->push_back(x);
  }
  return x;
}

// num / d with 2n + 1 MULs.
inline ShareVector secure_divide(Party& p, const ShareVector& num, const ShareVector& d,
                                 int iterations) {
  const ShareVector inv = newton_reciprocal(p, d, iterations);
  return p.mul(num, inv, MulPhase::kDivision);
}

inline long long division_muls(int iterations) { return 2LL * iterations + 1; }

// Division-based argmax: two divisions per candidate.
inline long long argmax_via_div_muls(long long J, long long K, int iterations = 20) {
  return 2 * division_muls(iterations) * J * K;
}

}  // namespace mpfedxgb

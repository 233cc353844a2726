#pragma once

#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "mpfedxgb/party.hpp"
#include "mpfedxgb/shares.hpp"

namespace mpfedxgb {

// Reconstructed magnitudes below this count as zero.
inline constexpr double kZeroBand = 1e-12;

inline int sign_with_band(double v) {
  if (std::fabs(v) < kZeroBand) return 0;
  return v > 0 ? 1 : -1;
}

// Shares of split candidates: squared child gradient sums and regularized
// child hessian sums, one element per candidate.
struct CandidateStats {
  ShareVector gl_sq;
  ShareVector gr_sq;
  ShareVector hl;
  ShareVector hr;

  std::size_t size() const { return gl_sq.size(); }
};

inline ShareVector gather(const ShareVector& x, const std::vector<int>& idx) {
  ShareVector out(x.owner(), idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) out[i] = x[idx[i]];
  return out;
}

inline CandidateStats gather(const CandidateStats& s, const std::vector<int>& idx) {
  return {gather(s.gl_sq, idx), gather(s.gr_sq, idx), gather(s.hl, idx), gather(s.hr, idx)};
}

inline ShareVector concat(const std::vector<ShareVector>& parts, PartyId owner) {
  ShareVector out(owner, 0);
  for (const auto& p : parts) {
    out.values().insert(out.values().end(), p.values().begin(), p.values().end());
  }
  return out;
}

// Common-denominator difference of two candidates' scores:
//   G / H = (GL1/HL1 - GL2/HL2) + (GR1/HR1 - GR2/HR2)
// Nine MULs.
inline std::pair<ShareVector, ShareVector> diff_numerator_denominator(
    Party& p, const CandidateStats& c1, const CandidateStats& c2,
    MulPhase phase = MulPhase::kComparison) {
  const ShareVector l12 = p.mul(c1.gl_sq, c2.hl, phase);
  const ShareVector l21 = p.mul(c2.gl_sq, c1.hl, phase);
  const ShareVector r12 = p.mul(c1.gr_sq, c2.hr, phase);
  const ShareVector r21 = p.mul(c2.gr_sq, c1.hr, phase);
  const ShareVector hl = p.mul(c1.hl, c2.hl, phase);
  const ShareVector hr = p.mul(c1.hr, c2.hr, phase);
  const ShareVector left = p.mul(hr, l12 - l21, phase);
  const ShareVector right = p.mul(hl, r12 - r21, phase);
  const ShareVector den = p.mul(hl, hr, phase);
  return {left + right, den};
}

// H opens at P1 and G at P2; P2 hands its sign bits to P1, which
// broadcasts sign(G) * sign(H).
inline std::vector<int> sign_protocol(Party& p, const ShareVector& num, const ShareVector& den) {
  const auto r = p.next_round();
  const std::size_t n = num.size();
  const std::vector<double> h = p.open_to(kActiveParty, den, Tag::kSignVote, 0, r);
  const std::vector<double> g = p.open_to(kGradientRestorer, num, Tag::kSignVote, 1, r);
  std::vector<double> verdict(n, 0.0);
  if (p.id() == kGradientRestorer) {
    std::vector<double> bits(n);
    for (std::size_t i = 0; i < n; ++i) bits[i] = sign_with_band(g[i]);
    p.endpoint().send(kActiveParty, Tag::kSignVerdict, r, std::move(bits), 0);
  }
  if (p.active()) {
    Message m = p.endpoint().recv(kGradientRestorer, Tag::kSignVerdict, r, 0);
    if (m.payload.size() != n) throw ProtocolError("sign bit count");
    for (std::size_t i = 0; i < n; ++i) verdict[i] = m.payload[i] * sign_with_band(h[i]);
  }
  verdict = p.broadcast(kActiveParty, std::move(verdict), Tag::kSignVerdict, 1, r);
  if (verdict.size() != n) throw ProtocolError("verdict count");
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = static_cast<int>(verdict[i]);
  return out;
}

// Does each challenger beat its incumbent by more than `delta` in gain
// units? Zero keeps the incumbent.
inline std::vector<bool> challengers_win(Party& p, const CandidateStats& incumbent,
                                         const CandidateStats& challenger, double delta) {
  auto [g, h] = diff_numerator_denominator(p, challenger, incumbent);
  const ShareVector z = g - scaled(h, 2.0 * delta);
  const std::vector<int> s = sign_protocol(p, z, h);
  std::vector<bool> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] > 0;
  return out;
}

// Single-elimination bracket over 0..n-1. Each round pairs neighbours, an
// odd one out advances, and judge(matches) says whether the higher index of
// each (incumbent, challenger) pair wins. With batch_rounds the whole round
// goes to judge at once, otherwise one match at a time.
template <class Judge>
int run_bracket(int n, bool batch_rounds, Judge&& judge) {
  if (n < 1) throw ShapeError("bracket over no candidates");
  std::vector<int> alive(n);
  std::iota(alive.begin(), alive.end(), 0);
  while (alive.size() > 1) {
    std::vector<std::pair<int, int>> matches;
    for (std::size_t i = 0; i + 1 < alive.size(); i += 2) matches.emplace_back(alive[i], alive[i + 1]);
    std::vector<bool> wins;
    if (batch_rounds) {
      wins = judge(matches);
    } else {
      for (const auto& m : matches) wins.push_back(judge(std::vector<std::pair<int, int>>{m})[0]);
    }
    std::vector<int> next;
    for (std::size_t k = 0; k < matches.size(); ++k) {
      next.push_back(wins[k] ? matches[k].second : matches[k].first);
    }
    if (alive.size() % 2 == 1) next.push_back(alive.back());
    alive.swap(next);
  }
  return alive[0];
}

inline int ceil_log2(long long x) {
  int r = 0;
  while ((1LL << r) < x) ++r;
  return r;
}

// Matches played by a bracket of n entrants.
inline int bracket_matches(int n) { return n > 0 ? n - 1 : 0; }
inline int bracket_rounds(int n) { return ceil_log2(n); }

struct ArgmaxResult {
  int feature = -1;  // position in the candidate feature list
  int bucket = -1;
};

// Per-feature brackets over buckets, then a bracket over the feature
// champions in list order.
inline ArgmaxResult secure_argmax(Party& p, const std::vector<CandidateStats>& features,
                                  bool batch_rounds, double delta) {
  if (features.empty()) throw ShapeError("argmax over no features");
  auto judge_for = [&](const CandidateStats& s) {
    return [&p, &s, delta](const std::vector<std::pair<int, int>>& matches) {
      std::vector<int> inc, ch;
      for (const auto& [a, b] : matches) {
        inc.push_back(a);
        ch.push_back(b);
      }
      return challengers_win(p, gather(s, inc), gather(s, ch), delta);
    };
  };
  std::vector<int> best(features.size());
  std::vector<CandidateStats> champs;
  for (std::size_t j = 0; j < features.size(); ++j) {
    best[j] = run_bracket(static_cast<int>(features[j].size()), batch_rounds, judge_for(features[j]));
    champs.push_back(gather(features[j], {best[j]}));
  }
  CandidateStats all{p.zeros(0), p.zeros(0), p.zeros(0), p.zeros(0)};
  for (const auto& c : champs) {
    all.gl_sq.values().push_back(c.gl_sq[0]);
    all.gr_sq.values().push_back(c.gr_sq[0]);
    all.hl.values().push_back(c.hl[0]);
    all.hr.values().push_back(c.hr[0]);
  }
  const int jstar = run_bracket(static_cast<int>(features.size()), batch_rounds, judge_for(all));
  return {jstar, best[jstar]};
}

// Sign of the best split's gain minus delta, over one fraction:
//   N = GL HR HI + GR HL HI - loss_n HL HR - 2 gamma HL HR HI
//   D = HL HR HI
// Eight MULs. True when the gain exceeds delta.
inline bool best_gain_positive(Party& p, const CandidateStats& best, const ShareVector& loss_n,
                               const ShareVector& loss_d, const ShareVector& gamma,
                               double delta) {
  const MulPhase ph = MulPhase::kGainSign;
  const ShareVector hlr = p.mul(best.hl, best.hr, ph);
  const ShareVector den = p.mul(hlr, loss_d, ph);
  const ShareVector t1 = p.mul(p.mul(best.gl_sq, best.hr, ph), loss_d, ph);
  const ShareVector t2 = p.mul(p.mul(best.gr_sq, best.hl, ph), loss_d, ph);
  const ShareVector t3 = p.mul(loss_n, hlr, ph);
  const ShareVector t4 = p.mul(scaled(gamma, 2.0), den, ph);
  const ShareVector num = t1 + t2 - t3 - t4;
  const ShareVector z = num - scaled(den, 2.0 * delta);
  return sign_protocol(p, z, den)[0] > 0;
}

// Plaintext counterparts, shared with the centralized trainer.
struct PlainCandidate {
  double gl = 0, gr = 0, hl = 0, hr = 0;  // child sums, hessians include lambda
};

inline double plain_score(const PlainCandidate& c) {
  return c.gl * c.gl / c.hl + c.gr * c.gr / c.hr;
}

inline bool plain_challenger_wins(const PlainCandidate& inc, const PlainCandidate& ch,
                                  double delta) {
  return plain_score(ch) - plain_score(inc) > 2.0 * delta;
}

inline double plain_gain(const PlainCandidate& c, double g_total, double h_total_reg,
                         double gamma) {
  return 0.5 * (plain_score(c) - g_total * g_total / h_total_reg) - gamma;
}

// Analytic argmax cost: 9 J ceil(log2 K) + 9 ceil(log2 J).
inline long long division_free_argmax_muls(long long J, long long K) {
  return 9 * J * ceil_log2(K) + 9 * ceil_log2(J);
}

}  // namespace mpfedxgb

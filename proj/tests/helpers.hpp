#pragma once

#include <vector>

#include "mpfedxgb/mpfedxgb.hpp"

namespace testing_util {

using namespace mpfedxgb;

inline SessionConfig config(int M, std::uint64_t seed = 11) {
  SessionConfig cfg;
  cfg.parties = M;
  cfg.seed = seed;
  cfg.timeout_s = 60;
  return cfg;
}

inline SessionTopology topology(int M) {
  SessionTopology t;
  t.parties = M;
  t.feature_counts.assign(M, 0);
  return t;
}

// Opens x to P1, then P1 hands the plaintext to everyone (test only).
inline std::vector<double> reveal(Party& p, const ShareVector& x) {
  std::vector<double> v = p.open_to(kActiveParty, x, Tag::kControl, 7);
  return p.broadcast(kActiveParty, std::move(v), Tag::kControl, 8);
}

template <class Fn>
auto run(int M, Fn fn, std::uint64_t seed = 11) {
  return run_session(config(M, seed), topology(M), fn);
}

}  // namespace testing_util

namespace testing_util {

// Per-feature bucket sums of a random node.
struct RandomNode {
  std::vector<std::vector<double>> gb, hb;
};

inline RandomNode random_node(Rng& rng, int N, int J, int K) {
  RandomNode node;
  std::vector<double> g(N), h(N);
  for (int i = 0; i < N; ++i) {
    const double p = rng.uniform(0.02, 0.98);
    const double y = rng.uniform(0, 1) < 0.5 ? 0.0 : 1.0;
    g[i] = p - y;
    h[i] = p * (1 - p);
  }
  std::vector<std::vector<double>> cols;
  for (int j = 0; j < J; ++j) {
    std::vector<double> c(N);
    const auto style = rng.integer(0, 3);
    if (style == 3 && j > 0) {
      c = cols[rng.integer(0, j - 1)];  // duplicate column: exact ties
    } else {
      for (auto& v : c) v = style == 0 ? static_cast<double>(rng.integer(0, 3)) : rng.uniform(0, 1);
    }
    cols.push_back(c);
    const auto q = quantile_thresholds(c, K);
    std::vector<double> ones(N, 1.0), gb, hb;
    bucket_sums(c, q, g, h, ones, gb, hb);
    node.gb.push_back(gb);
    node.hb.push_back(hb);
  }
  return node;
}

struct SecureDecision {
  int feature = -1;
  int bucket = -1;
  bool positive = false;
};

// Secure argmax and gain test from shares of the node's bucket sums, with
// the same candidate preparation as the trainer.
inline SecureDecision secure_node_decision(Party& p, const RandomNode& node, double lambda,
                                           double gamma, double delta, bool batch) {
  const int J = static_cast<int>(node.gb.size());
  std::vector<double> G(1, 0.0), H(1, 0.0);
  for (double v : node.gb[0]) G[0] += v;
  for (double v : node.hb[0]) H[0] += v;
  const ShareVector gsum = p.share(kActiveParty, p.active() ? G : std::vector<double>{}, 1);
  const ShareVector hsum = p.share(kActiveParty, p.active() ? H : std::vector<double>{}, 1);
  const ShareVector lam = p.constant(lambda);
  std::vector<ShareVector> gl, gr, hl, hr;
  for (int j = 0; j < J; ++j) {
    const std::size_t K = node.gb[j].size();
    const ShareVector gb = p.share(kActiveParty, p.active() ? node.gb[j] : std::vector<double>{}, K);
    const ShareVector hb = p.share(kActiveParty, p.active() ? node.hb[j] : std::vector<double>{}, K);
    ShareVector l(p.id(), K), r(p.id(), K), a(p.id(), K), b(p.id(), K);
    double ga = 0, ha = 0;
    for (std::size_t k = 0; k < K; ++k) {
      ga += gb[k];
      ha += hb[k];
      l[k] = ga;
      r[k] = gsum[0] - ga;
      a[k] = ha + lam[0];
      b[k] = hsum[0] - ha + lam[0];
    }
    gl.push_back(l);
    gr.push_back(r);
    hl.push_back(a);
    hr.push_back(b);
  }
  std::vector<CandidateStats> stats;
  for (int j = 0; j < J; ++j) {
    stats.push_back({p.mul(gl[j], gl[j]), p.mul(gr[j], gr[j]), hl[j], hr[j]});
  }
  const ArgmaxResult best = secure_argmax(p, stats, batch, delta);
  const ShareVector loss_n = p.mul(gsum, gsum);
  const bool pos = best_gain_positive(p, gather(stats[best.feature], {best.bucket}), loss_n,
                                      hsum + lam, p.constant(gamma), delta);
  return {best.feature, best.bucket, pos};
}

}  // namespace testing_util

#pragma once

#include <vector>

#include "mpfedxgb/loss.hpp"
#include "mpfedxgb/params.hpp"
#include "mpfedxgb/quantile.hpp"
#include "mpfedxgb/split_select.hpp"

namespace mpfedxgb {

// Centralized reference trainer over plaintext columns indexed by global
// feature id. Uses the same quantiles, bracket order and tie margin as the
// federated trainer.

struct OracleNode {
  bool leaf = true;
  int feature_id = -1;
  int bucket = -1;
  double threshold = 0.0;
  double weight = 0.0;
  int left = -1;
  int right = -1;
  // node sums, for diagnostics
  double g = 0.0;
  double h = 0.0;
};

struct OracleTree {
  std::vector<OracleNode> nodes;  // preorder
};

struct OracleData {
  std::vector<std::vector<double>> cols;  // by global id
  std::vector<PartyId> owner;             // by global id
};

struct OracleModel {
  std::vector<OracleTree> trees;
  std::vector<std::vector<double>> thresholds;  // by global id
};

struct PlainDecision {
  bool split = false;
  int feature = -1;  // position in the candidate list
  int bucket = -1;
  double gain = 0.0;
};

// Node decision from per-feature bucket sums (already restricted to the
// node's instances).
inline PlainDecision plain_node_decision(const std::vector<std::vector<double>>& gb,
                                         const std::vector<std::vector<double>>& hb,
                                         double lambda, double gamma, double delta,
                                         bool batch_rounds = false) {
  if (gb.empty()) throw ShapeError("no candidate features");
  double G = 0, H = 0;
  for (double v : gb[0]) G += v;
  for (double v : hb[0]) H += v;
  std::vector<std::vector<PlainCandidate>> cands(gb.size());
  for (std::size_t j = 0; j < gb.size(); ++j) {
    double gl = 0, hl = 0;
    for (std::size_t k = 0; k < gb[j].size(); ++k) {
      gl += gb[j][k];
      hl += hb[j][k];
      cands[j].push_back({gl, G - gl, hl + lambda, H - hl + lambda});
    }
  }
  auto judge = [&](const std::vector<PlainCandidate>& c) {
    return [&c, delta](const std::vector<std::pair<int, int>>& m) {
      std::vector<bool> w;
      for (const auto& [a, b] : m) w.push_back(plain_challenger_wins(c[a], c[b], delta));
      return w;
    };
  };
  std::vector<int> best(gb.size());
  std::vector<PlainCandidate> champs;
  for (std::size_t j = 0; j < gb.size(); ++j) {
    best[j] = run_bracket(static_cast<int>(cands[j].size()), batch_rounds, judge(cands[j]));
    champs.push_back(cands[j][best[j]]);
  }
  const int js = run_bracket(static_cast<int>(champs.size()), batch_rounds, judge(champs));
  PlainDecision d;
  d.feature = js;
  d.bucket = best[js];
  d.gain = plain_gain(champs[js], G, H + lambda, gamma);
  d.split = d.gain > delta;
  return d;
}

// Bucket sums of g and h over instances with s_i = 1.
inline void bucket_sums(const std::vector<double>& col, const std::vector<double>& q,
                        const std::vector<double>& g, const std::vector<double>& h,
                        const std::vector<double>& s, std::vector<double>& gb,
                        std::vector<double>& hb) {
  gb.assign(q.size(), 0.0);
  hb.assign(q.size(), 0.0);
  for (std::size_t i = 0; i < col.size(); ++i) {
    if (s[i] == 0.0) continue;
    const int k = bucket_of(col[i], q);
    gb[k] += g[i] * s[i];
    hb[k] += h[i] * s[i];
  }
}

class OracleTrainer {
 public:
  OracleTrainer(const OracleData& data, const HyperParams& params) : data_(data), params_(params) {
    params_.validate();
    for (const auto& c : data_.cols) model_.thresholds.push_back(quantile_thresholds(c, params_.buckets));
  }

  std::vector<int> candidates(int depth) const {
    std::vector<int> out;
    for (std::size_t f = 0; f < data_.cols.size(); ++f) {
      if (depth == 0 && params_.first_layer_mask && data_.owner[f] != kActiveParty) continue;
      out.push_back(static_cast<int>(f));
    }
    if (out.empty()) throw ConfigError("no candidate features");
    return out;
  }

  PlainDecision decide(const std::vector<double>& g, const std::vector<double>& h,
                       const std::vector<double>& s, const std::vector<int>& cand) const {
    std::vector<std::vector<double>> gb(cand.size()), hb(cand.size());
    for (std::size_t c = 0; c < cand.size(); ++c) {
      bucket_sums(data_.cols[cand[c]], model_.thresholds[cand[c]], g, h, s, gb[c], hb[c]);
    }
    PlainDecision d = plain_node_decision(gb, hb, params_.lambda, params_.gamma,
                                          params_.tie_tolerance);
    d.feature = cand[d.feature];
    return d;
  }

  OracleTree fit_tree(const std::vector<double>& g, const std::vector<double>& h) {
    OracleTree t;
    std::vector<double> s(g.size(), 1.0);
    build(t, g, h, s, 0);
    return t;
  }

  // Full boosting run; yhat receives the training scores.
  const OracleModel& train(const std::vector<double>& y, std::vector<double>* yhat_out = nullptr) {
    std::vector<double> yhat(y.size(), 0.0);
    for (int t = 0; t < params_.trees; ++t) {
      auto [g, h] = compute_gradients(y, yhat, params_.loss);
      model_.trees.push_back(fit_tree(g, h));
      for (std::size_t i = 0; i < y.size(); ++i) yhat[i] += predict_row(model_.trees.back(), i);
    }
    if (yhat_out) *yhat_out = yhat;
    return model_;
  }

  double predict_row(const OracleTree& t, std::size_t i) const {
    return predict_row(t, [&](int f) { return data_.cols[f][i]; });
  }

  template <class Get>
  static double predict_row(const OracleTree& t, Get&& get) {
    int n = 0;
    while (!t.nodes[n].leaf) {
      n = get(t.nodes[n].feature_id) <= t.nodes[n].threshold ? t.nodes[n].left : t.nodes[n].right;
    }
    return t.nodes[n].weight;
  }

  const OracleModel& model() const { return model_; }

 private:
  int build(OracleTree& t, const std::vector<double>& g, const std::vector<double>& h,
            const std::vector<double>& s, int depth) {
    const int idx = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    double G = 0, H = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      G += g[i] * s[i];
      H += h[i] * s[i];
    }
    t.nodes[idx].g = G;
    t.nodes[idx].h = H;
    PlainDecision d;
    if (depth < params_.max_depth) d = decide(g, h, s, candidates(depth));
    if (!d.split) {
      t.nodes[idx].leaf = true;
      t.nodes[idx].weight = -G / (H + params_.lambda);
      return idx;
    }
    const double thr = model_.thresholds[d.feature][d.bucket];
    std::vector<double> sl(s.size()), sr(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      const bool left = data_.cols[d.feature][i] <= thr;
      sl[i] = left ? s[i] : 0.0;
      sr[i] = left ? 0.0 : s[i];
    }
    t.nodes[idx].leaf = false;
    t.nodes[idx].feature_id = d.feature;
    t.nodes[idx].bucket = d.bucket;
    t.nodes[idx].threshold = thr;
    const int l = build(t, g, h, sl, depth + 1);
    const int r = build(t, g, h, sr, depth + 1);
    t.nodes[idx].left = l;
    t.nodes[idx].right = r;
    return idx;
  }

  const OracleData& data_;
  HyperParams params_;
  OracleModel model_;
};

// Scores for rows given as columns by global id.
inline std::vector<double> oracle_predict(const OracleModel& m,
                                          const std::vector<std::vector<double>>& cols,
                                          std::size_t rows) {
  std::vector<double> out(rows, 0.0);
  for (const auto& t : m.trees) {
    for (std::size_t i = 0; i < rows; ++i) {
      out[i] += OracleTrainer::predict_row(t, [&](int f) { return cols[f][i]; });
    }
  }
  return out;
}

}  // namespace mpfedxgb

#pragma once

#include <vector>

#include "mpfedxgb/matrix.hpp"
#include "mpfedxgb/model.hpp"
#include "mpfedxgb/party.hpp"

namespace mpfedxgb {

enum class PredictMode { kBatched, kPerInstance };

// 0/1 flag per leaf (left to right): owned splits follow the threshold,
// dummies open both children.
inline std::vector<double> local_indicator(const PartialTree& t, const LocalMatrix& X,
                                           std::size_t row) {
  std::vector<int> rank(t.nodes.size(), -1);
  int L = 0;
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    if (t.nodes[i].kind == NodeKind::kLeaf) rank[i] = L++;
  }
  std::vector<double> out(L, 0.0);
  if (t.nodes.empty()) return out;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    if (i < 0 || i >= static_cast<int>(t.nodes.size())) throw ShapeError("malformed tree");
    const TreeNode& n = t.nodes[i];
    switch (n.kind) {
      case NodeKind::kLeaf:
        out[rank[i]] = 1.0;
        break;
      case NodeKind::kDummy:
        stack.push_back(n.right);
        stack.push_back(n.left);
        break;
      case NodeKind::kSplit:
        if (n.local_feature < 0 || n.local_feature >= static_cast<int>(X.width())) {
          throw ShapeError("split references a missing local column");
        }
        stack.push_back(X.at(row, n.local_feature) <= n.threshold ? n.left : n.right);
        break;
    }
  }
  return out;
}

inline std::uint64_t shape_digest(const std::vector<const PartialTree*>& trees) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto* t : trees) {
    h = fnv1a(h, t->nodes.size());
    for (const auto& n : t->nodes) {
      h = fnv1a(h, n.kind == NodeKind::kLeaf ? 1 : 2);
      h = fnv1a(h, static_cast<std::uint64_t>(n.left + 1));
    }
  }
  return h;
}

// Every party must hold trees of one shape; P1 compares digests.
inline void check_aligned(Party& p, const std::vector<const PartialTree*>& trees) {
  const auto r = p.next_round();
  const double mine = static_cast<double>(shape_digest(trees) >> 12);
  std::vector<double> ok;
  if (p.active()) {
    bool same = true;
    for (PartyId m = 2; m <= p.parties(); ++m) {
      Message msg = p.endpoint().recv(m, Tag::kControl, r, 2);
      if (msg.payload.size() != 1 || msg.payload[0] != mine) same = false;
    }
    ok = {same ? 1.0 : 0.0};
  } else {
    p.endpoint().send(kActiveParty, Tag::kControl, r, {mine}, 2);
  }
  ok = p.broadcast(kActiveParty, std::move(ok), Tag::kControl, 3, r);
  if (ok.size() != 1 || ok[0] != 1.0) throw ShapeError("partial trees differ in shape across parties");
}

// Shares of per-instance raw scores summed over `trees`.
inline ShareVector predict_shares(Party& p, const std::vector<const PartialTree*>& trees,
                                  const LocalMatrix& X, PredictMode mode, MulPhase phase) {
  const std::size_t N = X.rows;
  ShareVector total = p.zeros(N);
  for (const auto* t : trees) {
    const std::size_t L = t->leaves().size();
    std::vector<double> mine(N * L);
    for (std::size_t i = 0; i < N; ++i) {
      const auto ind = local_indicator(*t, X, i);
      std::copy(ind.begin(), ind.end(), mine.begin() + i * L);
    }
    std::vector<ShareVector> s;
    for (PartyId m = 1; m <= p.parties(); ++m) s.push_back(p.share(m, mine, N * L));
    const std::vector<double> w = t->leaf_weight_shares();
    if (mode == PredictMode::kBatched) {
      ShareVector prod = s[0];
      for (int m = 1; m < p.parties(); ++m) prod = p.mul(prod, s[m], phase);
      ShareVector wrep(p.id(), N * L);
      for (std::size_t i = 0; i < N; ++i) std::copy(w.begin(), w.end(), wrep.values().begin() + i * L);
      const ShareVector y = p.mul(prod, wrep, phase);
      for (std::size_t i = 0; i < N; ++i) {
        CompensatedSum acc;
        acc.add(total[i]);
        for (std::size_t l = 0; l < L; ++l) acc.add(y[i * L + l]);
        total[i] = acc.value();
      }
    } else {
      const ShareVector wv(p.id(), w);
      for (std::size_t i = 0; i < N; ++i) {
        auto row = [&](const ShareVector& v) {
          return ShareVector(p.id(), std::vector<double>(v.values().begin() + i * L,
                                                         v.values().begin() + (i + 1) * L));
        };
        ShareVector prod = row(s[0]);
        for (int m = 1; m < p.parties(); ++m) prod = p.mul(prod, row(s[m]), phase);
        const ShareVector y = p.mul(prod, wv, phase);
        CompensatedSum acc;
        acc.add(total[i]);
        for (std::size_t l = 0; l < L; ++l) acc.add(y[l]);
        total[i] = acc.value();
      }
    }
  }
  return total;
}

// Raw scores at P1 (empty at the other parties).
inline std::vector<double> secure_predict(Party& p, const std::vector<const PartialTree*>& trees,
                                          const LocalMatrix& X, PredictMode mode,
                                          MulPhase phase = MulPhase::kInference) {
  check_aligned(p, trees);
  const ShareVector y = predict_shares(p, trees, X, mode, phase);
  return p.open_to(kActiveParty, y, Tag::kPredictShare);
}

inline std::vector<double> secure_predict(Party& p, const PartialEnsemble& model,
                                          const LocalMatrix& X, PredictMode mode) {
  std::vector<const PartialTree*> trees;
  for (const auto& t : model.trees) trees.push_back(&t);
  return secure_predict(p, trees, X, mode);
}

}  // namespace mpfedxgb

#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "mpfedxgb/leaf_weight.hpp"
#include "mpfedxgb/loss.hpp"
#include "mpfedxgb/matrix.hpp"
#include "mpfedxgb/model.hpp"
#include "mpfedxgb/party.hpp"
#include "mpfedxgb/predict.hpp"
#include "mpfedxgb/quantile.hpp"
#include "mpfedxgb/split_select.hpp"

namespace mpfedxgb {

struct FeatureInfo {
  int id = -1;          // global id
  PartyId owner = 0;
  int local = -1;       // column index at the owner (known to the owner only)
  int buckets = 0;      // effective bucket count
};

// Split features of the whole session, sorted by global id.
struct FeatureCatalog {
  std::vector<FeatureInfo> features;
  std::vector<std::vector<int>> ids_by_party;

  std::vector<int> all() const {
    std::vector<int> out(features.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(i);
    return out;
  }
  std::vector<int> owned_by(PartyId m) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (features[i].owner == m) out.push_back(static_cast<int>(i));
    }
    return out;
  }
};

// Shares observed at one node, kept for tests and diagnostics.
struct NodeTrace {
  int tree = 0;
  int node = 0;
  int depth = 0;
  bool leaf = false;
  ShareVector s;
  ShareVector s_left, s_right;  // internal nodes
  ShareVector a, b, w;          // leaves
  StepPlan plan;
  int feature = -1;             // catalog position of the split
  int bucket = -1;
};

struct TrainTrace {
  std::vector<NodeTrace> nodes;
  std::vector<MulCounter> per_tree;  // counter deltas per tree, prediction update included
};

struct NodeDecision {
  bool split = false;
  int feature = -1;  // catalog position
  int bucket = -1;
};

// Session-level state shared by all nodes of all trees.
class SecureTrainer {
 public:
  SecureTrainer(Party& p, const LocalMatrix& X, const HyperParams& params,
                TrainTrace* trace = nullptr)
      : p_(p), X_(X), params_(params), trace_(trace) {
    params_.validate();
    setup();
  }

  const FeatureCatalog& catalog() const { return catalog_; }
  const std::vector<std::vector<double>>& thresholds() const { return thresholds_; }

  // Splits tested at `depth`.
  std::vector<int> candidates(int depth) const {
    if (depth == 0 && params_.first_layer_mask) return catalog_.owned_by(kActiveParty);
    return catalog_.all();
  }

  // Per-feature bucket sums of g and h: two MULs per candidate feature.
  std::pair<std::vector<ShareVector>, std::vector<ShareVector>> aggregate_buckets(
      const ShareVector& g, const ShareVector& h, const std::vector<int>& cand) {
    const std::size_t N = g.size();
    std::vector<ShareVector> gbs, hbs;
    for (int f : cand) {
      const int K = catalog_.features[f].buckets;
      ShareVector grep(p_.id(), N * K), hrep(p_.id(), N * K);
      for (std::size_t i = 0; i < N; ++i) {
        for (int k = 0; k < K; ++k) {
          grep[i * K + k] = g[i];
          hrep[i * K + k] = h[i];
        }
      }
      const ShareVector gm = p_.mul(grep, masks_[f], MulPhase::kBucketAgg);
      const ShareVector hm = p_.mul(hrep, masks_[f], MulPhase::kBucketAgg);
      std::vector<CompensatedSum> gb(K), hb(K);
      for (std::size_t i = 0; i < N; ++i) {
        for (int k = 0; k < K; ++k) {
          gb[k].add(gm[i * K + k]);
          hb[k].add(hm[i * K + k]);
        }
      }
      ShareVector gv(p_.id(), K), hv(p_.id(), K);
      for (int k = 0; k < K; ++k) {
        gv[k] = gb[k].value();
        hv[k] = hb[k].value();
      }
      gbs.push_back(std::move(gv));
      hbs.push_back(std::move(hv));
    }
    return {gbs, hbs};
  }

  // Bucket aggregation, candidate matrices, argmax and the gain test for
  // one node.
  NodeDecision evaluate_node(const ShareVector& g, const ShareVector& h,
                             const std::vector<int>& cand) {
    const ShareVector gsum(p_.id(), std::vector<double>{sum(g)});
    const ShareVector hsum(p_.id(), std::vector<double>{sum(h)});
    const ShareVector lam = p_.constant(params_.lambda);
    const auto [gbs, hbs] = aggregate_buckets(g, h, cand);

    std::vector<ShareVector> gl_parts, gr_parts, hl_parts, hr_parts;
    for (std::size_t c = 0; c < cand.size(); ++c) {
      const std::size_t K = gbs[c].size();
      ShareVector gl(p_.id(), K), hl(p_.id(), K), gr(p_.id(), K), hr(p_.id(), K);
      double gacc = 0, hacc = 0;
      for (std::size_t k = 0; k < K; ++k) {
        gacc += gbs[c][k];
        hacc += hbs[c][k];
        gl[k] = gacc;
        hl[k] = hacc + lam[0];
        gr[k] = gsum[0] - gacc;
        hr[k] = hsum[0] - hacc + lam[0];
      }
      gl_parts.push_back(gl);
      gr_parts.push_back(gr);
      hl_parts.push_back(hl);
      hr_parts.push_back(hr);
    }
    const ShareVector gl_all = concat(gl_parts, p_.id());
    const ShareVector gr_all = concat(gr_parts, p_.id());
    const ShareVector gl_sq = p_.mul(gl_all, gl_all, MulPhase::kCandidatePrep);
    const ShareVector gr_sq = p_.mul(gr_all, gr_all, MulPhase::kCandidatePrep);
    const ShareVector loss_n = p_.mul(gsum, gsum, MulPhase::kCandidatePrep);
    const ShareVector loss_d = hsum + lam;

    std::vector<CandidateStats> stats;
    int off = 0;
    for (std::size_t c = 0; c < cand.size(); ++c) {
      const int K = catalog_.features[cand[c]].buckets;
      std::vector<int> idx(K);
      for (int k = 0; k < K; ++k) idx[k] = off + k;
      stats.push_back({gather(gl_sq, idx), gather(gr_sq, idx), hl_parts[c], hr_parts[c]});
      off += K;
    }
    const bool batch = params_.counting == Counting::kFormula;
    const ArgmaxResult best = secure_argmax(p_, stats, batch, params_.tie_tolerance);
    const CandidateStats winner = gather(stats[best.feature], {best.bucket});
    const bool positive = best_gain_positive(p_, winner, loss_n, loss_d,
                                             p_.constant(params_.gamma), params_.tie_tolerance);
    return {positive, cand[best.feature], best.bucket};
  }

  PartialTree build_tree(const ShareVector& g, const ShareVector& h, const ShareVector& s,
                         int tree_index) {
    PartialTree t;
    tree_index_ = tree_index;
    build(t, g, h, s, 0);
    return t;
  }

  // Shares of 0/1 instance flags for the chosen split, dealt by its owner
  // over the full instance set.
  std::pair<ShareVector, ShareVector> share_partition(int feature, int bucket) {
    const FeatureInfo& fi = catalog_.features[feature];
    const std::size_t N = X_.rows;
    std::vector<double> left, right;
    if (fi.owner == p_.id()) {
      const double thr = thresholds_[fi.local][bucket];
      left.resize(N);
      right.resize(N);
      for (std::size_t i = 0; i < N; ++i) {
        left[i] = X_.at(i, fi.local) <= thr ? 1.0 : 0.0;
        right[i] = 1.0 - left[i];
      }
    }
    ShareVector sl = p_.share(fi.owner, left, N);
    ShareVector sr = p_.share(fi.owner, right, N);
    return {sl, sr};
  }

 private:
  void setup() {
    const std::vector<int>& gids = p_.global_ids();
    if (gids.size() != X_.width()) {
      throw TopologyError(party_name(p_.id()) + " holds " + std::to_string(X_.width()) +
                          " split columns but was issued " + std::to_string(gids.size()) + " ids");
    }
    for (std::size_t j = 0; j < X_.width(); ++j) {
      thresholds_.push_back(quantile_thresholds(X_.cols[j], params_.buckets));
    }
    catalog_.ids_by_party.resize(p_.parties());
    for (PartyId m = 1; m <= p_.parties(); ++m) {
      std::vector<double> mine;
      if (m == p_.id()) {
        for (std::size_t j = 0; j < gids.size(); ++j) {
          mine.push_back(gids[j]);
          mine.push_back(static_cast<double>(thresholds_[j].size()));
        }
      }
      const std::vector<double> got = p_.broadcast(m, mine, Tag::kSplitInfo);
      if (got.size() % 2 != 0) throw ProtocolError("feature catalog payload");
      for (std::size_t k = 0; k < got.size(); k += 2) {
        FeatureInfo fi;
        fi.id = static_cast<int>(got[k]);
        fi.owner = m;
        fi.buckets = static_cast<int>(got[k + 1]);
        if (m == p_.id()) fi.local = static_cast<int>(k / 2);
        catalog_.features.push_back(fi);
        catalog_.ids_by_party[m - 1].push_back(fi.id);
      }
    }
    std::sort(catalog_.features.begin(), catalog_.features.end(),
              [](const FeatureInfo& a, const FeatureInfo& b) { return a.id < b.id; });
    if (catalog_.features.empty()) throw ConfigError("no split features in the session");
    if (params_.first_layer_mask && catalog_.owned_by(kActiveParty).empty()) {
      throw ConfigError("first-layer mask needs at least one feature owned by P1");
    }
    const std::size_t N = X_.rows;
    for (const auto& fi : catalog_.features) {
      std::vector<double> mask;
      if (fi.owner == p_.id()) mask = bucket_mask(X_.cols[fi.local], thresholds_[fi.local]);
      masks_.push_back(p_.share(fi.owner, mask, N * fi.buckets));
    }
  }

  int build(PartialTree& t, const ShareVector& g, const ShareVector& h, const ShareVector& s,
            int depth) {
    const int idx = static_cast<int>(t.nodes.size());
    t.nodes.emplace_back();
    NodeTrace tr;
    tr.tree = tree_index_;
    tr.node = idx;
    tr.depth = depth;
    if (trace_) tr.s = s;

    std::optional<NodeDecision> d;
    if (depth < params_.max_depth) {
      d = evaluate_node(g, h, candidates(depth));
      if (!d->split) d.reset();
    }
    if (!d) {
      const ShareVector a(p_.id(), std::vector<double>{sum(h) + p_.constant(params_.lambda)[0]});
      const ShareVector b(p_.id(), std::vector<double>{sum(g)});
      LeafWeightOptions opt;
      opt.lambda = params_.lambda;
      opt.mu = params_.mu;
      opt.ratio_floor = params_.ratio_floor;
      LeafWeightResult lw = secure_leaf_weight(p_, a, b, opt);
      t.nodes[idx].kind = NodeKind::kLeaf;
      t.nodes[idx].weight_share = lw.w[0];
      if (trace_) {
        tr.leaf = true;
        tr.a = a;
        tr.b = b;
        tr.w = lw.w;
        tr.plan = lw.plan;
        trace_->nodes.push_back(std::move(tr));
      }
      return idx;
    }

    const FeatureInfo& fi = catalog_.features[d->feature];
    TreeNode& node = t.nodes[idx];
    if (fi.owner == p_.id()) {
      node.kind = NodeKind::kSplit;
      node.local_feature = fi.local;
      node.feature_id = fi.id;
      node.bucket = d->bucket;
      node.threshold = thresholds_[fi.local][d->bucket];
    } else {
      node.kind = NodeKind::kDummy;
    }

    auto [sl_raw, sr_raw] = share_partition(d->feature, d->bucket);
    const ShareVector sl = p_.mul(sl_raw, s, MulPhase::kChildPrep);
    const ShareVector sr = p_.mul(sr_raw, s, MulPhase::kChildPrep);
    const ShareVector gl = p_.mul(g, sl, MulPhase::kChildPrep);
    const ShareVector gr = p_.mul(g, sr, MulPhase::kChildPrep);
    const ShareVector hl = p_.mul(h, sl, MulPhase::kChildPrep);
    const ShareVector hr = p_.mul(h, sr, MulPhase::kChildPrep);
    if (trace_) {
      tr.s_left = sl;
      tr.s_right = sr;
      tr.feature = d->feature;
      tr.bucket = d->bucket;
      trace_->nodes.push_back(std::move(tr));
    }
    const int l = build(t, gl, hl, sl, depth + 1);
    const int r = build(t, gr, hr, sr, depth + 1);
    t.nodes[idx].left = l;
    t.nodes[idx].right = r;
    return idx;
  }

  Party& p_;
  const LocalMatrix& X_;
  HyperParams params_;
  TrainTrace* trace_;
  FeatureCatalog catalog_;
  std::vector<std::vector<double>> thresholds_;  // per local column
  std::vector<ShareVector> masks_;                // per catalog feature
  int tree_index_ = 0;
};

struct TrainOutput {
  PartialEnsemble model;
  std::vector<double> yhat;  // P1 only: training scores after the last tree
  FeatureCatalog catalog;
};

// Boosting loop run by every party; labels are read at P1 only.
inline TrainOutput secure_train(Party& p, const LocalMatrix& X, const std::vector<double>* labels,
                                const HyperParams& params, TrainTrace* trace = nullptr) {
  if (p.active() && !labels) throw RoleError("P1 must hold the labels");
  SecureTrainer trainer(p, X, params, trace);
  const std::size_t N = X.rows;
  TrainOutput out;
  out.catalog = trainer.catalog();
  out.model.owner = p.id();
  out.model.parties = p.parties();
  out.model.session_id = p.config().session_id;
  out.model.params = params;
  out.model.feature_ids = p.global_ids();
  out.model.feature_names = X.names;
  out.model.topology_hash = topology_hash(p.config().session_id, trainer.catalog().ids_by_party);
  if (p.active()) out.yhat.assign(N, 0.0);

  const PredictMode mode =
      params.counting == Counting::kFormula ? PredictMode::kPerInstance : PredictMode::kBatched;
  for (int t = 0; t < params.trees; ++t) {
    const MulCounter before = p.counter();
    std::vector<double> g, h, ones;
    if (p.active()) {
      std::tie(g, h) = compute_gradients(*labels, out.yhat, params.loss);
      ones.assign(N, 1.0);
    }
    const ShareVector gs = p.share(kActiveParty, g, N);
    const ShareVector hs = p.share(kActiveParty, h, N);
    const ShareVector ss = p.share(kActiveParty, ones, N);
    out.model.trees.push_back(trainer.build_tree(gs, hs, ss, t));
    const MulPhase ph = t + 1 < params.trees ? MulPhase::kTrainPredict : MulPhase::kReportPredict;
    const std::vector<double> yt = secure_predict(p, {&out.model.trees.back()}, X, mode, ph);
    if (p.active()) {
      for (std::size_t i = 0; i < N; ++i) out.yhat[i] += yt[i];
    }
    if (trace) trace->per_tree.push_back(p.counter() - before);
  }
  return out;
}

}  // namespace mpfedxgb

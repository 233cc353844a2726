#pragma once

#include <string>
#include <vector>

#include "mpfedxgb/dataset.hpp"
#include "mpfedxgb/oracle.hpp"
#include "mpfedxgb/predict.hpp"
#include "mpfedxgb/session.hpp"
#include "mpfedxgb/tree_build.hpp"

namespace mpfedxgb {

// Vertically partitioned view of a dataset: one split-feature block per
// party, labels at P1.
struct Federation {
  std::vector<LocalMatrix> blocks;  // blocks[m - 1] belongs to party m
  std::vector<double> labels;
  SessionTopology topology;

  std::size_t rows() const { return labels.size(); }
};

inline Federation federate(const Dataset& d, const Partition& part,
                           const std::vector<std::size_t>& rows) {
  Federation f;
  f.topology.parties = part.parties;
  for (int m = 1; m <= part.parties; ++m) {
    f.blocks.push_back(local_block(d, part, m, rows));
    f.topology.feature_counts.push_back(static_cast<int>(f.blocks.back().width()));
  }
  for (auto i : rows) f.labels.push_back(d.labels[i]);
  return f;
}

inline Federation federate(const Dataset& d, const Partition& part) {
  std::vector<std::size_t> rows(d.rows());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  return federate(d, part, rows);
}

// Plaintext columns by global id, as the coordinator's permutation lays
// them out for this seed.
inline OracleData oracle_view(const Federation& f, std::uint64_t seed) {
  const auto ids = permuted_feature_ids(f.topology, seed);
  OracleData o;
  o.cols.resize(f.topology.total_features());
  o.owner.resize(o.cols.size());
  for (int m = 0; m < f.topology.parties; ++m) {
    for (std::size_t j = 0; j < ids[m].size(); ++j) {
      o.cols[ids[m][j]] = f.blocks[m].cols[j];
      o.owner[ids[m][j]] = static_cast<PartyId>(m + 1);
    }
  }
  return o;
}

inline SessionResult<TrainOutput> train_federated(const SessionConfig& cfg, const Federation& f,
                                                  const HyperParams& params,
                                                  std::vector<TrainTrace>* traces = nullptr) {
  if (traces) traces->assign(f.topology.parties, {});
  return run_session(cfg, f.topology, [&](Party& p) {
    TrainTrace* tr = traces ? &(*traces)[p.id() - 1] : nullptr;
    return secure_train(p, f.blocks[p.id() - 1], p.active() ? &f.labels : nullptr, params, tr);
  });
}

// Scores at P1 for the rows of `f` under the parties' partial models.
inline std::vector<double> predict_federated(const SessionConfig& cfg, const Federation& f,
                                             const std::vector<PartialEnsemble>& models,
                                             PredictMode mode = PredictMode::kBatched) {
  check_model_set(models);
  auto res = run_session(cfg, f.topology, [&](Party& p) {
    return secure_predict(p, models[p.id() - 1], f.blocks[p.id() - 1], mode);
  });
  return res.outputs[0];
}

// Joins partial trees into one plaintext tree: split details from the
// owner, leaf weights summed over parties.
inline OracleModel join_partial_models(const std::vector<PartialEnsemble>& models) {
  check_model_set(models);
  OracleModel out;
  for (std::size_t t = 0; t < models[0].trees.size(); ++t) {
    OracleTree tree;
    const std::size_t n = models[0].trees[t].nodes.size();
    for (const auto& m : models) {
      if (m.trees[t].nodes.size() != n) throw ShapeError("partial trees differ in size");
    }
    for (std::size_t i = 0; i < n; ++i) {
      OracleNode node;
      const TreeNode& first = models[0].trees[t].nodes[i];
      node.left = first.left;
      node.right = first.right;
      if (first.kind == NodeKind::kLeaf) {
        CompensatedSum w;
        for (const auto& m : models) w.add(m.trees[t].nodes[i].weight_share);
        node.leaf = true;
        node.weight = w.value();
      } else {
        node.leaf = false;
        int owners = 0;
        for (const auto& m : models) {
          const TreeNode& x = m.trees[t].nodes[i];
          if (x.kind == NodeKind::kSplit) {
            ++owners;
            node.feature_id = x.feature_id;
            node.bucket = x.bucket;
            node.threshold = x.threshold;
          }
        }
        if (owners != 1) throw ShapeError("split node without a unique owner");
      }
      tree.nodes.push_back(node);
    }
    out.trees.push_back(std::move(tree));
  }
  return out;
}

// Empty when the structures agree, else a description of the first
// difference.
inline std::string structure_diff(const OracleModel& a, const OracleModel& b) {
  if (a.trees.size() != b.trees.size()) return "tree count differs";
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    const auto& x = a.trees[t].nodes;
    const auto& y = b.trees[t].nodes;
    if (x.size() != y.size()) {
      return "tree " + std::to_string(t) + ": " + std::to_string(x.size()) + " vs " +
             std::to_string(y.size()) + " nodes";
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto& u = x[i];
      const auto& v = y[i];
      const std::string at = "tree " + std::to_string(t) + " node " + std::to_string(i);
      if (u.leaf != v.leaf) return at + ": leaf/split mismatch";
      if (u.left != v.left || u.right != v.right) return at + ": children differ";
      if (u.leaf) continue;
      if (u.feature_id != v.feature_id) {
        return at + ": feature " + std::to_string(u.feature_id) + " vs " + std::to_string(v.feature_id);
      }
      if (u.bucket != v.bucket) {
        return at + ": bucket " + std::to_string(u.bucket) + " vs " + std::to_string(v.bucket);
      }
      if (u.threshold != v.threshold) return at + ": threshold differs";
    }
  }
  return {};
}

}  // namespace mpfedxgb

#pragma once

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mpfedxgb/config.hpp"
#include "mpfedxgb/dataset.hpp"
#include "mpfedxgb/div_newton.hpp"
#include "mpfedxgb/federation.hpp"

namespace mpfedxgb {

// Split-phase MULs of one internal node: bucket aggregation, argmax, gain
// sign and child indicators.
inline long long node_split_muls(long long J, long long K) {
  return 2 * J + division_free_argmax_muls(J, K) + 8 + 6;
}

// Whole-run cost with complete trees and per-instance training prediction:
//   e (2^d - 1)(2J + 9J ceil(log2 K) + 9 ceil(log2 J) + 14) + M N (e - 1)
inline long long pipeline_muls(long long e, int d, long long J, long long K, long long M,
                               long long N) {
  return e * ((1LL << d) - 1) * node_split_muls(J, K) + M * N * (e - 1);
}

struct TableRow {
  long long J, K, division_free, division_based;
};

inline std::vector<TableRow> argmax_cost_table(int newton_iterations = 20) {
  std::vector<TableRow> rows;
  for (auto [J, K] : {std::pair{16LL, 8LL}, {16LL, 16LL}, {32LL, 16LL}}) {
    rows.push_back({J, K, division_free_argmax_muls(J, K), argmax_via_div_muls(J, K, newton_iterations)});
  }
  return rows;
}

struct BenchPoint {
  int trees = 0, depth = 0, features = 0, parties = 0;
  std::size_t rows = 0;
  int buckets = 0;
  int internal_nodes = 0;
  int leaves = 0;
  bool complete = false;  // every tree has 2^d - 1 internal nodes
  std::vector<std::uint64_t> split_per_tree;
  std::uint64_t split_total = 0;
  std::uint64_t train_predict = 0;
  std::uint64_t total = 0;
  long long formula = 0;
  double seconds = 0;
};

// One training run in formula counting mode. Squared loss on a continuous
// target with gamma = 0 keeps nodes splitting down to full depth.
inline BenchPoint bench_point(std::size_t N, int J, int M, int T, int d, int K, std::uint64_t seed,
                              Backend backend = Backend::kInProcess) {
  Dataset data = make_synthetic(N, J, seed, true);
  std::vector<double> frac(M, 1.0);
  Partition part = partition_by_fraction(data, frac);
  Federation f = federate(data, part);
  HyperParams hp;
  hp.trees = T;
  hp.max_depth = d;
  hp.buckets = K;
  hp.gamma = 0.0;
  hp.loss = Loss::kMse;
  hp.counting = Counting::kFormula;
  SessionConfig cfg;
  cfg.parties = M;
  cfg.seed = seed;
  cfg.backend = backend;
  cfg.record_transcripts = false;
  std::vector<TrainTrace> traces;
  auto res = train_federated(cfg, f, hp, &traces);

  BenchPoint b;
  b.trees = T;
  b.depth = d;
  b.features = J;
  b.parties = M;
  b.rows = N;
  b.buckets = K;
  b.seconds = res.seconds;
  b.complete = true;
  for (const auto& t : res.outputs[0].model.trees) {
    const int leaves = static_cast<int>(t.leaves().size());
    b.leaves += leaves;
    b.internal_nodes += static_cast<int>(t.nodes.size()) - leaves;
    if (static_cast<int>(t.nodes.size()) - leaves != (1 << d) - 1) b.complete = false;
  }
  for (const auto& c : traces[0].per_tree) b.split_per_tree.push_back(c.split_phase());
  const MulCounter& c = res.counters[0];
  b.split_total = c.split_phase();
  b.train_predict = c.count(MulPhase::kTrainPredict);
  b.total = c.total();
  b.formula = pipeline_muls(T, d, J, K, M, static_cast<long long>(N));
  return b;
}

inline json to_json(const BenchPoint& b) {
  return json{{"trees", b.trees},
              {"depth", b.depth},
              {"features", b.features},
              {"parties", b.parties},
              {"rows", b.rows},
              {"buckets", b.buckets},
              {"internal_nodes", b.internal_nodes},
              {"leaves", b.leaves},
              {"complete", b.complete},
              {"split_per_tree", b.split_per_tree},
              {"split_total", b.split_total},
              {"train_predict", b.train_predict},
              {"measured", b.split_total + b.train_predict},
              {"formula", b.formula},
              {"total_muls", b.total},
              {"seconds", b.seconds}};
}

struct BenchGrid {
  std::size_t rows = 400;
  int parties = 3;
  int buckets = 8;
  std::uint64_t seed = 1;
  std::vector<int> trees{1, 2, 3};
  std::vector<int> depths{2, 3, 4};
  std::vector<int> features{10, 50, 100};
  std::vector<std::size_t> sizes{200, 400, 800};
  int base_trees = 2;
  int base_depth = 3;
  int base_features = 8;
};

// Scaling checks over the complete-tree points of a sweep report.
inline json bench_checks(const json& b) {
  auto complete = [](const json& p) { return p["complete"].get<bool>(); };
  bool all_complete = true, formula = true;
  for (const char* s : {"trees", "depth", "features", "rows"}) {
    for (const auto& p : b[s]) {
      all_complete = all_complete && complete(p);
      if (complete(p)) formula = formula && p["measured"].get<long long>() == p["formula"].get<long long>();
    }
  }
  bool per_tree = true;
  std::optional<double> ref;
  for (const auto& p : b["trees"]) {
    if (!complete(p)) continue;
    for (const auto& c : p["split_per_tree"]) {
      const double v = c.get<double>();
      if (!ref) ref = v;
      per_tree = per_tree && std::abs(v - *ref) <= 0.01 * *ref;
    }
  }
  bool depth = true;
  std::optional<std::uint64_t> unit;
  for (const auto& p : b["depth"]) {
    if (!complete(p)) continue;
    const std::uint64_t nodes = (1ULL << p["depth"].get<int>()) - 1;
    for (const auto& c : p["split_per_tree"]) {
      const auto v = c.get<std::uint64_t>();
      if (v % nodes != 0) depth = false;
      if (!unit) unit = v / nodes;
      depth = depth && v == *unit * nodes;
    }
  }
  return json{{"all_points_complete", all_complete},
              {"measured_equals_formula", formula},
              {"per_tree_constant_in_T", per_tree},
              {"proportional_to_nodes_in_d", depth}};
}

// Sweeps T, d, J and N around the base point.
inline json run_bench(const BenchGrid& g) {
  json out;
  auto sweep = [&](const char* name, auto values, auto make) {
    json arr = json::array();
    for (auto v : values) arr.push_back(to_json(make(v)));
    out[name] = arr;
  };
  sweep("trees", g.trees, [&](int T) {
    return bench_point(g.rows, g.base_features, g.parties, T, g.base_depth, g.buckets, g.seed);
  });
  sweep("depth", g.depths, [&](int d) {
    return bench_point(g.rows, g.base_features, g.parties, g.base_trees, d, g.buckets, g.seed);
  });
  sweep("features", g.features, [&](int J) {
    return bench_point(g.rows, J, g.parties, g.base_trees, g.base_depth, g.buckets, g.seed);
  });
  sweep("rows", g.sizes, [&](std::size_t N) {
    return bench_point(N, g.base_features, g.parties, g.base_trees, g.base_depth, g.buckets, g.seed);
  });
  json table = json::array();
  for (const auto& r : argmax_cost_table()) {
    table.push_back({{"J", r.J}, {"K", r.K}, {"division_free", r.division_free},
                     {"division_based", r.division_based}});
  }
  out["argmax_cost"] = table;
  out["checks"] = bench_checks(out);
  return out;
}

}  // namespace mpfedxgb

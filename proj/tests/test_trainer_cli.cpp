#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "helpers.hpp"

using namespace mpfedxgb;
using testing_util::config;
namespace fs = std::filesystem;

namespace {

RawTable table(const std::string& text) {
  std::istringstream in(text);
  return parse_csv(in);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mpfedxgb_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Federation synthetic(std::size_t N, int J, int M, std::uint64_t seed, bool regression = false) {
  const Dataset d = make_synthetic(N, J, seed, regression);
  return federate(d, partition_by_fraction(d, std::vector<double>(M, 1.0 / M)));
}

std::vector<PartialEnsemble> models_of(const SessionResult<TrainOutput>& r) {
  std::vector<PartialEnsemble> out;
  for (const auto& o : r.outputs) out.push_back(o.model);
  return out;
}

std::string error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace

// ---------------------------------------------------------------------------
// ingestion

TEST(Ingest, ToyCsvHalfPlanGivesOneFeatureEach) {
  const Dataset d = ingest(table("a,b,label\n1,2,0\n3,4,1\n5,6,0\n7,8,1\n"), "label");
  EXPECT_EQ(d.rows(), 4u);
  EXPECT_EQ(d.labels, (std::vector<double>{0, 1, 0, 1}));
  const Partition p = partition_by_fraction(d, {0.5, 0.5});
  EXPECT_EQ(p.owner, (std::vector<int>{1, 2}));
  EXPECT_EQ(p.feature_counts(), (std::vector<int>{1, 1}));
  const LocalMatrix X2 = local_block(d, p, 2, {0, 1, 2, 3});
  EXPECT_EQ(X2.names, (std::vector<std::string>{"b"}));
  EXPECT_EQ(X2.cols[0], (std::vector<double>{2, 4, 6, 8}));
}

TEST(Ingest, MinMaxScaling) {
  std::vector<std::vector<double>> cols{{1, 5, 9}, {3, 3, 3}};
  apply_minmax(cols, fit_minmax(cols));
  EXPECT_EQ(cols[0], (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(cols[1], (std::vector<double>{0, 0, 0}));
}

TEST(Ingest, CategoricalOneHotStaysWithItsParty) {
  const Dataset d =
      ingest(table("x,color,z,y\n1,red,0,1\n2,blue,1,0\n3,green,0,1\n4,red,1,0\n"), "y", {"color"});
  EXPECT_EQ(d.names, (std::vector<std::string>{"x", "color=red", "color=blue", "color=green", "z"}));
  EXPECT_EQ(d.cols[1], (std::vector<double>{1, 0, 0, 1}));
  const Partition p = partition_by_map(d, 2, {{1, {"x", "z"}}, {2, {"color"}}});
  EXPECT_EQ(p.owner, (std::vector<int>{1, 2, 2, 2, 1}));
  const Partition q = partition_by_fraction(d, {0.6, 0.4});
  EXPECT_EQ(q.owner[1], q.owner[2]);
  EXPECT_EQ(q.owner[2], q.owner[3]);
}

TEST(Ingest, MissingValuesListRows) {
  const std::string msg = error_of([] { ingest(table("a,b,y\n1,2,0\n,4,1\n5,6,0\n7,NA,1\n"), "y"); });
  EXPECT_NE(msg.find("2 rows"), std::string::npos) << msg;
  EXPECT_NE(msg.find("2,4"), std::string::npos) << msg;
  EXPECT_THROW(ingest(table("a,y\n?,1\n"), "y"), DataError);
}

TEST(Ingest, LabelColumnAbsent) {
  EXPECT_THROW(ingest(table("a,b\n1,2\n"), "label"), DataError);
  const Dataset d = ingest(table("a,b\n1,2\n3,4\n"), "label", {}, true);
  EXPECT_TRUE(d.labels.empty());
  EXPECT_EQ(d.rows(), 2u);
}

TEST(Ingest, TextLabelsMapToSortedLevels) {
  const Dataset d = ingest(table("a,y\n1,>50K\n2,<=50K\n3,>50K\n"), "y");
  EXPECT_EQ(d.labels, (std::vector<double>{1, 0, 1}));
  EXPECT_THROW(ingest(table("a,y\n1,a\n2,b\n3,c\n"), "y"), DataError);
}

TEST(Ingest, QuotedFieldsAndRaggedRows) {
  const Dataset d = ingest(table("\"a,1\",y\n\"2.5\",1\n3,0\n"), "y");
  EXPECT_EQ(d.names[0], "a,1");
  EXPECT_EQ(d.cols[0], (std::vector<double>{2.5, 3}));
  EXPECT_THROW(table("a,b\n1\n"), DataError);
}

TEST(Ingest, StratifiedSplitKeepsClassRatio) {
  std::vector<double> y;
  for (int i = 0; i < 1000; ++i) y.push_back(i % 10 < 3 ? 1.0 : 0.0);
  const auto [train, test] = stratified_split(y, 0.2, 3);
  EXPECT_EQ(train.size() + test.size(), 1000u);
  auto ratio = [&](const std::vector<std::size_t>& idx) {
    double pos = 0;
    for (auto i : idx) pos += y[i];
    return pos / idx.size();
  };
  EXPECT_NEAR(ratio(train), 0.3, 0.01);
  EXPECT_NEAR(ratio(test), 0.3, 0.01);
  EXPECT_EQ(stratified_split(y, 0.2, 3), stratified_split(y, 0.2, 3));
  EXPECT_NE(stratified_split(y, 0.2, 3).second, stratified_split(y, 0.2, 4).second);
}

TEST(Ingest, FeatureMapErrors) {
  const Dataset d = ingest(table("a,b,c,y\n1,2,3,0\n"), "y");
  EXPECT_THROW(partition_by_map(d, 2, {{1, {"a"}}, {2, {"b"}}}), ConfigError);
  EXPECT_THROW(partition_by_map(d, 2, {{1, {"a", "b", "c"}}}), ConfigError);
  EXPECT_THROW(partition_by_map(d, 2, {{1, {"a", "zz"}}, {2, {"b", "c"}}}), ConfigError);
  EXPECT_THROW(partition_by_map(d, 2, {{3, {"a"}}, {2, {"b", "c"}}}), TopologyError);
  // overlap: the lower party owns the column for splitting
  const Partition p = partition_by_map(d, 2, {{1, {"a", "b"}}, {2, {"b", "c"}}});
  EXPECT_EQ(p.owner, (std::vector<int>{1, 1, 2}));
  EXPECT_EQ(p.holders[1], (std::vector<int>{1, 2}));
}

TEST(Ingest, DefaultFourPartyPlan) {
  RunConfig c;
  Dataset d = make_synthetic(50, 10, 1);
  c.data.test_fraction = 0;
  const Prepared p = prepare(c, d);
  EXPECT_EQ(p.partition.feature_counts(), (std::vector<int>{1, 2, 3, 4}));
  for (const auto& col : p.data.cols) {
    EXPECT_DOUBLE_EQ(*std::min_element(col.begin(), col.end()), 0.0);
    EXPECT_DOUBLE_EQ(*std::max_element(col.begin(), col.end()), 1.0);
  }
  c.data.plan = {0.5, 0.5};
  EXPECT_THROW(prepare(c, d), ConfigError);
}

TEST(Ingest, ScalingFittedOnTrainingRowsOnly) {
  RunConfig c;
  c.session.parties = 2;
  c.data.test_fraction = 0.25;
  Dataset d = make_synthetic(40, 2, 2);
  const Prepared p = prepare(c, d);
  EXPECT_EQ(p.test_rows.size(), 10u);
  for (const auto& col : p.data.cols) {
    double lo = 1e300, hi = -1e300;
    for (auto i : p.train_rows) {
      lo = std::min(lo, col[i]);
      hi = std::max(hi, col[i]);
    }
    EXPECT_DOUBLE_EQ(lo, 0.0);
    EXPECT_DOUBLE_EQ(hi, 1.0);
  }
}

// ---------------------------------------------------------------------------
// metrics

TEST(Metrics, PerfectPredictions) {
  const Metrics m = evaluate({1, 0, 1, 0}, {3, -3, 2, -1}, Loss::kLogloss);
  EXPECT_EQ(m.accuracy, 1.0);
  EXPECT_EQ(m.f1, 1.0);
  EXPECT_EQ(*m.auc, 1.0);
}

TEST(Metrics, EqualScoresGiveHalf) { EXPECT_EQ(*auc_score({1, 0, 1, 0, 0}, {0.3, 0.3, 0.3, 0.3, 0.3}), 0.5); }

TEST(Metrics, SixPointCase) {
  const std::vector<double> y{1, 1, 1, 0, 0, 0}, s{.9, .8, .4, .7, .3, .2};
  EXPECT_NEAR(*auc_score(y, s), *auc_pairs(y, s), 1e-12);
  EXPECT_NEAR(*auc_score(y, s), 8.0 / 9.0, 1e-12);
}

TEST(Metrics, SingleClassAucAbsent) {
  EXPECT_FALSE(auc_score({1, 1, 1}, {0.1, 0.5, 0.9}).has_value());
  EXPECT_FALSE(evaluate({0, 0}, {0.1, -0.1}, Loss::kLogloss).auc.has_value());
}

TEST(Metrics, RankAucMatchesPairCountWithTies) {
  Rng rng(17);
  for (int rep = 0; rep < 200; ++rep) {
    const int n = static_cast<int>(rng.integer(2, 60));
    std::vector<double> y(n), s(n);
    for (int i = 0; i < n; ++i) {
      y[i] = static_cast<double>(rng.integer(0, 1));
      s[i] = static_cast<double>(rng.integer(0, 6)) / 6.0;
    }
    const auto a = auc_score(y, s), b = auc_pairs(y, s);
    ASSERT_EQ(a.has_value(), b.has_value());
    if (a) EXPECT_NEAR(*a, *b, 1e-12);
  }
}

TEST(Metrics, ThresholdAndF1) {
  // probabilities .73, .27, .62, .38 -> predictions 1, 0, 1, 0
  const Metrics m = evaluate({1, 1, 0, 0}, {1.0, -1.0, 0.5, -0.5}, Loss::kLogloss);
  EXPECT_DOUBLE_EQ(m.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(m.f1, 0.5);
}

// ---------------------------------------------------------------------------
// oracle

TEST(Oracle, PureNodeIsLeafWithNewtonWeight) {
  OracleData od;
  od.cols = {{0.1, 0.4, 0.2, 0.9}};
  od.owner = {1};
  HyperParams hp;
  hp.trees = 1;
  OracleTrainer ot(od, hp);
  const std::vector<double> g(4, -0.5), h(4, 0.25);
  const OracleTree t = ot.fit_tree(g, h);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_TRUE(t.nodes[0].leaf);
  EXPECT_DOUBLE_EQ(t.nodes[0].weight, 2.0 / 2.0);
}

TEST(Oracle, SeparableSingleSplit) {
  OracleData od;
  std::vector<double> x, y;
  for (int i = 0; i < 12; ++i) {
    x.push_back(i * 0.5);
    y.push_back(i < 6 ? 0.0 : 1.0);
  }
  od.cols = {x};
  od.owner = {1};
  HyperParams hp;
  hp.trees = 1;
  hp.max_depth = 1;
  hp.buckets = 12;
  OracleTrainer ot(od, hp);
  ot.train(y);
  const auto& n = ot.model().trees[0].nodes;
  ASSERT_EQ(n.size(), 3u);
  EXPECT_DOUBLE_EQ(n[0].threshold, 2.5);
  EXPECT_NEAR(n[1].weight, -3.0 / 2.5, 1e-12);
  EXPECT_NEAR(n[2].weight, 3.0 / 2.5, 1e-12);
}

TEST(Oracle, GammaBlocksWeakSplit) {
  OracleData od;
  od.cols = {{0, 1, 2, 3}};
  od.owner = {1};
  HyperParams hp;
  hp.max_depth = 1;
  hp.buckets = 4;
  hp.gamma = 100;
  OracleTrainer ot(od, hp);
  const OracleTree t = ot.fit_tree({-1, -1, 1, 1}, {0.25, 0.25, 0.25, 0.25});
  EXPECT_EQ(t.nodes.size(), 1u);
}

// ---------------------------------------------------------------------------
// models on disk

TEST(Models, SaveLoadPredictBitIdentical) {
  const Federation f = synthetic(120, 6, 3, 41);
  HyperParams hp;
  hp.trees = 2;
  const auto models = models_of(train_federated(config(3, 41), f, hp));
  const fs::path dir = scratch("roundtrip");
  save_models(dir.string(), models);
  const auto loaded = load_models(dir.string(), 3);
  for (std::size_t m = 0; m < 3; ++m) EXPECT_EQ(to_json(loaded[m]), to_json(models[m]));
  const auto a = predict_federated(config(3, 5), f, models);
  const auto b = predict_federated(config(3, 5), f, loaded);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a[i], b[i]);
  fs::remove_all(dir);
}

TEST(Models, MissingPartyFileNamed) {
  const Federation f = synthetic(60, 6, 3, 42);
  HyperParams hp;
  hp.trees = 1;
  const auto models = models_of(train_federated(config(3, 42), f, hp));
  const fs::path dir = scratch("missing");
  save_models(dir.string(), models);
  fs::remove(dir / model_file_name(2));
  const std::string msg = error_of([&] { load_models(dir.string(), 3); });
  EXPECT_NE(msg.find("P2"), std::string::npos) << msg;
  fs::remove(dir / model_file_name(1));
  EXPECT_NE(error_of([&] { load_model_dir(dir.string()); }).find("P1"), std::string::npos);
  fs::remove_all(dir);
}

TEST(Models, FilesFromTwoSessionsRejected) {
  const Federation f = synthetic(60, 6, 2, 43);
  HyperParams hp;
  hp.trees = 1;
  SessionConfig c1 = config(2, 43), c2 = config(2, 44);
  c2.session_id = 99;
  const auto a = models_of(train_federated(c1, f, hp));
  const auto b = models_of(train_federated(c2, f, hp));
  const std::string msg = error_of([&] { check_model_set({a[0], b[1]}); });
  EXPECT_NE(msg.find("topology hash mismatch"), std::string::npos) << msg;
  const fs::path dir = scratch("mixed");
  save_models(dir.string(), {a[0], b[1]});
  EXPECT_THROW(load_models(dir.string(), 2), ShapeError);
  fs::remove_all(dir);
}

TEST(Models, MalformedFileRejected) {
  json j = to_json(PartialEnsemble{});
  j["format"] = "other";
  EXPECT_THROW(ensemble_from_json(j), ConfigError);
  json t{{"nodes", json::array({json{{"kind", "split"}, {"local_feature", 0}, {"feature_id", 0},
                                     {"bucket", 0}, {"threshold", 0.5}}})}};
  EXPECT_THROW(tree_from_json(t), ShapeError);
}

// ---------------------------------------------------------------------------
// determinism and config

TEST(Determinism, SameSeedSameEverything) {
  const Federation f = synthetic(100, 6, 3, 45);
  HyperParams hp;
  hp.trees = 2;
  const auto a = train_federated(config(3, 45), f, hp);
  const auto b = train_federated(config(3, 45), f, hp);
  for (std::size_t m = 0; m < 3; ++m) EXPECT_EQ(to_json(a.outputs[m].model), to_json(b.outputs[m].model));
  for (std::size_t i = 0; i < f.rows(); ++i) EXPECT_EQ(a.outputs[0].yhat[i], b.outputs[0].yhat[i]);
  EXPECT_EQ(to_json(a.counters[0]), to_json(b.counters[0]));
  ASSERT_EQ(a.transcripts.size(), b.transcripts.size());
  for (std::size_t p = 0; p < a.transcripts.size(); ++p) {
    EXPECT_EQ(a.transcripts[p].serialize(), b.transcripts[p].serialize());
  }
  const auto c = train_federated(config(3, 46), f, hp);
  EXPECT_NE(a.transcripts[1].serialize(), c.transcripts[1].serialize());
}

TEST(Config, MergeAndOverride) {
  RunConfig c;
  merge(c, json::parse(R"({"session": {"parties": 3, "seed": 9},
                           "params": {"trees": 5, "loss": "mse", "first_layer_mask": true},
                           "data": {"path": "x.csv", "plan": [0.2, 0.3, 0.5],
                                    "feature_map": {"1": ["a"], "2": ["b", "c"]}},
                           "out_dir": "o"})"));
  EXPECT_EQ(c.session.parties, 3);
  EXPECT_EQ(c.session.seed, 9u);
  EXPECT_EQ(c.params.trees, 5);
  EXPECT_EQ(c.params.loss, Loss::kMse);
  EXPECT_TRUE(c.params.first_layer_mask);
  EXPECT_EQ(c.params.max_depth, 3);
  EXPECT_EQ(c.data.plan.size(), 3u);
  EXPECT_EQ(c.data.feature_map.at(2), (std::vector<std::string>{"b", "c"}));
  merge(c, json::parse(R"({"params": {"trees": 1}})"));
  EXPECT_EQ(c.params.trees, 1);
  EXPECT_EQ(c.params.loss, Loss::kMse);

  RunConfig back;
  merge(back, to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));

  EXPECT_THROW(merge(c, json::parse(R"({"params": {"tres": 1}})")), ConfigError);
  EXPECT_THROW(merge(c, json::parse(R"({"params": {"loss": "hinge"}})")), ConfigError);
  EXPECT_THROW(merge(c, json::parse(R"({"params": {"trees": "many"}})")), ConfigError);
  HyperParams bad;
  bad.lambda = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

// ---------------------------------------------------------------------------
// bench

TEST(Bench, PerTreeCountConstantAcrossTrees) {
  std::vector<std::uint64_t> per;
  for (int T : {1, 2, 3}) {
    const BenchPoint b = bench_point(400, 4, 2, T, 2, 8, 3);
    ASSERT_TRUE(b.complete);
    EXPECT_EQ(b.split_total + b.train_predict, static_cast<std::uint64_t>(b.formula));
    for (auto v : b.split_per_tree) per.push_back(v);
  }
  for (auto v : per) EXPECT_NEAR(static_cast<double>(v), static_cast<double>(per[0]), 0.01 * per[0]);
}

TEST(Bench, DepthProportionalToInternalNodes) {
  std::optional<std::uint64_t> unit;
  for (int d : {2, 3, 4}) {
    const BenchPoint b = bench_point(400, 8, 2, 1, d, 8, 1);
    ASSERT_TRUE(b.complete) << d;
    const std::uint64_t nodes = (1u << d) - 1;
    ASSERT_EQ(b.split_per_tree[0] % nodes, 0u);
    if (!unit) unit = b.split_per_tree[0] / nodes;
    EXPECT_EQ(b.split_per_tree[0], *unit * nodes);
    EXPECT_EQ(static_cast<long long>(*unit), node_split_muls(8, 8));
  }
}

TEST(Bench, FeaturesFollowFormula) {
  for (int J : {4, 10, 20}) {
    const BenchPoint b = bench_point(300, J, 3, 2, 2, 8, 5);
    ASSERT_TRUE(b.complete) << J;
    EXPECT_EQ(static_cast<long long>(b.split_total + b.train_predict), b.formula) << J;
    EXPECT_EQ(static_cast<long long>(b.split_per_tree[0]), 3 * node_split_muls(J, 8));
  }
}

TEST(Bench, ReportAndChecks) {
  BenchGrid g;
  g.rows = 300;
  g.trees = {1, 2};
  g.depths = {2, 3};
  g.features = {4, 6};
  g.sizes = {300};
  g.base_trees = 1;
  g.base_depth = 2;
  g.base_features = 4;
  const json b = run_bench(g);
  for (const char* k : {"trees", "depth", "features", "rows", "argmax_cost", "checks"}) {
    EXPECT_TRUE(b.contains(k)) << k;
  }
  for (auto it = b["checks"].begin(); it != b["checks"].end(); ++it) EXPECT_TRUE(it.value().get<bool>()) << it.key();
  EXPECT_EQ(b["argmax_cost"][0]["division_free"], 468);
  const std::string text = bench_table(b);
  EXPECT_NE(text.find("sweep: depth"), std::string::npos);
  EXPECT_NE(text.find("10496"), std::string::npos);
}

// ---------------------------------------------------------------------------
// pipeline and losslessness

TEST(Pipeline, TrainSavePredictFromFiles) {
  const fs::path dir = scratch("pipeline");
  const Dataset raw = make_synthetic(300, 6, 51);
  write_csv((dir / "data.csv").string(), raw);
  RunConfig c;
  c.session.parties = 3;
  c.session.seed = 51;
  c.params.trees = 2;
  c.data.path = (dir / "data.csv").string();
  c.out_dir = (dir / "out").string();
  const Prepared p = prepare(c);
  const TrainRun r = train_pipeline(c, p, true, true);
  ASSERT_TRUE(r.report.oracle.has_value());
  EXPECT_EQ(r.report.oracle->structure, "");
  EXPECT_LE(r.report.oracle->max_abs, 1e-6);
  EXPECT_TRUE(r.report.audit->violations.empty());
  EXPECT_EQ(r.test_scores.size(), p.test_rows.size());
  const json rep = r.report.to_json();
  for (const char* part : {"train", "test"}) {
    for (const char* k : {"accuracy", "f1", "auc"}) {
      const double v = rep[part][k].get<double>();
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  save_run(c.out_dir, c, p, r);
  for (const char* f : {"party1.model.json", "party3.scaling.json", "report.json", "train_predictions.csv",
                        "test_predictions.csv", "config.json"}) {
    EXPECT_TRUE(fs::exists(fs::path(c.out_dir) / f)) << f;
  }

  // scoring the raw CSV from files reproduces the in-memory scores
  const auto models = load_model_dir(c.out_dir);
  const auto scales = load_scales(c.out_dir, 3);
  const Dataset again = ingest(read_csv(c.data.path), "label");
  const Federation f = federate_for_models(again, models, scales);
  const auto scores = predict_federated(config(3), f, models);
  for (std::size_t k = 0; k < p.test_rows.size(); ++k) {
    EXPECT_NEAR(scores[p.test_rows[k]], r.test_scores[k], 1e-6);
  }
  const PredictionFile pf = read_predictions((fs::path(c.out_dir) / "test_predictions.csv").string());
  EXPECT_EQ(pf.scores, r.test_scores);
  EXPECT_EQ(pf.labels, r.test_labels);
  fs::remove_all(dir);
}

TEST(Losslessness, SeededMatrix) {
  struct Case {
    int M, T, d;
    std::size_t N;
    bool mse;
  };
  const std::vector<Case> cases{{2, 3, 4, 2000, false}, {3, 3, 3, 500, false}, {4, 3, 2, 300, false},
                                {4, 1, 4, 1000, false}, {2, 2, 3, 400, true},  {3, 1, 1, 200, false}};
  for (const auto& cs : cases) {
    const std::uint64_t seed = 60 + cs.M * 7 + cs.T;
    const Federation f = synthetic(cs.N, 8, cs.M, seed, cs.mse);
    HyperParams hp;
    hp.trees = cs.T;
    hp.max_depth = cs.d;
    if (cs.mse) hp.loss = Loss::kMse;
    auto res = train_federated(config(cs.M, seed), f, hp);
    const OracleData od = oracle_view(f, seed);
    OracleTrainer ot(od, hp);
    std::vector<double> want;
    ot.train(f.labels, &want);
    const OracleDelta d = compare_scores(res.outputs[0].yhat, want);
    EXPECT_LE(d.max_abs, 1e-6) << "M=" << cs.M << " T=" << cs.T << " d=" << cs.d << " N=" << cs.N;
    EXPECT_EQ(structure_diff(join_partial_models(models_of(res)), ot.model()), "")
        << "M=" << cs.M << " T=" << cs.T << " d=" << cs.d << " N=" << cs.N;
  }
}

// ---------------------------------------------------------------------------
// command line

namespace {

int run_cli(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(MPFEDXGB_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Cli, EndToEnd) {
  const fs::path dir = scratch("cli");
  const fs::path log = dir / "log.txt";
  const std::string data = (dir / "d.csv").string();
  const std::string out = (dir / "run").string();
  ASSERT_EQ(run_cli("synth --rows 300 --features 6 --seed 3 -o " + data, log), 0) << slurp(log);

  const json cfg{{"session", {{"parties", 3}, {"seed", 3}}},
                 {"params", {{"trees", 2}, {"max_depth", 3}}},
                 {"data", {{"path", data}, {"test_fraction", 0.25}}},
                 {"out_dir", out}};
  write_json_file((dir / "cfg.json").string(), cfg);
  ASSERT_EQ(run_cli("train -c " + (dir / "cfg.json").string() + " --oracle --audit", log), 0) << slurp(log);
  EXPECT_NE(slurp(log).find("structure identical"), std::string::npos) << slurp(log);
  const json rep = read_json_file((fs::path(out) / "report.json").string());
  EXPECT_TRUE(rep["oracle"]["structure_match"].get<bool>());
  EXPECT_LE(rep["oracle"]["max_abs_delta"].get<double>(), 1e-6);
  EXPECT_TRUE(rep["audit"]["violations"].empty());
  EXPECT_EQ(rep["train"].size(), 4u);

  const std::string preds = (dir / "p.csv").string();
  ASSERT_EQ(run_cli("predict -m " + out + " --data " + data + " -o " + preds, log), 0) << slurp(log);
  EXPECT_EQ(read_predictions(preds).scores.size(), 300u);
  ASSERT_EQ(run_cli("eval " + preds, log), 0) << slurp(log);
  EXPECT_NE(slurp(log).find("\"auc\""), std::string::npos);

  EXPECT_EQ(run_cli("oracle -c " + (dir / "cfg.json").string() + " -o " + (dir / "orc").string() +
                        " --compare " + out,
                    log),
            0)
      << slurp(log);
  EXPECT_TRUE(fs::exists(dir / "orc" / "oracle_trees.json"));
  EXPECT_EQ(run_cli("audit -c " + (dir / "cfg.json").string(), log), 0) << slurp(log);
  EXPECT_NE(slurp(log).find("\"restorations\""), std::string::npos);

  // flag overrides beat the config file
  ASSERT_EQ(run_cli("train -c " + (dir / "cfg.json").string() + " -T 1 -o " + (dir / "run1").string(), log), 0)
      << slurp(log);
  EXPECT_EQ(read_json_file((dir / "run1" / "config.json").string())["params"]["trees"], 1);

  // error paths exit non-zero with a message
  fs::remove(fs::path(out) / model_file_name(3));
  EXPECT_EQ(run_cli("predict -m " + out + " --data " + data, log), 1);
  EXPECT_NE(slurp(log).find("P3"), std::string::npos) << slurp(log);
  EXPECT_EQ(run_cli("train --data " + (dir / "none.csv").string(), log), 1);
  EXPECT_NE(run_cli("train --trees x", log), 0);
  fs::remove_all(dir);
}

TEST(Cli, MultiProcessTcp) {
  const fs::path dir = scratch("cli_tcp");
  const fs::path log = dir / "log.txt";
  const std::string data = (dir / "d.csv").string();
  ASSERT_EQ(run_cli("synth --rows 200 --features 6 --seed 4 -o " + data, log), 0) << slurp(log);
  const int port = 21000 + static_cast<int>(::getpid() % 20000);
  ASSERT_EQ(run_cli("train --data " + data + " -M 2 -T 2 --seed 4 --processes --oracle --port " +
                        std::to_string(port) + " -o " + (dir / "run").string(),
                    log),
            0)
      << slurp(log);
  const json rep = read_json_file((dir / "run" / "report.json").string());
  EXPECT_TRUE(rep["oracle"]["structure_match"].get<bool>()) << rep.dump();
  EXPECT_LE(rep["oracle"]["max_abs_delta"].get<double>(), 1e-6);
  fs::remove_all(dir);
}

TEST(Cli, BenchQuick) {
  const fs::path dir = scratch("cli_bench");
  const fs::path log = dir / "log.txt";
  ASSERT_EQ(run_cli("bench --quick -o " + (dir / "b.json").string(), log), 0) << slurp(log);
  const json b = read_json_file((dir / "b.json").string());
  EXPECT_TRUE(b["checks"]["measured_equals_formula"].get<bool>());
  EXPECT_NE(slurp(log).find("argmax cost"), std::string::npos);
  fs::remove_all(dir);
}

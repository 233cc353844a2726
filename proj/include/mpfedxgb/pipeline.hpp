#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mpfedxgb/audit.hpp"
#include "mpfedxgb/config.hpp"
#include "mpfedxgb/dataset.hpp"
#include "mpfedxgb/federation.hpp"
#include "mpfedxgb/metrics.hpp"
#include "mpfedxgb/report.hpp"

namespace mpfedxgb {

struct DataSpec {
  std::string path;
  std::string label = "label";
  std::vector<std::string> categorical;
  bool normalize = true;
  double test_fraction = 0.2;
  std::vector<double> plan;                             // fraction per party
  std::map<int, std::vector<std::string>> feature_map;  // party -> source columns
};

// One JSON document: session, params, data, out_dir.
struct RunConfig {
  SessionConfig session;
  HyperParams params;
  DataSpec data;
  std::string out_dir = "mpfedxgb-out";
};

inline json to_json(const DataSpec& d) {
  json fm = json::object();
  for (const auto& [m, cols] : d.feature_map) fm[std::to_string(m)] = cols;
  return json{{"path", d.path},         {"label", d.label},
              {"categorical", d.categorical}, {"normalize", d.normalize},
              {"test_fraction", d.test_fraction}, {"plan", d.plan},
              {"feature_map", fm}};
}

inline void merge(DataSpec& d, const json& j) {
  if (!j.is_object()) throw ConfigError("data must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    try {
      if (k == "path") d.path = v.get<std::string>();
      else if (k == "label") d.label = v.get<std::string>();
      else if (k == "categorical") d.categorical = v.get<std::vector<std::string>>();
      else if (k == "normalize") d.normalize = v.get<bool>();
      else if (k == "test_fraction") d.test_fraction = v.get<double>();
      else if (k == "plan") d.plan = v.get<std::vector<double>>();
      else if (k == "feature_map") {
        d.feature_map.clear();
        for (auto m = v.begin(); m != v.end(); ++m) {
          d.feature_map[std::stoi(m.key())] = m.value().get<std::vector<std::string>>();
        }
      } else {
        throw ConfigError("unknown data key '" + k + "'");
      }
    } catch (const json::exception& e) {
      throw ConfigError("data." + k + ": " + e.what());
    } catch (const std::invalid_argument&) {
      throw ConfigError("data.feature_map keys must be party numbers");
    }
  }
}

inline json to_json(const RunConfig& c) {
  return json{{"session", to_json(c.session)},
              {"params", to_json(c.params)},
              {"data", to_json(c.data)},
              {"out_dir", c.out_dir}};
}

inline void merge(RunConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("config must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "session") merge(c.session, it.value());
    else if (k == "params") merge(c.params, it.value());
    else if (k == "data") merge(c.data, it.value());
    else if (k == "out_dir") c.out_dir = it.value().get<std::string>();
    else throw ConfigError("unknown config key '" + k + "'");
  }
}

inline RunConfig load_config(const std::string& path) {
  RunConfig c;
  merge(c, read_json_file(path));
  return c;
}

inline std::vector<double> default_plan(int M) {
  if (M == 4) return {0.1, 0.2, 0.3, 0.4};
  return std::vector<double>(M, 1.0 / M);
}

// Shuffled split for continuous targets.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> random_split(
    std::size_t n, double test_fraction, std::uint64_t seed) {
  if (test_fraction < 0 || test_fraction >= 1) throw ConfigError("test_fraction must be in [0, 1)");
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(derive_seed(seed, kSeedSplit));
  std::shuffle(idx.begin(), idx.end(), rng.engine());
  const auto nt = static_cast<std::size_t>(std::llround(n * test_fraction));
  std::vector<std::size_t> test(idx.begin(), idx.begin() + nt), train(idx.begin() + nt, idx.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {train, test};
}

struct Prepared {
  Dataset data;  // scaled when normalization is on
  Partition partition;
  MinMax scale;  // fitted on the training rows; empty without normalization
  std::vector<std::size_t> train_rows, test_rows;
};

inline Prepared prepare(const RunConfig& c, const Dataset& raw) {
  Prepared p;
  p.data = raw;
  const std::size_t N = p.data.rows();
  if (c.data.test_fraction > 0) {
    std::tie(p.train_rows, p.test_rows) =
        c.params.loss == Loss::kLogloss
            ? stratified_split(p.data.labels, c.data.test_fraction, c.session.seed)
            : random_split(N, c.data.test_fraction, c.session.seed);
  } else {
    for (std::size_t i = 0; i < N; ++i) p.train_rows.push_back(i);
  }
  if (p.train_rows.empty()) throw DataError("no training rows");
  if (c.data.normalize) {
    std::vector<std::vector<double>> fit(p.data.cols.size());
    for (std::size_t j = 0; j < fit.size(); ++j) {
      for (auto i : p.train_rows) fit[j].push_back(p.data.cols[j][i]);
    }
    p.scale = fit_minmax(fit);
    apply_minmax(p.data.cols, p.scale);
  }
  const int M = c.session.parties;
  if (!c.data.feature_map.empty()) {
    p.partition = partition_by_map(p.data, M, c.data.feature_map);
  } else {
    const auto plan = c.data.plan.empty() ? default_plan(M) : c.data.plan;
    if (static_cast<int>(plan.size()) != M) {
      throw ConfigError("plan lists " + std::to_string(plan.size()) + " parties but session.parties is " +
                        std::to_string(M));
    }
    p.partition = partition_by_fraction(p.data, plan);
  }
  return p;
}

inline Prepared prepare(const RunConfig& c) {
  if (c.data.path.empty()) throw ConfigError("data.path is not set");
  return prepare(c, ingest(read_csv(c.data.path), c.data.label, c.data.categorical));
}

// Min-max constants for one party's columns; empty lo/hi means unscaled.
struct ColumnScale {
  std::vector<std::string> names;
  std::vector<double> lo, hi;
};

inline std::string scaling_file_name(PartyId m) {
  return "party" + std::to_string(m) + ".scaling.json";
}

inline ColumnScale party_scale(const Prepared& p, int m) {
  ColumnScale s;
  for (int j : p.partition.owned_columns(m)) {
    s.names.push_back(p.data.names[j]);
    if (!p.scale.lo.empty()) {
      s.lo.push_back(p.scale.lo[j]);
      s.hi.push_back(p.scale.hi[j]);
    }
  }
  return s;
}

inline json to_json(const ColumnScale& s) { return json{{"names", s.names}, {"lo", s.lo}, {"hi", s.hi}}; }

inline ColumnScale scale_from_json(const json& j) {
  ColumnScale s;
  try {
    s.names = j.at("names").get<std::vector<std::string>>();
    s.lo = j.at("lo").get<std::vector<double>>();
    s.hi = j.at("hi").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed scaling file: ") + e.what());
  }
  if (!s.lo.empty() && (s.lo.size() != s.names.size() || s.hi.size() != s.names.size())) {
    throw ConfigError("scaling file lengths disagree");
  }
  return s;
}

inline double scale_value(const ColumnScale& s, std::size_t j, double v) {
  if (s.lo.empty()) return v;
  const double span = s.hi[j] - s.lo[j];
  return span > 0 ? (v - s.lo[j]) / span : 0.0;
}

// ---------------------------------------------------------------------------
// training

struct TrainedSession {
  std::vector<PartialEnsemble> models;
  std::vector<double> yhat;  // training scores at P1
  MulCounter counter;
  std::uint64_t triples = 0;
  double seconds = 0;
  std::optional<AuditResult> audit;
};

inline TrainedSession train_session(const SessionConfig& sc, const Federation& f, const HyperParams& hp,
                                    bool audit) {
  SessionConfig cfg = sc;
  cfg.record_transcripts = audit;
  auto res = train_federated(cfg, f, hp);
  TrainedSession t;
  for (const auto& o : res.outputs) t.models.push_back(o.model);
  t.yhat = res.outputs[0].yhat;
  t.counter = res.counters[0];
  t.triples = res.triples_used;
  t.seconds = res.seconds;
  if (audit) t.audit = audit_transcripts(res.transcripts, cfg.parties);
  return t;
}

struct TrainRun {
  std::vector<PartialEnsemble> models;
  std::vector<double> train_scores, train_labels;
  std::vector<double> test_scores, test_labels;
  RunReport report;
  std::optional<OracleModel> oracle;
  std::vector<double> oracle_scores;  // training rows
};

// Metrics, held-out scores and the optional oracle comparison for a
// finished training session.
inline TrainRun finish_run(const RunConfig& c, const Prepared& p, TrainedSession t, bool with_oracle) {
  const Federation train = federate(p.data, p.partition, p.train_rows);
  TrainRun r;
  r.models = std::move(t.models);
  r.train_scores = std::move(t.yhat);
  r.train_labels = train.labels;
  r.report.counter = t.counter;
  r.report.triples = t.triples;
  r.report.seconds = t.seconds;
  r.report.audit = std::move(t.audit);
  r.report.train_metrics = evaluate(r.train_labels, r.train_scores, c.params.loss);
  if (!p.test_rows.empty()) {
    const Federation test = federate(p.data, p.partition, p.test_rows);
    SessionConfig sc = c.session;
    sc.record_transcripts = false;
    r.test_scores = predict_federated(sc, test, r.models);
    r.test_labels = test.labels;
    r.report.test_metrics = evaluate(r.test_labels, r.test_scores, c.params.loss);
  }
  if (with_oracle) {
    const OracleData od = oracle_view(train, c.session.seed);
    OracleTrainer ot(od, c.params);
    ot.train(train.labels, &r.oracle_scores);
    OracleDelta d = compare_scores(r.train_scores, r.oracle_scores);
    d.structure = structure_diff(join_partial_models(r.models), ot.model());
    r.report.oracle = d;
    r.oracle = ot.model();
  }
  return r;
}

inline TrainRun train_pipeline(const RunConfig& c, const Prepared& p, bool with_oracle = false,
                               bool with_audit = false) {
  const Federation train = federate(p.data, p.partition, p.train_rows);
  return finish_run(c, p, train_session(c.session, train, c.params, with_audit), with_oracle);
}

// ---------------------------------------------------------------------------
// files

// id, raw_score, probability (the raw score under squared loss), label when
// known.
inline void write_predictions(const std::string& path, const std::vector<double>& scores,
                              const std::vector<double>& labels, Loss loss) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(17);
  out << "id,raw_score,probability";
  if (!labels.empty()) out << ",label";
  out << '\n';
  for (std::size_t i = 0; i < scores.size(); ++i) {
    out << i << ',' << scores[i] << ',' << (loss == Loss::kLogloss ? sigmoid(scores[i]) : scores[i]);
    if (!labels.empty()) out << ',' << labels[i];
    out << '\n';
  }
}

struct PredictionFile {
  std::vector<double> scores, labels;
};

inline PredictionFile read_predictions(const std::string& path) {
  const RawTable t = read_csv(path);
  auto col = [&](const std::string& name) -> int {
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    return it == t.header.end() ? -1 : static_cast<int>(it - t.header.begin());
  };
  const int s = col("raw_score"), l = col("label");
  if (s < 0) throw DataError(path + ": no raw_score column");
  PredictionFile f;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    f.scores.push_back(detail::parse_number(t.rows[r][s], r + 1, "raw_score"));
    if (l >= 0) f.labels.push_back(detail::parse_number(t.rows[r][l], r + 1, "label"));
  }
  return f;
}

inline void save_run(const std::string& dir, const RunConfig& c, const Prepared& p, const TrainRun& r) {
  namespace fs = std::filesystem;
  save_models(dir, r.models);
  for (int m = 1; m <= p.partition.parties; ++m) {
    write_json_file((fs::path(dir) / scaling_file_name(static_cast<PartyId>(m))).string(),
                    to_json(party_scale(p, m)));
  }
  write_predictions((fs::path(dir) / "train_predictions.csv").string(), r.train_scores, r.train_labels,
                    c.params.loss);
  if (!r.test_scores.empty()) {
    write_predictions((fs::path(dir) / "test_predictions.csv").string(), r.test_scores, r.test_labels,
                      c.params.loss);
  }
  write_json_file((fs::path(dir) / "report.json").string(), r.report.to_json());
  write_json_file((fs::path(dir) / "config.json").string(), to_json(c));
}

// Party count from P1's file, then every file is loaded and cross-checked.
inline std::vector<PartialEnsemble> load_model_dir(const std::string& dir) {
  const auto first = std::filesystem::path(dir) / model_file_name(kActiveParty);
  if (!std::filesystem::exists(first)) {
    throw ConfigError("model file for " + party_name(kActiveParty) + " missing: " + first.string());
  }
  const int M = ensemble_from_json(read_json_file(first.string())).parties;
  return load_models(dir, M);
}

inline std::vector<ColumnScale> load_scales(const std::string& dir, int parties) {
  std::vector<ColumnScale> out;
  for (int m = 1; m <= parties; ++m) {
    const auto path = std::filesystem::path(dir) / scaling_file_name(static_cast<PartyId>(m));
    out.push_back(std::filesystem::exists(path) ? scale_from_json(read_json_file(path.string()))
                                                : ColumnScale{});
  }
  return out;
}

// Each party's split columns, looked up by the names stored in its model.
// A one-hot level absent from `d` is all zeros.
inline Federation federate_for_models(const Dataset& d, const std::vector<PartialEnsemble>& models,
                                      const std::vector<ColumnScale>& scales) {
  Federation f;
  f.labels = d.labels;
  f.topology.parties = static_cast<int>(models.size());
  for (std::size_t m = 0; m < models.size(); ++m) {
    const auto& names = models[m].feature_names;
    const ColumnScale& sc = scales[m];
    LocalMatrix X;
    X.rows = d.rows();
    for (const auto& name : names) {
      std::vector<double> col(d.rows(), 0.0);
      const auto it = std::find(d.names.begin(), d.names.end(), name);
      if (it != d.names.end()) {
        col = d.cols[it - d.names.begin()];
      } else if (name.find('=') == std::string::npos) {
        throw DataError("column '" + name + "' used by " + party_name(models[m].owner) + " is missing");
      }
      const auto s = std::find(sc.names.begin(), sc.names.end(), name);
      if (s != sc.names.end()) {
        const auto j = static_cast<std::size_t>(s - sc.names.begin());
        for (double& v : col) v = scale_value(sc, j, v);
      }
      X.cols.push_back(std::move(col));
      X.names.push_back(name);
    }
    f.blocks.push_back(std::move(X));
    f.topology.feature_counts.push_back(static_cast<int>(names.size()));
  }
  return f;
}

// ---------------------------------------------------------------------------
// oracle

inline json to_json(const OracleModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    json nodes = json::array();
    for (const auto& n : t.nodes) {
      if (n.leaf) {
        nodes.push_back({{"leaf", true}, {"weight", n.weight}});
      } else {
        nodes.push_back({{"leaf", false},
                         {"feature_id", n.feature_id},
                         {"bucket", n.bucket},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right}});
      }
    }
    trees.push_back({{"nodes", nodes}});
  }
  return json{{"trees", trees}};
}

// ---------------------------------------------------------------------------
// bench text

inline std::string bench_table(const json& bench) {
  std::ostringstream os;
  char line[160];
  for (const char* sweep : {"trees", "depth", "features", "rows"}) {
    if (!bench.contains(sweep)) continue;
    os << "sweep: " << sweep << '\n';
    std::snprintf(line, sizeof line, "%6s %6s %8s %6s %9s %12s %12s %12s %9s\n", "T", "d", "J", "N",
                  "complete", "split/tree", "measured", "formula", "seconds");
    os << line;
    for (const auto& p : bench[sweep]) {
      const auto& per = p["split_per_tree"];
      const std::uint64_t first = per.empty() ? 0 : per[0].get<std::uint64_t>();
      std::snprintf(line, sizeof line, "%6d %6d %8d %6zu %9s %12llu %12llu %12lld %9.2f\n",
                    p["trees"].get<int>(), p["depth"].get<int>(), p["features"].get<int>(),
                    p["rows"].get<std::size_t>(), p["complete"].get<bool>() ? "yes" : "no",
                    static_cast<unsigned long long>(first),
                    static_cast<unsigned long long>(p["measured"].get<std::uint64_t>()),
                    p["formula"].get<long long>(), p["seconds"].get<double>());
      os << line;
    }
    os << '\n';
  }
  if (bench.contains("argmax_cost")) {
    os << "argmax cost (MULs)\n";
    std::snprintf(line, sizeof line, "%6s %6s %14s %14s\n", "J", "K", "division-free", "division");
    os << line;
    for (const auto& r : bench["argmax_cost"]) {
      std::snprintf(line, sizeof line, "%6lld %6lld %14lld %14lld\n", r["J"].get<long long>(),
                    r["K"].get<long long>(), r["division_free"].get<long long>(),
                    r["division_based"].get<long long>());
      os << line;
    }
  }
  if (bench.contains("checks")) {
    os << "\nchecks\n";
    for (auto it = bench["checks"].begin(); it != bench["checks"].end(); ++it) {
      os << "  " << it.key() << ": " << (it.value().get<bool>() ? "ok" : "FAILED") << '\n';
    }
  }
  return os.str();
}

}  // namespace mpfedxgb

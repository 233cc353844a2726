#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mpfedxgb/mpfedxgb.hpp"

extern char** environ;

using namespace mpfedxgb;
namespace fs = std::filesystem;

namespace {

// MPFEDXGB_LOG: quiet, info (default) or debug.
int log_level() {
  static const int level = [] {
    const char* v = std::getenv("MPFEDXGB_LOG");
    if (!v) return 1;
    const std::string s = v;
    if (s == "quiet" || s == "0") return 0;
    if (s == "debug" || s == "2") return 2;
    return 1;
  }();
  return level;
}

void info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "[mpfedxgb] " << msg << '\n';
}

void debug(const std::string& msg) {
  if (log_level() >= 2) std::cerr << "[mpfedxgb:debug] " << msg << '\n';
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("bad number '" + item + "' in list '" + s + "'");
    }
  }
  return out;
}

// Config file plus flag overrides, collected as a JSON patch.
struct ConfigFlags {
  std::string config_path;
  json patch = json::object();

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config_path, "JSON config file");
    app->add_option_function<std::string>("--data", [this](const std::string& v) { patch["data"]["path"] = v; },
                                          "CSV data file");
    app->add_option_function<std::string>("--label", [this](const std::string& v) { patch["data"]["label"] = v; },
                                          "label column");
    app->add_option_function<std::vector<std::string>>(
        "--categorical", [this](const std::vector<std::string>& v) { patch["data"]["categorical"] = v; },
        "categorical columns")->delimiter(',');
    app->add_flag_function("--no-normalize", [this](std::int64_t) { patch["data"]["normalize"] = false; },
                           "skip min-max scaling");
    app->add_option_function<double>("--test-fraction",
                                     [this](const double& v) { patch["data"]["test_fraction"] = v; },
                                     "held-out fraction");
    app->add_option_function<std::string>("--plan", [this](const std::string& v) { patch["data"]["plan"] = parse_list(v); },
                                          "feature fractions per party, e.g. 0.1,0.2,0.3,0.4");
    app->add_option_function<int>("-M,--parties", [this](const int& v) { patch["session"]["parties"] = v; },
                                  "number of data holders");
    app->add_option_function<std::uint64_t>("--seed", [this](const std::uint64_t& v) { patch["session"]["seed"] = v; },
                                            "session seed");
    app->add_option_function<std::uint64_t>(
        "--session-id", [this](const std::uint64_t& v) { patch["session"]["session_id"] = v; }, "session id");
    app->add_option_function<std::string>("--backend", [this](const std::string& v) { patch["session"]["backend"] = v; },
                                          "inprocess or tcp");
    app->add_option_function<int>("--port", [this](const int& v) { patch["session"]["base_port"] = v; },
                                  "TCP base port");
    app->add_option_function<double>("--timeout", [this](const double& v) { patch["session"]["timeout_s"] = v; },
                                     "receive timeout in seconds");
    app->add_option_function<int>("-T,--trees", [this](const int& v) { patch["params"]["trees"] = v; }, "trees");
    app->add_option_function<int>("-d,--depth", [this](const int& v) { patch["params"]["max_depth"] = v; },
                                  "maximum depth");
    app->add_option_function<double>("--lambda", [this](const double& v) { patch["params"]["lambda"] = v; },
                                     "L2 regularisation");
    app->add_option_function<double>("--gamma", [this](const double& v) { patch["params"]["gamma"] = v; },
                                     "split penalty");
    app->add_option_function<int>("-K,--buckets", [this](const int& v) { patch["params"]["buckets"] = v; },
                                  "quantile buckets");
    app->add_option_function<double>("--mu", [this](const double& v) { patch["params"]["mu"] = v; },
                                     "leaf step perturbation factor");
    app->add_option_function<double>("--epsilon", [this](const double& v) { patch["params"]["epsilon"] = v; },
                                     "leaf weight accuracy");
    app->add_flag_function("--mask", [this](std::int64_t) { patch["params"]["first_layer_mask"] = true; },
                           "restrict root splits to P1's features");
    app->add_option_function<std::string>("--loss", [this](const std::string& v) { patch["params"]["loss"] = v; },
                                          "logloss or mse");
    app->add_option_function<std::string>("--counting", [this](const std::string& v) { patch["params"]["counting"] = v; },
                                          "per_comparison or formula");
    app->add_option_function<std::string>("-o,--out", [this](const std::string& v) { patch["out_dir"] = v; },
                                          "output directory");
  }

  RunConfig resolve() const {
    RunConfig c;
    if (!config_path.empty()) merge(c, read_json_file(config_path));
    merge(c, patch);
    c.params.validate();
    c.session.validate();
    return c;
  }
};

void print_metrics(const char* name, const std::optional<Metrics>& m) {
  if (!m) return;
  std::cout << name << ": acc=" << m->accuracy << " f1=" << m->f1
            << " auc=" << (m->auc ? std::to_string(*m->auc) : std::string("n/a")) << " mse=" << m->mse << '\n';
}

// ---------------------------------------------------------------------------
// multi-process TCP

std::map<PartyId, PeerAddress> address_book(const SessionConfig& cfg) {
  std::map<PartyId, PeerAddress> book;
  for (int i = 0; i <= cfg.parties; ++i) {
    book[static_cast<PartyId>(i)] = {cfg.host, static_cast<std::uint16_t>(cfg.base_port + i)};
  }
  return book;
}

void write_block(const std::string& path, const LocalMatrix& X, const std::vector<double>* labels) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out.precision(17);
  bool first = true;
  for (const auto& n : X.names) {
    out << (first ? "" : ",") << n;
    first = false;
  }
  if (labels) out << (first ? "" : ",") << "label";
  out << '\n';
  for (std::size_t i = 0; i < X.rows; ++i) {
    first = true;
    for (const auto& c : X.cols) {
      out << (first ? "" : ",") << c[i];
      first = false;
    }
    if (labels) out << (first ? "" : ",") << (*labels)[i];
    out << '\n';
  }
}

// One party (or the coordinator, id 0) of a session whose job directory was
// written by `train --processes`.
int run_party(int id, const std::string& dir) {
  const json job = read_json_file((fs::path(dir) / "job.json").string());
  SessionConfig cfg;
  merge(cfg, job.at("session"));
  HyperParams hp;
  merge(hp, job.at("params"));
  SessionTopology topo;
  topo.parties = cfg.parties;
  topo.feature_counts = job.at("feature_counts").get<std::vector<int>>();
  if (id < 0 || id > cfg.parties) throw TopologyError("party id out of range");

  auto listener = std::make_unique<TcpListener>(cfg.host, static_cast<std::uint16_t>(cfg.base_port + id));
  TcpEndpoint ep(static_cast<PartyId>(id), cfg.session_id, address_book(cfg), std::move(listener),
                 detail::timeout_of(cfg));
  ep.set_recording(false);
  ep.connect();
  debug(party_name(static_cast<PartyId>(id)) + " connected");
  if (id == 0) {
    run_coordinator(ep, cfg, topo);
    ep.close();
    return 0;
  }

  const RawTable t = read_csv((fs::path(dir) / ("party" + std::to_string(id) + ".csv")).string());
  const Dataset d = ingest(t, "label", {}, id != kActiveParty);
  LocalMatrix X;
  X.rows = d.rows();
  X.cols = d.cols;
  X.names = d.names;

  Party party(static_cast<PartyId>(id), cfg, ep);
  party.global_ids();
  const auto start = std::chrono::steady_clock::now();
  TrainOutput out = secure_train(party, X, party.active() ? &d.labels : nullptr, hp);
  party.finish();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  ep.close();

  fs::create_directories(fs::path(dir) / "models");
  save_models((fs::path(dir) / "models").string(), {out.model});
  if (party.active()) {
    write_json_file((fs::path(dir) / "result.json").string(),
                    json{{"yhat", out.yhat},
                         {"by_phase", party.counter().by_phase()},
                         {"triples", party.triples_used()},
                         {"seconds", secs}});
  }
  return 0;
}

TrainedSession train_processes(const RunConfig& c, const Prepared& p, const std::string& dir) {
  const Federation f = federate(p.data, p.partition, p.train_rows);
  SessionConfig sc = c.session;
  if (sc.base_port == 0) sc.base_port = static_cast<std::uint16_t>(20000 + ::getpid() % 20000);
  fs::create_directories(dir);
  write_json_file((fs::path(dir) / "job.json").string(),
                  json{{"session", to_json(sc)}, {"params", to_json(c.params)},
                       {"feature_counts", f.topology.feature_counts}});
  for (int m = 1; m <= sc.parties; ++m) {
    write_block((fs::path(dir) / ("party" + std::to_string(m) + ".csv")).string(), f.blocks[m - 1],
                m == kActiveParty ? &f.labels : nullptr);
  }

  const std::string self = fs::read_symlink("/proc/self/exe").string();
  std::vector<pid_t> pids;
  for (int id = 0; id <= sc.parties; ++id) {
    std::vector<std::string> args{self, "party", "--id", std::to_string(id), "--dir", dir};
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    argv.push_back(nullptr);
    pid_t pid = 0;
    if (::posix_spawn(&pid, self.c_str(), nullptr, nullptr, argv.data(), environ) != 0) {
      throw SessionAbort("could not start party process " + std::to_string(id));
    }
    info("started " + (id == 0 ? std::string("coordinator") : party_name(static_cast<PartyId>(id))) +
         " as pid " + std::to_string(pid));
    pids.push_back(pid);
  }
  std::string failed;
  for (std::size_t i = 0; i < pids.size(); ++i) {
    int status = 0;
    ::waitpid(pids[i], &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed += " " + std::to_string(i);
  }
  if (!failed.empty()) throw SessionAbort("party processes failed:" + failed);

  const json res = read_json_file((fs::path(dir) / "result.json").string());
  TrainedSession t;
  t.models = load_models((fs::path(dir) / "models").string(), sc.parties);
  t.yhat = res.at("yhat").get<std::vector<double>>();
  const auto phases = res.at("by_phase").get<std::vector<std::uint64_t>>();
  for (std::size_t ph = 0; ph < phases.size() && ph < MulCounter::kPhases; ++ph) {
    for (std::uint64_t k = 0; k < phases[ph]; ++k) t.counter.record(static_cast<MulPhase>(ph));
  }
  t.triples = res.at("triples").get<std::uint64_t>();
  t.seconds = res.at("seconds").get<double>();
  return t;
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_train(const ConfigFlags& flags, bool oracle, bool audit, bool processes) {
  const RunConfig c = flags.resolve();
  info("preparing " + c.data.path);
  const Prepared p = prepare(c);
  info(std::to_string(p.train_rows.size()) + " training rows, " + std::to_string(p.test_rows.size()) +
       " test rows, " + std::to_string(p.data.cols.size()) + " features over " +
       std::to_string(c.session.parties) + " parties");
  TrainRun r;
  if (processes) {
    if (audit) throw ConfigError("--audit needs the in-process session (drop --processes)");
    SessionConfig sc = c.session;
    sc.backend = Backend::kTcp;
    RunConfig cc = c;
    cc.session = sc;
    r = finish_run(cc, p, train_processes(cc, p, (fs::path(c.out_dir) / "session").string()), oracle);
  } else {
    r = train_pipeline(c, p, oracle, audit);
  }
  save_run(c.out_dir, c, p, r);
  print_metrics("train", r.report.train_metrics);
  print_metrics("test", r.report.test_metrics);
  std::cout << "MULs: " << r.report.counter.total() << " (split phase " << r.report.counter.split_phase()
            << "), " << r.report.seconds << " s\n";
  if (r.report.oracle) {
    std::cout << "oracle: max |delta| = " << r.report.oracle->max_abs << ", structure "
              << (r.report.oracle->structure.empty() ? "identical" : r.report.oracle->structure) << '\n';
  }
  if (r.report.audit) {
    std::cout << "audit: " << r.report.audit->violations.size() << " violations\n";
  }
  std::cout << "wrote " << c.out_dir << '\n';
  return 0;
}

int cmd_predict(const std::string& models_dir, const std::string& data, const std::string& label,
                const std::vector<std::string>& categorical, const std::string& out, std::uint64_t seed) {
  const auto models = load_model_dir(models_dir);
  const auto scales = load_scales(models_dir, static_cast<int>(models.size()));
  const Dataset d = ingest(read_csv(data), label, categorical, true);
  const Federation f = federate_for_models(d, models, scales);
  SessionConfig sc;
  sc.parties = static_cast<int>(models.size());
  sc.seed = seed;
  sc.session_id = models[0].session_id;
  sc.record_transcripts = false;
  const auto scores = predict_federated(sc, f, models);
  const Loss loss = models[0].params.loss;
  write_predictions(out, scores, d.labels, loss);
  info("wrote " + std::to_string(scores.size()) + " predictions to " + out);
  if (!d.labels.empty()) print_metrics("metrics", evaluate(d.labels, scores, loss));
  return 0;
}

int cmd_eval(const std::string& path, const std::string& loss_name) {
  const PredictionFile f = read_predictions(path);
  if (f.labels.empty()) throw DataError(path + ": no label column to evaluate against");
  const Metrics m = evaluate(f.labels, f.scores, parse_loss(loss_name));
  std::cout << to_json(m).dump(2) << '\n';
  return 0;
}

int cmd_oracle(const ConfigFlags& flags, const std::string& models_dir) {
  const RunConfig c = flags.resolve();
  const Prepared p = prepare(c);
  const Federation train = federate(p.data, p.partition, p.train_rows);
  const OracleData od = oracle_view(train, c.session.seed);
  OracleTrainer ot(od, c.params);
  std::vector<double> scores;
  ot.train(train.labels, &scores);
  fs::create_directories(c.out_dir);
  json dump = to_json(ot.model());
  json names = json::array();
  const auto ids = permuted_feature_ids(train.topology, c.session.seed);
  std::vector<std::string> by_id(od.cols.size());
  for (int m = 0; m < train.topology.parties; ++m) {
    for (std::size_t j = 0; j < ids[m].size(); ++j) by_id[ids[m][j]] = train.blocks[m].names[j];
  }
  dump["feature_names"] = by_id;
  dump["feature_owner"] = od.owner;
  write_json_file((fs::path(c.out_dir) / "oracle_trees.json").string(), dump);
  write_predictions((fs::path(c.out_dir) / "oracle_predictions.csv").string(), scores, train.labels,
                    c.params.loss);
  print_metrics("oracle train", evaluate(train.labels, scores, c.params.loss));
  if (!models_dir.empty()) {
    const auto models = load_model_dir(models_dir);
    const std::string diff = structure_diff(join_partial_models(models), ot.model());
    const PredictionFile fed = read_predictions((fs::path(models_dir) / "train_predictions.csv").string());
    const OracleDelta d = compare_scores(fed.scores, scores);
    std::cout << "max |federated - oracle| = " << d.max_abs << "\nstructure: "
              << (diff.empty() ? "identical" : diff) << '\n';
    return diff.empty() && d.max_abs <= 1e-6 ? 0 : 3;
  }
  return 0;
}

int cmd_audit(const ConfigFlags& flags) {
  const RunConfig c = flags.resolve();
  const Prepared p = prepare(c);
  const Federation train = federate(p.data, p.partition, p.train_rows);
  const TrainedSession t = train_session(c.session, train, c.params, true);
  std::cout << to_json(*t.audit).dump(2) << '\n';
  return t.audit->violations.empty() ? 0 : 2;
}

int cmd_bench(BenchGrid g, bool quick, const std::string& out) {
  if (quick) {
    g.trees = {1, 2};
    g.depths = {2, 3};
    g.features = {4, 8};
    g.sizes = {200, 400};
    g.base_trees = 1;
    g.base_depth = 2;
    g.base_features = 4;
  }
  const json b = run_bench(g);
  std::cout << bench_table(b);
  if (!out.empty()) {
    write_json_file(out, b);
    info("wrote " + out);
  }
  for (auto it = b["checks"].begin(); it != b["checks"].end(); ++it) {
    if (it.key() != "all_points_complete" && !it.value().get<bool>()) return 4;
  }
  return 0;
}

int cmd_synth(std::size_t rows, int features, std::uint64_t seed, bool regression, const std::string& out) {
  const Dataset d = make_synthetic(rows, features, seed, regression);
  write_csv(out, d);
  info("wrote " + std::to_string(rows) + " rows to " + out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vertically federated gradient boosting over additive secret shares"};
  app.require_subcommand(1);

  ConfigFlags train_flags, oracle_flags, audit_flags;
  bool with_oracle = false, with_audit = false, processes = false;
  auto* train = app.add_subcommand("train", "train a federated ensemble and write per-party models");
  train_flags.attach(train);
  train->add_flag("--oracle", with_oracle, "compare with the centralized trainer");
  train->add_flag("--audit", with_audit, "record transcripts and audit them");
  train->add_flag("--processes", processes, "run each party as its own process over TCP");

  std::string models_dir, pred_data, pred_label = "label", pred_out = "predictions.csv";
  std::vector<std::string> pred_cats;
  std::uint64_t pred_seed = 1;
  auto* predict = app.add_subcommand("predict", "score a CSV with saved per-party models");
  predict->add_option("-m,--models", models_dir, "model directory")->required();
  predict->add_option("--data", pred_data, "CSV to score")->required();
  predict->add_option("--label", pred_label, "label column, used when present");
  predict->add_option("--categorical", pred_cats, "categorical columns")->delimiter(',');
  predict->add_option("-o,--out", pred_out, "predictions CSV");
  predict->add_option("--seed", pred_seed, "session seed");

  std::string eval_path, eval_loss = "logloss";
  auto* eval = app.add_subcommand("eval", "metrics for a predictions CSV with labels");
  eval->add_option("predictions", eval_path, "predictions CSV")->required();
  eval->add_option("--loss", eval_loss, "logloss or mse");

  BenchGrid grid;
  bool quick = false;
  std::string bench_out;
  auto* bench = app.add_subcommand("bench", "MUL-count scaling sweeps over T, d, J and N");
  bench->add_option("--rows", grid.rows, "rows for the T, d and J sweeps");
  bench->add_option("-M,--parties", grid.parties, "parties");
  bench->add_option("-K,--buckets", grid.buckets, "buckets");
  bench->add_option("--seed", grid.seed, "seed");
  bench->add_option("--trees", grid.trees, "tree counts")->delimiter(',');
  bench->add_option("--depths", grid.depths, "depths")->delimiter(',');
  bench->add_option("--features", grid.features, "feature counts")->delimiter(',');
  bench->add_option("--sizes", grid.sizes, "row counts")->delimiter(',');
  bench->add_flag("--quick", quick, "small grid");
  bench->add_option("-o,--out", bench_out, "JSON output");

  std::string oracle_models;
  auto* oracle = app.add_subcommand("oracle", "centralized reference training and tree dump");
  oracle_flags.attach(oracle);
  oracle->add_option("--compare", oracle_models, "model directory from train to compare against");

  auto* audit = app.add_subcommand("audit", "train with transcripts and audit share restorations");
  audit_flags.attach(audit);

  std::size_t synth_rows = 500;
  int synth_features = 8;
  std::uint64_t synth_seed = 1;
  bool synth_reg = false;
  std::string synth_out = "synthetic.csv";
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  synth->add_option("--rows", synth_rows, "rows");
  synth->add_option("--features", synth_features, "features");
  synth->add_option("--seed", synth_seed, "seed");
  synth->add_flag("--regression", synth_reg, "continuous target");
  synth->add_option("-o,--out", synth_out, "CSV path");

  int party_id = -1;
  std::string party_dir;
  auto* party = app.add_subcommand("party", "one party of a multi-process session (internal)");
  party->add_option("--id", party_id, "0 for the coordinator, 1..M for data holders")->required();
  party->add_option("--dir", party_dir, "job directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return cmd_train(train_flags, with_oracle, with_audit, processes);
    if (*predict) return cmd_predict(models_dir, pred_data, pred_label, pred_cats, pred_out, pred_seed);
    if (*eval) return cmd_eval(eval_path, eval_loss);
    if (*bench) return cmd_bench(grid, quick, bench_out);
    if (*oracle) return cmd_oracle(oracle_flags, oracle_models);
    if (*audit) return cmd_audit(audit_flags);
    if (*synth) return cmd_synth(synth_rows, synth_features, synth_seed, synth_reg, synth_out);
    if (*party) return run_party(party_id, party_dir);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <string>

#include "helpers.hpp"

using namespace mpfedxgb;
using testing_util::config;
using testing_util::reveal;
using testing_util::run;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

Federation synthetic(std::size_t N, int J, int M, std::uint64_t seed) {
  const Dataset d = make_synthetic(N, J, seed);
  return federate(d, partition_by_fraction(d, std::vector<double>(M, 1.0 / M)));
}

std::vector<PartialEnsemble> models_of(const SessionResult<TrainOutput>& r) {
  std::vector<PartialEnsemble> out;
  for (const auto& o : r.outputs) out.push_back(o.model);
  return out;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return INFINITY;
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

std::vector<std::uint64_t> digests(const std::vector<Transcript>& ts) {
  std::vector<std::uint64_t> out;
  for (const auto& t : ts) out.push_back(t.digest());
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------

Outcome lossless() {
  const std::uint64_t seed = 1;
  const Federation f = synthetic(500, 8, 3, seed);
  HyperParams hp;
  hp.trees = 3;
  hp.max_depth = 3;
  hp.buckets = 10;
  hp.lambda = 1.0;
  hp.gamma = 0.5;
  const auto t0 = std::chrono::steady_clock::now();
  auto res = train_federated(config(3, seed), f, hp);
  const auto models = models_of(res);
  const auto pred = predict_federated(config(3, seed + 1), f, models);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const OracleData od = oracle_view(f, seed);
  OracleTrainer ot(od, hp);
  std::vector<double> want;
  const OracleModel oracle = ot.train(f.labels, &want);
  const std::string diff = structure_diff(join_partial_models(models), oracle);
  const double d_train = max_abs_diff(res.outputs[0].yhat, want);
  const double d_pred = max_abs_diff(pred, oracle_predict(oracle, od.cols, f.rows()));
  const double d = std::max(d_train, d_pred);
  return {diff.empty() && d <= 1e-6 && secs <= 120.0,
          "max |secure - oracle| " + fmt("%.2e", d) + ", structure " +
              (diff.empty() ? "identical" : diff) + ", " + fmt("%.1f s", secs)};
}

Outcome cost_table() {
  const auto rows = argmax_cost_table();
  const long long free_want[] = {468, 612, 1197}, div_want[] = {10496, 20992, 41984};
  bool ok = rows.size() == 3;
  std::string detail;
  for (std::size_t i = 0; i < rows.size() && i < 3; ++i) {
    ok = ok && rows[i].division_free == free_want[i] && rows[i].division_based == div_want[i];
    detail += std::to_string(rows[i].division_free) + "/" + std::to_string(rows[i].division_based) + " ";
  }
  auto r = run(3, [](Party& p) {
    auto sh = [&](std::vector<double> v) {
      return p.share(kActiveParty, p.active() ? v : std::vector<double>{}, v.size());
    };
    const CandidateStats c{sh({1, 4}), sh({4, 9}), sh({3, 4}), sh({4, 5})};
    auto before = p.counter().total();
    diff_numerator_denominator(p, gather(c, {0}), gather(c, {1}));
    const auto cmp = p.counter().total() - before;
    const ShareVector loss_n = p.mul(p.constant(2.0), p.constant(2.0));
    before = p.counter().total();
    best_gain_positive(p, gather(c, {0}), loss_n, p.constant(3.0), p.constant(0.5), 1e-6);
    return std::pair<std::uint64_t, std::uint64_t>{cmp, p.counter().total() - before};
  });
  const auto [cmp, sign] = r.outputs[0];
  ok = ok && cmp == 9 && sign == 8;
  return {ok, detail + "| measured " + std::to_string(cmp) + " per comparison, " +
                  std::to_string(sign) + " per gain sign"};
}

Outcome leaf_bounds() {
  const int b1 = iteration_bound(1.0, 2.0, 1e-14), b2 = iteration_bound(1.5, 2.0, 1e-14);
  LeafWeightOptions opt;
  opt.lambda = 0.5;
  auto r = run(3, [&](Party& p) {
    Rng rng(2024);
    int bad = 0, worst_slack = 1 << 30;
    double worst = 0;
    for (int trial = 0; trial < 500; ++trial) {
      const double a = rng.uniform(0.5, 1e3), b = rng.uniform(-1e3, 1e3);
      const ShareVector as = p.share(2, p.id() == 2 ? std::vector<double>{a} : std::vector<double>{}, 1);
      const ShareVector bs = p.share(1, p.active() ? std::vector<double>{b} : std::vector<double>{}, 1);
      const LeafWeightResult lw = secure_leaf_weight(p, as, bs, opt);
      const double w = reveal(p, lw.w)[0];
      worst = std::max(worst, std::fabs(w + b / a));
      int t = 0;
      while (std::fabs(descent_replay(a, b, lw.plan.eta, t) + b / a) > 1e-6 && t < 100000) ++t;
      if (t > lw.plan.steps || std::fabs(w + b / a) > 1e-6) ++bad;
      worst_slack = std::min(worst_slack, lw.plan.steps - t);
    }
    return std::tuple<int, double, int>{bad, worst, worst_slack};
  });
  const auto [bad, worst, slack] = r.outputs[0];
  return {b1 == 47 && b2 == 80 && bad == 0,
          "bounds " + std::to_string(b1) + "/" + std::to_string(b2) + ", 500 leaves, max |w + b/a| " +
              fmt("%.2e", worst) + ", min bound slack " + std::to_string(slack) + " steps"};
}

Outcome newton() {
  double worst = 0;
  std::uint64_t muls = 0;
  for (int M : {2, 3, 5}) {
    auto r = run(M, [](Party& p) {
      Rng rng(60 + p.parties());
      double w = 0;
      for (int i = 0; i < 100; ++i) {
        const double d = std::exp(rng.uniform(std::log(2.0), std::log(1e3)));
        const ShareVector ds = p.share(1, p.active() ? std::vector<double>{d} : std::vector<double>{}, 1);
        w = std::max(w, std::fabs(reveal(p, newton_reciprocal(p, ds, 20))[0] * d - 1));
      }
      const ShareVector two = p.share(1, p.active() ? std::vector<double>{2.0} : std::vector<double>{}, 1);
      const auto before = p.counter().total();
      secure_divide(p, p.constant(1.0), two, 20);
      return std::pair<double, std::uint64_t>{w, p.counter().total() - before};
    });
    worst = std::max(worst, r.outputs[0].first);
    muls = r.outputs[0].second;
  }
  double lo = 2, hi = 0;
  for (int M = 2; M <= 20; ++M) {
    auto r = run(M, [](Party& p) {
      Rng rng(static_cast<std::uint64_t>(100 + p.parties()));
      double a = 2, b = 0;
      for (int i = 0; i < 30; ++i) {
        const double d = std::exp(rng.uniform(std::log(0.5), std::log(1e6)));
        const ShareVector ds = p.share(1, p.active() ? std::vector<double>{d} : std::vector<double>{}, 1);
        const double prod = d * init_reciprocal(p, ds).x0_plain;
        a = std::min(a, prod);
        b = std::max(b, prod);
      }
      return std::pair<double, double>{a, b};
    });
    lo = std::min(lo, r.outputs[0].first);
    hi = std::max(hi, r.outputs[0].second);
  }
  return {worst <= 1e-6 && muls == 41 && division_muls(20) == 41 && lo > 0 && hi < 2,
          "max relative error " + fmt("%.2e", worst) + ", " + std::to_string(muls) +
              " MULs per division, d*x0 in [" + fmt("%.2e", lo) + ", " + fmt("%.3f", hi) +
              "] for M = 2..20"};
}

Outcome argmax_equivalence() {
  auto r = run(3, [](Party& p) {
    Rng rng(5150);
    int mismatch = 0, sign_mismatch = 0, splits = 0;
    for (int trial = 0; trial < 1000; ++trial) {
      const int N = static_cast<int>(rng.integer(2, 32));
      const int J = static_cast<int>(rng.integer(1, 8));
      const int K = static_cast<int>(rng.integer(1, 8));
      const double gamma = rng.uniform(0, 0.5);
      const auto node = testing_util::random_node(rng, N, J, K);
      const PlainDecision plain = plain_node_decision(node.gb, node.hb, 1.0, gamma, 1e-6, trial % 2);
      const auto sec = testing_util::secure_node_decision(p, node, 1.0, gamma, 1e-6, trial % 2);
      if (sec.feature != plain.feature || sec.bucket != plain.bucket) ++mismatch;
      if (sec.positive != plain.split) ++sign_mismatch;
      splits += plain.split;
    }
    return std::tuple<int, int, int>{mismatch, sign_mismatch, splits};
  });
  const auto [mismatch, sign_mismatch, splits] = r.outputs[0];
  return {mismatch == 0 && sign_mismatch == 0,
          "1000 nodes, " + std::to_string(mismatch) + " argmax and " + std::to_string(sign_mismatch) +
              " gain-sign disagreements (" + std::to_string(splits) + " positive)"};
}

Outcome audit_run() {
  const Federation f = synthetic(300, 8, 3, 4);
  HyperParams hp;
  hp.trees = 3;
  hp.max_depth = 3;
  auto r = train_federated(config(3, 4), f, hp);
  const auto res = audit_transcripts(r.transcripts, 3);
  const std::set<std::string> want{"e,f->P1", "H->P1", "G->P2", "G-sign->P1", "a-sum->P1", "yhat->P1"};
  bool receivers = true;
  for (const auto& x : res.restorations) {
    receivers = receivers && x.receiver == (x.label == "G->P2" ? kGradientRestorer : kActiveParty);
  }
  std::string kinds;
  for (const auto& [k, n] : res.kind_counts()) kinds += k + " x" + std::to_string(n) + " ";
  return {res.violations.empty() && res.kinds() == want && receivers,
          std::to_string(res.violations.size()) + " violations, restorations: " + kinds};
}

Outcome first_layer_mask() {
  const Federation f = synthetic(400, 8, 3, 14);
  HyperParams hp;
  hp.trees = 3;
  hp.max_depth = 3;
  auto plain = train_federated(config(3, 14), f, hp);
  hp.first_layer_mask = true;
  auto masked = train_federated(config(3, 14), f, hp);
  bool roots = true;
  for (std::size_t m = 0; m < masked.outputs.size(); ++m) {
    for (const auto& t : masked.outputs[m].model.trees) {
      const NodeKind k = t.nodes[0].kind;
      if (k == NodeKind::kLeaf) continue;
      roots = roots && (m == 0 ? k == NodeKind::kSplit : k != NodeKind::kSplit);
    }
  }
  const double a = *auc_score(f.labels, plain.outputs[0].yhat);
  const double b = *auc_score(f.labels, masked.outputs[0].yhat);
  return {roots && std::abs(a - b) <= 0.03,
          std::string("roots ") + (roots ? "all owned by P1" : "NOT all owned by P1") + ", AUC " +
              fmt("%.4f", a) + " unmasked vs " + fmt("%.4f", b) +
              " masked; external-dataset comparison not run"};
}

Outcome scaling() {
  const json b = run_bench(BenchGrid{});
  const json& c = b["checks"];
  bool ok = true;
  std::string detail;
  for (const auto& [k, v] : c.items()) {
    ok = ok && v.get<bool>();
    detail += k + "=" + (v.get<bool>() ? "yes" : "no") + " ";
  }
  return {ok, detail};
}

Outcome primitives() {
  auto r = run(3, [](Party& p) {
    Rng rng(9001);
    int bad = 0;
    double worst = 0;
    auto sh = [&](PartyId dealer, double v) {
      return p.share(dealer, p.id() == dealer ? std::vector<double>{v} : std::vector<double>{}, 1);
    };
    auto close = [&](double got, double want) {
      const double e = std::fabs(got - want) / std::max(1.0, std::fabs(want));
      worst = std::max(worst, e);
      return e <= 1e-9;
    };
    for (int trial = 0; trial < 10000; ++trial) {
      const double x = rng.uniform(-10, 10), y = rng.uniform(-10, 10), z = rng.uniform(-10, 10);
      const auto dx = static_cast<PartyId>(1 + trial % 3), dy = static_cast<PartyId>(1 + (trial / 3) % 3);
      const ShareVector xs = sh(dx, x), ys = sh(dy, y), zs = sh(1, z);
      const double g = rng.grid_uniform(4096.0);
      ShareSet gs = shr_split(g, dx, 3, rng, 1e3);
      const bool exact = reconstruct(gs)[0] == g && close(reconstruct(shr_split(x, dy, 3, rng, 1e3))[0], x);
      const ShareVector xy = p.mul(xs, ys), yx = p.mul(ys, xs);
      const ShareVector lhs = p.mul(xs, ys + zs), rhs = xy + p.mul(xs, zs);
      const auto v = reveal(p, concat({xs + ys, ys + xs, (xs + ys) + zs, xs + (ys + zs), xy, yx, lhs, rhs},
                                      p.id()));
      const bool ok = exact && close(v[0], x + y) && v[0] == v[1] &&
                      close(v[2], v[3]) && close(v[4], x * y) && close(v[5], x * y) &&
                      close(v[6], v[7]) && close(v[6], x * (y + z));
      bad += !ok;
    }
    return std::pair<int, double>{bad, worst};
  });
  const auto [bad, worst] = r.outputs[0];
  auto workload = [](Party& p) {
    auto x = p.share(1, p.active() ? std::vector<double>{1, 2, 3} : std::vector<double>{}, 3);
    auto y = p.share(2, p.id() == 2 ? std::vector<double>{4, 5, 6} : std::vector<double>{}, 3);
    const auto v = sign_protocol(p, p.mul(x, y) - p.constant(9.0, 3), p.constant(1.0, 3));
    return std::vector<double>(v.begin(), v.end());
  };
  auto cfg = config(3, 77);
  auto a = run_session(cfg, testing_util::topology(3), workload);
  cfg.backend = Backend::kTcp;
  auto b = run_session(cfg, testing_util::topology(3), workload);
  bool same = a.outputs == b.outputs && digests(a.transcripts) == digests(b.transcripts);
  const Federation f = synthetic(80, 4, 3, 8);
  HyperParams hp;
  hp.trees = 1;
  hp.max_depth = 2;
  auto ti = train_federated(config(3, 8), f, hp);
  auto tcfg = config(3, 8);
  tcfg.backend = Backend::kTcp;
  auto tt = train_federated(tcfg, f, hp);
  same = same && digests(ti.transcripts) == digests(tt.transcripts) && ti.outputs[0].yhat == tt.outputs[0].yhat;
  return {bad == 0 && same,
          "10000 trials, " + std::to_string(bad) + " failed, worst relative error " + fmt("%.2e", worst) +
              ", TCP transcripts " + (same ? "identical" : "DIFFER")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"lossless training and prediction", lossless},
      {"argmax cost table and per-step MUL counts", cost_table},
      {"leaf descent iteration bounds", leaf_bounds},
      {"Newton reciprocal accuracy and cost", newton},
      {"secure argmax equals plaintext argmax", argmax_equivalence},
      {"transcript audit", audit_run},
      {"first-layer mask", first_layer_mask},
      {"counter-based scaling", scaling},
      {"share primitive laws and transport equivalence", primitives},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %zu: %s (%s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}

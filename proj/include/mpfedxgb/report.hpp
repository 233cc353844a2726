#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mpfedxgb/audit.hpp"
#include "mpfedxgb/config.hpp"
#include "mpfedxgb/metrics.hpp"
#include "mpfedxgb/shares.hpp"

namespace mpfedxgb {

inline json to_json(const Metrics& m) {
  json j{{"accuracy", m.accuracy}, {"f1", m.f1}, {"mse", m.mse}};
  j["auc"] = m.auc ? json(*m.auc) : json(nullptr);
  return j;
}

inline json to_json(const MulCounter& c) {
  json j{{"total", c.total()}, {"split_phase", c.split_phase()}};
  json phases = json::object();
  for (std::size_t p = 0; p < MulCounter::kPhases; ++p) {
    phases[phase_name(static_cast<MulPhase>(p))] = c.by_phase()[p];
  }
  j["by_phase"] = phases;
  return j;
}

inline json to_json(const AuditResult& a) {
  json v = json::array();
  for (const auto& x : a.violations) {
    v.push_back({{"party", party_name(x.party)}, {"tag", tag_name(x.tag)}, {"slot", x.slot},
                 {"round", x.round}, {"what", x.what}});
  }
  json k = json::object();
  for (const auto& [label, n] : a.kind_counts()) k[label] = n;
  return json{{"violations", v}, {"restorations", k}};
}

struct OracleDelta {
  double max_abs = 0;
  std::string structure;  // empty when the trees agree
};

inline OracleDelta compare_scores(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("score vectors differ in length");
  OracleDelta d;
  for (std::size_t i = 0; i < a.size(); ++i) d.max_abs = std::max(d.max_abs, std::fabs(a[i] - b[i]));
  return d;
}

struct RunReport {
  std::optional<Metrics> train_metrics;
  std::optional<Metrics> test_metrics;
  MulCounter counter;  // P1's; every party issues the same MULs
  std::uint64_t triples = 0;
  double seconds = 0;
  std::optional<OracleDelta> oracle;
  std::optional<AuditResult> audit;

  json to_json() const {
    json j;
    if (train_metrics) j["train"] = mpfedxgb::to_json(*train_metrics);
    if (test_metrics) j["test"] = mpfedxgb::to_json(*test_metrics);
    j["muls"] = mpfedxgb::to_json(counter);
    j["triples"] = triples;
    j["seconds"] = seconds;
    if (oracle) {
      j["oracle"] = {{"max_abs_delta", oracle->max_abs},
                     {"structure_match", oracle->structure.empty()}};
      if (!oracle->structure.empty()) j["oracle"]["first_difference"] = oracle->structure;
    }
    if (audit) j["audit"] = mpfedxgb::to_json(*audit);
    return j;
  }
};

}  // namespace mpfedxgb

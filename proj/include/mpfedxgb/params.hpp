#pragma once

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mpfedxgb/common.hpp"

namespace mpfedxgb {

enum class Loss { kLogloss, kMse };

// kPerComparison: every bracket match is its own set of scalar MULs.
// kFormula: all matches of one bracket round share vector MULs and
// prediction runs instance by instance, so the counters follow the
// closed-form cost model.
enum class Counting { kPerComparison, kFormula };

enum class Backend { kInProcess, kTcp };

inline std::string to_string(Loss l) { return l == Loss::kLogloss ? "logloss" : "mse"; }
inline std::string to_string(Counting c) {
  return c == Counting::kPerComparison ? "per_comparison" : "formula";
}
inline std::string to_string(Backend b) { return b == Backend::kInProcess ? "inprocess" : "tcp"; }

inline Loss parse_loss(const std::string& s) {
  if (s == "logloss") return Loss::kLogloss;
  if (s == "mse") return Loss::kMse;
  throw ConfigError("unknown loss '" + s + "'");
}
inline Counting parse_counting(const std::string& s) {
  if (s == "per_comparison") return Counting::kPerComparison;
  if (s == "formula") return Counting::kFormula;
  throw ConfigError("unknown counting mode '" + s + "'");
}
inline Backend parse_backend(const std::string& s) {
  if (s == "inprocess") return Backend::kInProcess;
  if (s == "tcp") return Backend::kTcp;
  throw ConfigError("unknown backend '" + s + "'");
}

struct HyperParams {
  int trees = 3;
  int max_depth = 3;
  double lambda = 1.0;
  double gamma = 0.5;
  int buckets = 10;
  double mu = 2.0;
  double epsilon = 1e-6;
  bool first_layer_mask = false;
  Loss loss = Loss::kLogloss;
  // assumed a*eps/|b| when the true ratio is hidden from P1
  double ratio_floor = 1e-14;
  // gain margin below which two candidates tie and a split is not taken
  double tie_tolerance = 1e-6;
  Counting counting = Counting::kPerComparison;

  void validate() const {
    if (trees < 0) throw ConfigError("trees must be >= 0");
    if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
    if (!(lambda > 0)) throw ConfigError("lambda must be > 0");
    if (gamma < 0) throw ConfigError("gamma must be >= 0");
    if (buckets < 1) throw ConfigError("buckets must be >= 1");
    if (!(mu > 1)) throw ConfigError("mu must be > 1");
    if (!(epsilon > 0)) throw ConfigError("epsilon must be > 0");
    if (!(ratio_floor > 0)) throw ConfigError("ratio_floor must be > 0");
    if (tie_tolerance < 0) throw ConfigError("tie_tolerance must be >= 0");
  }
};

struct SessionConfig {
  int parties = 4;
  std::uint64_t seed = 1;
  std::uint64_t session_id = 1;
  double mask_range = 1e3;
  Backend backend = Backend::kInProcess;
  std::string host = "127.0.0.1";
  // party m listens on base_port + m; 0 lets the OS choose (in-process TCP only)
  std::uint16_t base_port = 0;
  double timeout_s = 30.0;
  std::size_t triple_batch = 4096;
  bool record_transcripts = true;

  void validate() const {
    if (parties < 2) throw TopologyError("at least 2 parties are required");
    if (!(mask_range > 0)) throw ConfigError("mask_range must be > 0");
    if (!(timeout_s > 0)) throw ConfigError("timeout_s must be > 0");
    if (triple_batch < 1) throw ConfigError("triple_batch must be >= 1");
  }
};

// Roster and split-feature counts; feature_counts[m - 1] is party m's count.
struct SessionTopology {
  int parties = 0;
  std::vector<int> feature_counts;

  int total_features() const {
    return std::accumulate(feature_counts.begin(), feature_counts.end(), 0);
  }

  void validate() const {
    if (parties < 2) throw TopologyError("at least 2 parties are required");
    if (!feature_counts.empty() && static_cast<int>(feature_counts.size()) != parties) {
      throw TopologyError("feature_counts must list every party");
    }
  }
};

// Purposes for derive_seed.
enum SeedPurpose : std::uint64_t {
  kSeedMasks = 1,
  kSeedTriples = 2,
  kSeedPermutation = 3,
  kSeedPerturbation = 4,
  kSeedData = 5,
  kSeedSplit = 6,
};

}  // namespace mpfedxgb

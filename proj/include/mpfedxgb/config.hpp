#pragma once

#include <fstream>
#include <string>

#include "json.hpp"
#include "mpfedxgb/params.hpp"

namespace mpfedxgb {

using json = nlohmann::json;

inline json to_json(const HyperParams& p) {
  return json{{"trees", p.trees},
              {"max_depth", p.max_depth},
              {"lambda", p.lambda},
              {"gamma", p.gamma},
              {"buckets", p.buckets},
              {"mu", p.mu},
              {"epsilon", p.epsilon},
              {"first_layer_mask", p.first_layer_mask},
              {"loss", to_string(p.loss)},
              {"ratio_floor", p.ratio_floor},
              {"tie_tolerance", p.tie_tolerance},
              {"counting", to_string(p.counting)}};
}

// Missing keys keep the current value; unknown keys are rejected.
inline void merge(HyperParams& p, const json& j) {
  if (!j.is_object()) throw ConfigError("params must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    try {
      if (k == "trees") p.trees = v.get<int>();
      else if (k == "max_depth") p.max_depth = v.get<int>();
      else if (k == "lambda") p.lambda = v.get<double>();
      else if (k == "gamma") p.gamma = v.get<double>();
      else if (k == "buckets") p.buckets = v.get<int>();
      else if (k == "mu") p.mu = v.get<double>();
      else if (k == "epsilon") p.epsilon = v.get<double>();
      else if (k == "first_layer_mask") p.first_layer_mask = v.get<bool>();
      else if (k == "loss") p.loss = parse_loss(v.get<std::string>());
      else if (k == "ratio_floor") p.ratio_floor = v.get<double>();
      else if (k == "tie_tolerance") p.tie_tolerance = v.get<double>();
      else if (k == "counting") p.counting = parse_counting(v.get<std::string>());
      else throw ConfigError("unknown params key '" + k + "'");
    } catch (const json::exception& e) {
      throw ConfigError("params." + k + ": " + e.what());
    }
  }
}

inline json to_json(const SessionConfig& c) {
  return json{{"parties", c.parties},         {"seed", c.seed},
              {"session_id", c.session_id},   {"mask_range", c.mask_range},
              {"backend", to_string(c.backend)}, {"host", c.host},
              {"base_port", c.base_port},     {"timeout_s", c.timeout_s},
              {"triple_batch", c.triple_batch}, {"record_transcripts", c.record_transcripts}};
}

inline void merge(SessionConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("session must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    const json& v = it.value();
    try {
      if (k == "parties") c.parties = v.get<int>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "session_id") c.session_id = v.get<std::uint64_t>();
      else if (k == "mask_range") c.mask_range = v.get<double>();
      else if (k == "backend") c.backend = parse_backend(v.get<std::string>());
      else if (k == "host") c.host = v.get<std::string>();
      else if (k == "base_port") c.base_port = v.get<std::uint16_t>();
      else if (k == "timeout_s") c.timeout_s = v.get<double>();
      else if (k == "triple_batch") c.triple_batch = v.get<std::size_t>();
      else if (k == "record_transcripts") c.record_transcripts = v.get<bool>();
      else throw ConfigError("unknown session key '" + k + "'");
    } catch (const json::exception& e) {
      throw ConfigError("session." + k + ": " + e.what());
    }
  }
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace mpfedxgb

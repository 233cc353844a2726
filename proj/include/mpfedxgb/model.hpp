#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mpfedxgb/config.hpp"
#include "mpfedxgb/params.hpp"

namespace mpfedxgb {

enum class NodeKind { kSplit, kDummy, kLeaf };

inline const char* kind_name(NodeKind k) {
  switch (k) {
    case NodeKind::kSplit: return "split";
    case NodeKind::kDummy: return "dummy";
    case NodeKind::kLeaf: return "leaf";
  }
  return "?";
}

struct TreeNode {
  NodeKind kind = NodeKind::kLeaf;
  // split nodes only
  int local_feature = -1;
  int feature_id = -1;
  int bucket = -1;
  double threshold = 0.0;
  // leaves only
  double weight_share = 0.0;
  int left = -1;
  int right = -1;
};

// Nodes in preorder; nodes[0] is the root.
struct PartialTree {
  std::vector<TreeNode> nodes;

  // node indices of the leaves, left to right
  std::vector<int> leaves() const {
    std::vector<int> out;
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) {
      if (nodes[i].kind == NodeKind::kLeaf) out.push_back(i);
    }
    return out;
  }

  std::vector<double> leaf_weight_shares() const {
    std::vector<double> out;
    for (int i : leaves()) out.push_back(nodes[i].weight_share);
    return out;
  }

  int depth() const { return nodes.empty() ? 0 : depth_at(0); }

 private:
  int depth_at(int i) const {
    const auto& n = nodes[i];
    if (n.kind == NodeKind::kLeaf) return 0;
    return 1 + std::max(depth_at(n.left), depth_at(n.right));
  }
};

struct PartialEnsemble {
  PartyId owner = 0;
  int parties = 0;
  std::uint64_t session_id = 0;
  std::uint64_t topology_hash = 0;
  HyperParams params;
  std::vector<int> feature_ids;  // global id of each local column
  std::vector<std::string> feature_names;
  std::vector<PartialTree> trees;
};

inline std::uint64_t fnv1a(std::uint64_t h, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xff;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ids_by_party[m - 1] lists party m's global feature ids.
inline std::uint64_t topology_hash(std::uint64_t session_id,
                                   const std::vector<std::vector<int>>& ids_by_party) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  h = fnv1a(h, session_id);
  h = fnv1a(h, ids_by_party.size());
  for (const auto& ids : ids_by_party) {
    h = fnv1a(h, ids.size());
    for (int g : ids) h = fnv1a(h, static_cast<std::uint64_t>(g));
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

inline bool same_shape(const PartialTree& a, const PartialTree& b) {
  if (a.nodes.size() != b.nodes.size()) return false;
  for (std::size_t i = 0; i < a.nodes.size(); ++i) {
    const bool la = a.nodes[i].kind == NodeKind::kLeaf;
    const bool lb = b.nodes[i].kind == NodeKind::kLeaf;
    if (la != lb || a.nodes[i].left != b.nodes[i].left || a.nodes[i].right != b.nodes[i].right) {
      return false;
    }
  }
  return true;
}

inline json to_json(const PartialTree& t) {
  json nodes = json::array();
  for (const auto& n : t.nodes) {
    json j{{"kind", kind_name(n.kind)}};
    if (n.kind == NodeKind::kSplit) {
      j["local_feature"] = n.local_feature;
      j["feature_id"] = n.feature_id;
      j["bucket"] = n.bucket;
      j["threshold"] = n.threshold;
    } else if (n.kind == NodeKind::kLeaf) {
      j["weight_share"] = n.weight_share;
    }
    nodes.push_back(std::move(j));
  }
  return json{{"nodes", nodes}};
}

namespace detail {

inline int parse_preorder(const json& arr, std::size_t& pos, PartialTree& t) {
  if (pos >= arr.size()) throw ShapeError("truncated tree in model file");
  const json& j = arr[pos++];
  TreeNode n;
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "split") {
    n.kind = NodeKind::kSplit;
    n.local_feature = j.at("local_feature").get<int>();
    n.feature_id = j.at("feature_id").get<int>();
    n.bucket = j.at("bucket").get<int>();
    n.threshold = j.at("threshold").get<double>();
  } else if (kind == "dummy") {
    n.kind = NodeKind::kDummy;
  } else if (kind == "leaf") {
    n.kind = NodeKind::kLeaf;
    n.weight_share = j.at("weight_share").get<double>();
  } else {
    throw ShapeError("unknown node kind '" + kind + "'");
  }
  const int idx = static_cast<int>(t.nodes.size());
  t.nodes.push_back(n);
  if (n.kind != NodeKind::kLeaf) {
    const int l = parse_preorder(arr, pos, t);
    const int r = parse_preorder(arr, pos, t);
    t.nodes[idx].left = l;
    t.nodes[idx].right = r;
  }
  return idx;
}

}  // namespace detail

inline PartialTree tree_from_json(const json& j) {
  PartialTree t;
  const json& arr = j.at("nodes");
  std::size_t pos = 0;
  if (!arr.empty()) detail::parse_preorder(arr, pos, t);
  if (pos != arr.size()) throw ShapeError("trailing nodes in model tree");
  return t;
}

inline json to_json(const PartialEnsemble& e) {
  json trees = json::array();
  for (const auto& t : e.trees) trees.push_back(to_json(t));
  return json{{"format", "mpfedxgb-partial-model"},
              {"version", 1},
              {"party", e.owner},
              {"parties", e.parties},
              {"session_id", e.session_id},
              {"topology_hash", hex64(e.topology_hash)},
              {"params", to_json(e.params)},
              {"feature_ids", e.feature_ids},
              {"feature_names", e.feature_names},
              {"trees", trees}};
}

inline PartialEnsemble ensemble_from_json(const json& j) {
  try {
    if (j.at("format").get<std::string>() != "mpfedxgb-partial-model") {
      throw ConfigError("not a partial model file");
    }
    PartialEnsemble e;
    e.owner = j.at("party").get<PartyId>();
    e.parties = j.at("parties").get<int>();
    e.session_id = j.at("session_id").get<std::uint64_t>();
    e.topology_hash = std::stoull(j.at("topology_hash").get<std::string>(), nullptr, 16);
    merge(e.params, j.at("params"));
    e.feature_ids = j.at("feature_ids").get<std::vector<int>>();
    e.feature_names = j.value("feature_names", std::vector<std::string>{});
    for (const auto& t : j.at("trees")) e.trees.push_back(tree_from_json(t));
    return e;
  } catch (const json::exception& ex) {
    throw ConfigError(std::string("malformed model file: ") + ex.what());
  }
}

inline std::string model_file_name(PartyId m) { return "party" + std::to_string(m) + ".model.json"; }

inline void save_models(const std::string& dir, const std::vector<PartialEnsemble>& models) {
  std::filesystem::create_directories(dir);
  for (const auto& e : models) {
    write_json_file((std::filesystem::path(dir) / model_file_name(e.owner)).string(), to_json(e));
  }
}

// Checks that all party files exist and belong to one session.
inline void check_model_set(const std::vector<PartialEnsemble>& models) {
  if (models.empty()) throw ShapeError("no model files");
  const auto& first = models.front();
  for (const auto& e : models) {
    if (e.topology_hash != first.topology_hash) {
      throw ShapeError("topology hash mismatch between " + party_name(first.owner) + " and " +
                       party_name(e.owner) + " model files");
    }
    if (e.trees.size() != first.trees.size()) {
      throw ShapeError("tree count differs for " + party_name(e.owner));
    }
    for (std::size_t t = 0; t < e.trees.size(); ++t) {
      if (!same_shape(e.trees[t], first.trees[t])) {
        throw ShapeError("tree " + std::to_string(t) + " shape differs for " + party_name(e.owner));
      }
    }
  }
}

inline std::vector<PartialEnsemble> load_models(const std::string& dir, int parties) {
  std::vector<PartialEnsemble> out;
  for (int m = 1; m <= parties; ++m) {
    const auto path = std::filesystem::path(dir) / model_file_name(static_cast<PartyId>(m));
    if (!std::filesystem::exists(path)) {
      throw ConfigError("model file for " + party_name(static_cast<PartyId>(m)) + " missing: " +
                        path.string());
    }
    out.push_back(ensemble_from_json(read_json_file(path.string())));
    if (out.back().owner != m) {
      throw ConfigError(path.string() + " belongs to " + party_name(out.back().owner));
    }
  }
  check_model_set(out);
  return out;
}

}  // namespace mpfedxgb

#pragma once

// Fixed-dimension plan encoding over composite-key channels. Each registry key
// owns a block of slots (count, card, cost-cpu, cost-io, weight -- whichever
// channels are enabled, in that order); one trailing slot carries the DOP.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "dopkit/errors.hpp"
#include "dopkit/plan.hpp"

namespace dopkit {

struct ChannelSet {
  bool count = true;
  bool card = true;
  bool cost = false;  // cost channel is two slots: cpu, io
  bool weight = true;

  std::size_t width() const {
    return (count ? 1u : 0u) + (card ? 1u : 0u) + (cost ? 2u : 0u) + (weight ? 1u : 0u);
  }

  friend bool operator==(const ChannelSet&, const ChannelSet&) = default;

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    if (count) out.push_back("count");
    if (card) out.push_back("card");
    if (cost) out.push_back("cost");
    if (weight) out.push_back("weight");
    return out;
  }

  // Comma-separated list, e.g. "count,card,weight".
  static ChannelSet parse(const std::string& text) {
    ChannelSet s{false, false, false, false};
    std::size_t start = 0;
    while (start <= text.size()) {
      std::size_t end = text.find(',', start);
      if (end == std::string::npos) end = text.size();
      const std::string name = text.substr(start, end - start);
      if (name == "count")
        s.count = true;
      else if (name == "card")
        s.card = true;
      else if (name == "cost")
        s.cost = true;
      else if (name == "weight")
        s.weight = true;
      else if (!name.empty())
        throw InvalidArgument("unknown feature channel \"" + name + "\"");
      start = end + 1;
    }
    if (s.width() == 0) throw InvalidArgument("channel set is empty");
    return s;
  }
};

inline const ChannelSet kDefaultChannels{true, true, false, true};

struct FeatureRegistry {
  std::vector<CompositeKey> keys;  // slot order: first appearance
  ChannelSet channels;

  std::size_t dimension() const { return keys.size() * channels.width() + 1; }

  std::optional<std::size_t> index_of(const CompositeKey& key) const {
    const auto it = index_.find(key);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  void rebuild_index() {
    index_.clear();
    for (std::size_t i = 0; i < keys.size(); ++i) index_.emplace(keys[i], i);
  }

  // Stable across processes: FNV-1a over the canonical registry text.
  std::uint64_t fingerprint() const {
    std::uint64_t h = 1469598103934665603ULL;
    const auto mix = [&h](const std::string& s) {
      for (const unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
      }
      h ^= 0xFFu;  // field separator
      h *= 1099511628211ULL;
    };
    for (const auto& name : channels.names()) mix(name);
    for (const auto& key : keys) mix(key.to_string());
    return h;
  }

  // One name per slot: "<key>#<channel>" blocks then the trailing "dop".
  std::vector<std::string> slot_names() const {
    std::vector<std::string> names;
    names.reserve(dimension());
    for (const auto& key : keys) {
      const std::string base = key.to_string();
      if (channels.count) names.push_back(base + "#count");
      if (channels.card) names.push_back(base + "#card");
      if (channels.cost) {
        names.push_back(base + "#cost_cpu");
        names.push_back(base + "#cost_io");
      }
      if (channels.weight) names.push_back(base + "#weight");
    }
    names.push_back("dop");
    return names;
  }

 private:
  std::map<CompositeKey, std::size_t> index_;
};

// Registry keys appear in first-appearance order over the plan list sorted by
// plan_id, so the layout does not depend on input order.
inline FeatureRegistry build_registry(const std::vector<QueryPlan>& plans,
                                      const ChannelSet& channels = kDefaultChannels) {
  if (plans.empty()) throw EmptyCorpus("cannot build a feature registry from zero plans");
  std::vector<const QueryPlan*> sorted;
  sorted.reserve(plans.size());
  for (const auto& p : plans) sorted.push_back(&p);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const QueryPlan* a, const QueryPlan* b) { return a->plan_id < b->plan_id; });

  FeatureRegistry registry;
  registry.channels = channels;
  std::set<CompositeKey> seen;
  for (const QueryPlan* plan : sorted)
    for (const auto& node : plan->nodes) {
      CompositeKey key = composite_key(node);
      if (seen.insert(key).second) registry.keys.push_back(std::move(key));
    }
  registry.rebuild_index();
  return registry;
}

struct FeatureVector {
  std::vector<double> values;
  std::uint64_t registry_fingerprint = 0;

  std::size_t dimension() const { return values.size(); }
  double dop() const { return values.empty() ? 0.0 : values.back(); }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// --- structural measures ------------------------------------------------------

// height(leaf) = 1; height(n) = 1 + max over children.
inline std::unordered_map<int, int> node_heights(const QueryPlan& plan) {
  std::unordered_map<int, const OperatorNode*> by_id;
  for (const auto& n : plan.nodes) by_id.emplace(n.node_id, &n);
  std::unordered_map<int, int> heights;
  // children precede parents in a reverse topological walk; plans are
  // validated trees so a simple recursive lambda suffices.
  auto height = [&](auto&& self, int id) -> int {
    if (const auto it = heights.find(id); it != heights.end()) return it->second;
    const OperatorNode* n = by_id.at(id);
    int h = 1;
    for (const int c : n->children) h = std::max(h, 1 + self(self, c));
    heights[id] = h;
    return h;
  };
  for (const auto& n : plan.nodes) height(height, n.node_id);
  return heights;
}

// weight(leaf) = est_output_bytes; weight(n) = sum of child weight x child height.
inline std::unordered_map<int, double> node_weights(const QueryPlan& plan) {
  std::unordered_map<int, const OperatorNode*> by_id;
  for (const auto& n : plan.nodes) by_id.emplace(n.node_id, &n);
  const auto heights = node_heights(plan);
  std::unordered_map<int, double> weights;
  auto weight = [&](auto&& self, int id) -> double {
    if (const auto it = weights.find(id); it != weights.end()) return it->second;
    const OperatorNode* n = by_id.at(id);
    double w;
    if (n->children.empty()) {
      w = n->est_output_bytes;
    } else {
      // accumulate in node-id order so the sum is exactly invariant under
      // sibling permutation
      std::vector<int> ordered = n->children;
      std::sort(ordered.begin(), ordered.end());
      w = 0.0;
      for (const int c : ordered) w += self(self, c) * heights.at(c);
    }
    weights[id] = w;
    return w;
  };
  for (const auto& n : plan.nodes) weight(weight, n.node_id);
  return weights;
}

// --- featurization ---------------------------------------------------------------

struct FeaturizeOptions {
  // log1p on card/cost/weight slots; counts and the DOP slot stay raw.
  bool log1p = false;
};

struct FeaturizeResult {
  FeatureVector features;
  std::size_t unknown_keys = 0;  // distinct plan keys absent from the registry
};

inline FeaturizeResult featurize(const QueryPlan& plan, const FeatureRegistry& registry,
                                 const FeaturizeOptions& options = {}) {
  FeaturizeResult result;
  result.features.values.assign(registry.dimension(), 0.0);
  result.features.registry_fingerprint = registry.fingerprint();

  const ChannelSet& ch = registry.channels;
  const std::size_t width = ch.width();
  std::unordered_map<int, double> weights;
  if (ch.weight) weights = node_weights(plan);

  std::set<CompositeKey> unknown;
  for (const auto& node : plan.nodes) {
    const CompositeKey key = composite_key(node);
    const auto slot = registry.index_of(key);
    if (!slot) {
      unknown.insert(key);
      continue;
    }
    std::size_t at = *slot * width;
    auto& values = result.features.values;
    if (ch.count) values[at++] += 1.0;
    if (ch.card) values[at++] += node.est_output_bytes;
    if (ch.cost) {
      values[at++] += node.est_cpu_cost;
      values[at++] += node.est_io_cost;
    }
    if (ch.weight) values[at++] += weights.at(node.node_id);
  }
  result.unknown_keys = unknown.size();

  if (options.log1p) {
    auto& values = result.features.values;
    for (std::size_t k = 0; k < registry.keys.size(); ++k) {
      std::size_t at = k * width;
      if (ch.count) ++at;  // counts stay raw
      if (ch.card) values[at] = std::log1p(values[at]), ++at;
      if (ch.cost) {
        values[at] = std::log1p(values[at]);
        values[at + 1] = std::log1p(values[at + 1]);
        at += 2;
      }
      if (ch.weight) values[at] = std::log1p(values[at]);
    }
  }
  return result;
}

inline FeatureVector attach_dop(const FeatureVector& vector, int dop) {
  if (dop < 1) throw InvalidDop("dop must be >= 1, got " + std::to_string(dop));
  if (vector.values.empty()) throw DimensionMismatch("feature vector has no slots");
  FeatureVector out = vector;
  out.values.back() = static_cast<double>(dop);
  return out;
}

// --- registry file -----------------------------------------------------------------

inline constexpr int kRegistryFormatVersion = 1;

inline nlohmann::json registry_to_json(const FeatureRegistry& registry) {
  nlohmann::json j;
  j["format"] = "dopkit-registry";
  j["format_version"] = kRegistryFormatVersion;
  j["channels"] = registry.channels.names();
  j["fingerprint"] = registry.fingerprint();
  j["keys"] = nlohmann::json::array();
  for (const auto& key : registry.keys) {
    nlohmann::json kj;
    kj["op"] = key.op;
    kj["row_batch"] = key.row_batch == RowBatch::Row ? "row" : "batch";
    kj["parallel"] = key.parallel_serial == ParallelSerial::Parallel;
    nlohmann::json attrs = nlohmann::json::object();
    for (const auto& [k, v] : key.attrs) attrs[k] = v;
    kj["attrs"] = attrs;
    j["keys"].push_back(std::move(kj));
  }
  return j;
}

inline std::string save_registry(const FeatureRegistry& registry) {
  return registry_to_json(registry).dump(2) + "\n";
}

inline FeatureRegistry load_registry(const std::string& bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedDocument(std::string("invalid registry JSON: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "dopkit-registry")
    throw MalformedDocument("not a registry file");
  if (j.value("format_version", -1) != kRegistryFormatVersion)
    throw VersionMismatch("unsupported registry format version");

  FeatureRegistry registry;
  ChannelSet ch{false, false, false, false};
  for (const auto& name : j.at("channels")) {
    const std::string s = name.get<std::string>();
    if (s == "count")
      ch.count = true;
    else if (s == "card")
      ch.card = true;
    else if (s == "cost")
      ch.cost = true;
    else if (s == "weight")
      ch.weight = true;
    else
      throw MalformedDocument("unknown channel \"" + s + "\" in registry");
  }
  registry.channels = ch;
  for (const auto& kj : j.at("keys")) {
    CompositeKey key;
    key.op = kj.at("op").get<std::string>();
    const std::string rb = kj.at("row_batch").get<std::string>();
    if (rb != "row" && rb != "batch") throw UnknownMode("unknown row_batch in registry");
    key.row_batch = rb == "row" ? RowBatch::Row : RowBatch::Batch;
    key.parallel_serial =
        kj.at("parallel").get<bool>() ? ParallelSerial::Parallel : ParallelSerial::Serial;
    if (const auto it = kj.find("attrs"); it != kj.end())
      for (const auto& [k, v] : it->items()) key.attrs.emplace_back(k, v.get<std::string>());
    std::sort(key.attrs.begin(), key.attrs.end());
    registry.keys.push_back(std::move(key));
  }
  registry.rebuild_index();
  return registry;
}

}  // namespace dopkit

#pragma once

// Query plan trees: physical operator nodes with execution modes and optimizer
// estimates, the composite keys identifying operator configurations, and the
// JSON plan format (one object per file, or newline-delimited for batches).

#include <algorithm>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dopkit/errors.hpp"

namespace dopkit {

enum class RowBatch { Row, Batch };
enum class ParallelSerial { Parallel, Serial };

using Attr = std::pair<std::string, std::string>;

struct OperatorNode {
  int node_id = 0;
  std::string op;
  RowBatch row_batch = RowBatch::Row;
  ParallelSerial parallel_serial = ParallelSerial::Serial;
  std::vector<Attr> optional_attrs;  // canonically sorted by name
  double est_output_bytes = 0.0;
  double est_cpu_cost = 0.0;
  double est_io_cost = 0.0;
  std::vector<int> children;

  friend bool operator==(const OperatorNode&, const OperatorNode&) = default;
};

struct QueryPlan {
  std::string plan_id;
  std::string template_id;  // empty = absent
  std::string corpus_id;    // empty = absent
  int root = 0;
  std::vector<OperatorNode> nodes;  // document order

  const OperatorNode& node(int id) const {
    for (const auto& n : nodes)
      if (n.node_id == id) return n;
    throw DanglingChild("unknown node_id " + std::to_string(id) + " in plan " + plan_id);
  }

  friend bool operator==(const QueryPlan&, const QueryPlan&) = default;
};

// Identity of an operator configuration. Equality is structural over all four
// fields; attrs are kept sorted by name so input order never matters.
struct CompositeKey {
  std::string op;
  RowBatch row_batch = RowBatch::Row;
  ParallelSerial parallel_serial = ParallelSerial::Serial;
  std::vector<Attr> attrs;

  friend bool operator==(const CompositeKey&, const CompositeKey&) = default;
  friend bool operator<(const CompositeKey& a, const CompositeKey& b) {
    if (a.op != b.op) return a.op < b.op;
    if (a.row_batch != b.row_batch) return a.row_batch < b.row_batch;
    if (a.parallel_serial != b.parallel_serial) return a.parallel_serial < b.parallel_serial;
    return a.attrs < b.attrs;
  }

  // "op/row|batch/parallel|serial/name=value,..." -- used for CSV slot names
  // and registry fingerprints.
  std::string to_string() const {
    std::string s = op;
    s += '/';
    s += row_batch == RowBatch::Row ? "row" : "batch";
    s += '/';
    s += parallel_serial == ParallelSerial::Parallel ? "parallel" : "serial";
    s += '/';
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      if (i) s += ',';
      s += attrs[i].first;
      s += '=';
      s += attrs[i].second;
    }
    return s;
  }
};

inline CompositeKey composite_key(const OperatorNode& node) {
  CompositeKey key{node.op, node.row_batch, node.parallel_serial, node.optional_attrs};
  std::sort(key.attrs.begin(), key.attrs.end());
  return key;
}

// --- validation ------------------------------------------------------------

// Throws on hard invariant violations; returns human-readable warnings for
// soft ones (a plan with no parallel operator is legal but unusual input).
inline std::vector<std::string> validate_plan(const QueryPlan& plan) {
  if (plan.nodes.empty()) throw MalformedDocument("plan " + plan.plan_id + " has no nodes");

  std::unordered_map<int, const OperatorNode*> by_id;
  for (const auto& n : plan.nodes) {
    if (!by_id.emplace(n.node_id, &n).second)
      throw DuplicateNodeId("plan " + plan.plan_id + ": node_id " + std::to_string(n.node_id) +
                            " appears more than once");
    if (n.est_output_bytes < 0 || n.est_cpu_cost < 0 || n.est_io_cost < 0)
      throw NegativeEstimate("plan " + plan.plan_id + ": node " + std::to_string(n.node_id) +
                             " has a negative estimate");
  }
  if (!by_id.count(plan.root))
    throw DanglingChild("plan " + plan.plan_id + ": root " + std::to_string(plan.root) +
                        " is not a node");

  // Walk from the root. A node seen while still on the stack is its own
  // ancestor; a node seen twice otherwise has two parents.
  enum class Mark { Unseen, OnStack, Done };
  std::unordered_map<int, Mark> mark;
  for (const auto& n : plan.nodes) mark[n.node_id] = Mark::Unseen;

  struct Frame {
    int id;
    std::size_t next_child;
  };
  std::vector<Frame> stack{{plan.root, 0}};
  mark[plan.root] = Mark::OnStack;
  while (!stack.empty()) {
    Frame& frame = stack.back();
    const OperatorNode& n = *by_id.at(frame.id);
    if (frame.next_child == n.children.size()) {
      mark[frame.id] = Mark::Done;
      stack.pop_back();
      continue;
    }
    const int child = n.children[frame.next_child++];
    const auto it = by_id.find(child);
    if (it == by_id.end())
      throw DanglingChild("plan " + plan.plan_id + ": node " + std::to_string(frame.id) +
                          " references unknown child " + std::to_string(child));
    switch (mark[child]) {
      case Mark::OnStack:
        throw CycleDetected("plan " + plan.plan_id + ": node " + std::to_string(child) +
                            " is its own ancestor");
      case Mark::Done:
        throw MultipleParents("plan " + plan.plan_id + ": node " + std::to_string(child) +
                              " has more than one parent");
      case Mark::Unseen:
        mark[child] = Mark::OnStack;
        stack.push_back({child, 0});
        break;
    }
  }
  for (const auto& [id, m] : mark)
    if (m != Mark::Done)
      throw UnreachableNode("plan " + plan.plan_id + ": node " + std::to_string(id) +
                            " is not reachable from the root");

  std::vector<std::string> warnings;
  const bool any_parallel =
      std::any_of(plan.nodes.begin(), plan.nodes.end(),
                  [](const OperatorNode& n) { return n.parallel_serial == ParallelSerial::Parallel; });
  if (!any_parallel)
    warnings.push_back("plan " + plan.plan_id + " has no parallel operator");
  return warnings;
}

// --- JSON format -------------------------------------------------------------

namespace detail {

inline const nlohmann::json& require_field(const nlohmann::json& obj, const char* name) {
  const auto it = obj.find(name);
  if (it == obj.end())
    throw MalformedDocument(std::string("missing required field \"") + name + "\"");
  return *it;
}

inline OperatorNode node_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw MalformedDocument("node entry is not an object");
  OperatorNode n;
  const auto& id = require_field(j, "id");
  if (!id.is_number_integer()) throw MalformedDocument("node \"id\" must be an integer");
  n.node_id = id.get<int>();

  const auto& op = require_field(j, "op");
  if (!op.is_string()) throw MalformedDocument("node \"op\" must be a string");
  n.op = op.get<std::string>();

  const auto& rb = require_field(j, "row_batch");
  if (!rb.is_string()) throw UnknownMode("node \"row_batch\" must be \"row\" or \"batch\"");
  const std::string rb_s = rb.get<std::string>();
  if (rb_s == "row")
    n.row_batch = RowBatch::Row;
  else if (rb_s == "batch")
    n.row_batch = RowBatch::Batch;
  else
    throw UnknownMode("unknown row_batch value \"" + rb_s + "\"");

  const auto& par = require_field(j, "parallel");
  if (!par.is_boolean()) throw UnknownMode("node \"parallel\" must be a boolean");
  n.parallel_serial = par.get<bool>() ? ParallelSerial::Parallel : ParallelSerial::Serial;

  if (const auto it = j.find("attrs"); it != j.end()) {
    if (!it->is_object()) throw MalformedDocument("node \"attrs\" must be an object");
    for (const auto& [k, v] : it->items()) {
      if (!v.is_string()) throw MalformedDocument("attr \"" + k + "\" must be a string");
      n.optional_attrs.emplace_back(k, v.get<std::string>());
    }
    std::sort(n.optional_attrs.begin(), n.optional_attrs.end());
  }

  const auto read_cost = [&](const char* name) {
    const auto& v = require_field(j, name);
    if (!v.is_number()) throw MalformedDocument(std::string("node \"") + name + "\" must be a number");
    return v.get<double>();
  };
  n.est_output_bytes = read_cost("est_output_bytes");
  n.est_cpu_cost = read_cost("est_cpu_cost");
  n.est_io_cost = read_cost("est_io_cost");

  const auto& children = require_field(j, "children");
  if (!children.is_array()) throw MalformedDocument("node \"children\" must be an array");
  for (const auto& c : children) {
    if (!c.is_number_integer()) throw MalformedDocument("child ids must be integers");
    n.children.push_back(c.get<int>());
  }
  return n;
}

inline QueryPlan plan_from_json(const nlohmann::json& j, std::vector<std::string>* warnings) {
  if (!j.is_object()) throw MalformedDocument("plan document is not an object");
  QueryPlan plan;
  const auto& pid = require_field(j, "plan_id");
  if (!pid.is_string()) throw MalformedDocument("\"plan_id\" must be a string");
  plan.plan_id = pid.get<std::string>();
  if (const auto it = j.find("template_id"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw MalformedDocument("\"template_id\" must be a string");
    plan.template_id = it->get<std::string>();
  }
  if (const auto it = j.find("corpus_id"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) throw MalformedDocument("\"corpus_id\" must be a string");
    plan.corpus_id = it->get<std::string>();
  }
  const auto& root = require_field(j, "root");
  if (!root.is_number_integer()) throw MalformedDocument("\"root\" must be an integer");
  plan.root = root.get<int>();
  const auto& nodes = require_field(j, "nodes");
  if (!nodes.is_array()) throw MalformedDocument("\"nodes\" must be an array");
  for (const auto& nj : nodes) plan.nodes.push_back(node_from_json(nj));

  auto w = validate_plan(plan);
  if (warnings) warnings->insert(warnings->end(), w.begin(), w.end());
  return plan;
}

}  // namespace detail

inline QueryPlan parse_plan(const std::string& document,
                            std::vector<std::string>* warnings = nullptr) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(document);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedDocument(std::string("invalid JSON: ") + e.what());
  }
  return detail::plan_from_json(j, warnings);
}

// Accepts a single JSON object or newline-delimited objects.
inline std::vector<QueryPlan> parse_plans(const std::string& document,
                                          std::vector<std::string>* warnings = nullptr) {
  std::vector<QueryPlan> plans;
  std::size_t start = 0;
  bool any_line = false;
  while (start < document.size()) {
    std::size_t end = document.find('\n', start);
    if (end == std::string::npos) end = document.size();
    std::string line = document.substr(start, end - start);
    start = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    // A pretty-printed single document spans lines; fall back to whole-text
    // parsing on the first failure of line-splitting.
    try {
      plans.push_back(parse_plan(line, warnings));
      any_line = true;
    } catch (const MalformedDocument&) {
      if (any_line) throw;
      if (warnings) warnings->clear();
      return {parse_plan(document, warnings)};
    }
  }
  if (plans.empty()) throw MalformedDocument("document contains no plans");
  return plans;
}

inline nlohmann::json plan_to_json(const QueryPlan& plan) {
  nlohmann::json j;
  j["plan_id"] = plan.plan_id;
  if (!plan.template_id.empty()) j["template_id"] = plan.template_id;
  if (!plan.corpus_id.empty()) j["corpus_id"] = plan.corpus_id;
  j["root"] = plan.root;
  j["nodes"] = nlohmann::json::array();
  for (const auto& n : plan.nodes) {
    nlohmann::json nj;
    nj["id"] = n.node_id;
    nj["op"] = n.op;
    nj["row_batch"] = n.row_batch == RowBatch::Row ? "row" : "batch";
    nj["parallel"] = n.parallel_serial == ParallelSerial::Parallel;
    if (!n.optional_attrs.empty()) {
      nlohmann::json attrs = nlohmann::json::object();
      for (const auto& [k, v] : n.optional_attrs) attrs[k] = v;
      nj["attrs"] = attrs;
    }
    nj["est_output_bytes"] = n.est_output_bytes;
    nj["est_cpu_cost"] = n.est_cpu_cost;
    nj["est_io_cost"] = n.est_io_cost;
    nj["children"] = n.children;
    j["nodes"].push_back(std::move(nj));
  }
  return j;
}

inline std::string serialize_plan(const QueryPlan& plan) { return plan_to_json(plan).dump(); }

inline std::string serialize_plans(const std::vector<QueryPlan>& plans) {
  std::string out;
  for (const auto& p : plans) {
    out += serialize_plan(p);
    out += '\n';
  }
  return out;
}

}  // namespace dopkit

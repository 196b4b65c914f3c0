#pragma once

// Shared fixtures for the test suites: a small random plan generator that is
// independent of the synthetic-workload generator under test.

#include <string>
#include <vector>

#include "dopkit/plan.hpp"
#include "dopkit/rng.hpp"

namespace dopkit::testutil {

inline const std::vector<std::string> kOps = {
    "TableScan", "IndexScan", "HashMatch", "MergeJoin", "Sort", "StreamAggregate", "Exchange",
};

inline OperatorNode random_node(Rng& rng, int id) {
  OperatorNode n;
  n.node_id = id;
  n.op = kOps[rng.below(kOps.size())];
  n.row_batch = rng.uniform() < 0.5 ? RowBatch::Row : RowBatch::Batch;
  n.parallel_serial = rng.uniform() < 0.6 ? ParallelSerial::Parallel : ParallelSerial::Serial;
  if (n.op == "HashMatch") {
    const char* logical = rng.uniform() < 0.5 ? "Join" : "Aggregate";
    n.optional_attrs.emplace_back("logical", logical);
  }
  if (rng.uniform() < 0.2) n.optional_attrs.emplace_back("IsAdaptive", "true");
  std::sort(n.optional_attrs.begin(), n.optional_attrs.end());
  n.est_output_bytes = rng.uniform(0.0, 1e6);
  n.est_cpu_cost = rng.uniform(0.0, 100.0);
  n.est_io_cost = rng.uniform(0.0, 100.0);
  return n;
}

// Random tree: node 0 is the root, every later node hangs off an earlier one.
inline QueryPlan random_plan(Rng& rng, const std::string& plan_id, int max_nodes = 24) {
  QueryPlan plan;
  plan.plan_id = plan_id;
  plan.root = 0;
  const int n = rng.uniform_int(1, max_nodes);
  for (int i = 0; i < n; ++i) plan.nodes.push_back(random_node(rng, i));
  for (int i = 1; i < n; ++i) {
    const int parent = rng.uniform_int(0, i - 1);
    plan.nodes[parent].children.push_back(i);
  }
  return plan;
}

// Random tree with depth bounded exactly by max_depth (chains allowed).
inline QueryPlan random_plan_with_depth(Rng& rng, const std::string& plan_id, int max_depth) {
  QueryPlan plan;
  plan.plan_id = plan_id;
  plan.root = 0;
  plan.nodes.push_back(random_node(rng, 0));
  std::vector<std::pair<int, int>> frontier{{0, 1}};  // (node_id, depth)
  int next_id = 1;
  while (!frontier.empty() && next_id < 40) {
    const auto [id, depth] = frontier.back();
    frontier.pop_back();
    if (depth >= max_depth) continue;
    const int kids = rng.uniform_int(0, 3);
    for (int k = 0; k < kids && next_id < 40; ++k) {
      plan.nodes.push_back(random_node(rng, next_id));
      plan.nodes[static_cast<std::size_t>(id)].children.push_back(next_id);
      frontier.emplace_back(next_id, depth + 1);
      ++next_id;
    }
  }
  return plan;
}

}  // namespace dopkit::testutil

#pragma once

// Synthetic workload generator with a parametric ground-truth latency oracle.
// Four behavioral archetypes cover the profiles seen in practice: flat (no
// benefit from parallelism), well-parallelizable, saturating with contention,
// and a disk-spill cliff beyond a memory-bound DOP.
//
//   t(d) = serial + parallel / min(d, saturation) + contention * d
//          + (spill penalty if d > spill_dop)        [SpillCliff only]
//
// multiplied by lognormal noise exp(sigma * z). Generated plans carry the
// template's latency parameters in their operator estimates (leaf bytes track
// the parallel work, the root tracks the serial tail), so featurization keeps
// the signal a regressor needs.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dopkit/data.hpp"
#include "dopkit/errors.hpp"
#include "dopkit/plan.hpp"
#include "dopkit/rng.hpp"

namespace dopkit {

enum class ArchetypeKind { Flat, Parallelizable, Saturating, SpillCliff };

inline std::string to_string(ArchetypeKind kind) {
  switch (kind) {
    case ArchetypeKind::Flat: return "flat";
    case ArchetypeKind::Parallelizable: return "parallelizable";
    case ArchetypeKind::Saturating: return "saturating";
    case ArchetypeKind::SpillCliff: return "spillcliff";
  }
  return "?";
}

inline ArchetypeKind archetype_kind_from_string(const std::string& s) {
  if (s == "flat") return ArchetypeKind::Flat;
  if (s == "parallelizable") return ArchetypeKind::Parallelizable;
  if (s == "saturating") return ArchetypeKind::Saturating;
  if (s == "spillcliff") return ArchetypeKind::SpillCliff;
  throw InvalidSpec("unknown archetype kind \"" + s + "\"");
}

struct TemplateArchetype {
  ArchetypeKind kind = ArchetypeKind::Parallelizable;

  // latency parameters (milliseconds)
  double serial_ms = 20.0;
  double parallel_ms = 1600.0;
  int saturation_dop = 80;
  double contention_per_dop_ms = 0.25;
  int spill_dop = 20;            // SpillCliff only
  double spill_penalty_ms = 0.0; // SpillCliff only

  // plan shape
  int min_depth = 2;
  int max_depth = 4;
  int min_fanout = 1;
  int max_fanout = 3;
  std::vector<std::string> leaf_ops{"TableScan"};
  std::vector<std::string> internal_ops{"HashMatch"};
  double parallel_fraction = 0.8;
  double est_scale_lo = 0.5;  // per-node estimate spread
  double est_scale_hi = 1.5;
};

inline TemplateArchetype default_archetype(ArchetypeKind kind) {
  TemplateArchetype a;
  a.kind = kind;
  switch (kind) {
    case ArchetypeKind::Flat:
      a.serial_ms = 120.0;
      a.parallel_ms = 60.0;
      a.saturation_dop = 4;
      a.contention_per_dop_ms = 0.2;
      a.leaf_ops = {"ClusteredIndexSeek", "ConstantScan"};
      a.internal_ops = {"NestedLoops", "ComputeScalar", "StreamAggregate"};
      a.parallel_fraction = 0.25;
      break;
    case ArchetypeKind::Parallelizable:
      a.serial_ms = 20.0;
      a.parallel_ms = 1600.0;
      a.saturation_dop = 80;
      a.contention_per_dop_ms = 0.25;
      a.leaf_ops = {"ColumnstoreScan", "TableScan"};
      a.internal_ops = {"HashMatch", "Exchange", "BatchSort"};
      a.parallel_fraction = 0.9;
      break;
    case ArchetypeKind::Saturating:
      a.serial_ms = 60.0;
      a.parallel_ms = 900.0;
      a.saturation_dop = 16;
      a.contention_per_dop_ms = 0.8;
      a.leaf_ops = {"IndexScan", "RowStoreScan"};
      a.internal_ops = {"MergeJoin", "Sort", "BitmapCreate"};
      a.parallel_fraction = 0.6;
      break;
    case ArchetypeKind::SpillCliff:
      a.serial_ms = 30.0;
      a.parallel_ms = 1200.0;
      a.saturation_dop = 40;
      a.contention_per_dop_ms = 0.3;
      a.spill_dop = 20;
      a.spill_penalty_ms = 1500.0;
      a.leaf_ops = {"ColumnstoreScan", "TableSpool"};
      a.internal_ops = {"GraceHashMatch", "SortSpill", "LazySpool"};
      a.parallel_fraction = 0.8;
      break;
  }
  return a;
}

// Closed form, no noise.
inline double ground_truth_latency(const TemplateArchetype& archetype, int dop) {
  if (dop < 1) throw InvalidDop("dop must be >= 1, got " + std::to_string(dop));
  double t = archetype.serial_ms +
             archetype.parallel_ms / static_cast<double>(std::min(dop, archetype.saturation_dop)) +
             archetype.contention_per_dop_ms * static_cast<double>(dop);
  if (archetype.kind == ArchetypeKind::SpillCliff && dop > archetype.spill_dop)
    t += archetype.spill_penalty_ms;
  return t;
}

// Closed form times lognormal noise; sigma = 0 reduces to the exact form.
inline double ground_truth_latency(const TemplateArchetype& archetype, int dop, double sigma,
                                   Rng& rng) {
  const double exact = ground_truth_latency(archetype, dop);
  if (sigma == 0.0) return exact;
  return exact * std::exp(sigma * rng.normal());
}

struct SynthEntry {
  TemplateArchetype archetype;
  std::size_t n_templates = 1;
  std::size_t n_plans_per_template = 1;
};

struct SynthOptions {
  double sigma = 0.02;           // lognormal noise on measured latencies
  double scale = 1.0;            // data-volume multiplier (latencies and bytes)
  std::string corpus_id = "synth";
  double template_param_jitter = 0.5;  // log-uniform spread of per-template params
  double plan_jitter = 0.08;           // log-uniform spread across a template's plans
};

struct SynthCorpus {
  std::string corpus_id;
  std::vector<QueryPlan> plans;
  LatencyGrid grid;
  std::vector<int> dop_set;
  // per-plan oracle parameters, index-aligned with `plans`
  std::vector<TemplateArchetype> plan_truth;
};

namespace detail {

inline void validate_entry(const SynthEntry& entry, const std::vector<int>& dop_set) {
  const TemplateArchetype& a = entry.archetype;
  if (entry.n_templates < 1 || entry.n_plans_per_template < 1)
    throw InvalidSpec("entry needs at least one template and one plan per template");
  if (a.serial_ms < 0 || a.parallel_ms < 0 || a.contention_per_dop_ms < 0 ||
      a.spill_penalty_ms < 0)
    throw InvalidSpec("latency parameters must be non-negative");
  if (a.saturation_dop < 1) throw InvalidSpec("saturation_dop must be >= 1");
  if (a.kind == ArchetypeKind::SpillCliff &&
      std::find(dop_set.begin(), dop_set.end(), a.spill_dop) == dop_set.end())
    throw InvalidSpec("spill_dop " + std::to_string(a.spill_dop) + " is not in the dop set");
  if (a.min_depth < 1 || a.max_depth < a.min_depth)
    throw InvalidSpec("bad depth range");
  if (a.min_fanout < 1 || a.max_fanout < a.min_fanout)
    throw InvalidSpec("bad fanout range");
  if (a.leaf_ops.empty() || a.internal_ops.empty())
    throw InvalidSpec("operator vocabulary must not be empty");
  if (!(a.est_scale_hi >= a.est_scale_lo) || a.est_scale_lo <= 0)
    throw InvalidSpec("bad estimate range");
}

// Template tree whose estimates encode the latency parameters.
inline QueryPlan build_template_tree(const TemplateArchetype& arch, Rng& rng) {
  constexpr int kMaxNodes = 48;
  QueryPlan plan;
  plan.root = 0;
  plan.nodes.reserve(kMaxNodes);  // node references below must stay valid
  const int depth = rng.uniform_int(arch.min_depth, arch.max_depth);

  struct Pending {
    int id;
    int level;
  };
  std::vector<Pending> queue{{0, 1}};
  plan.nodes.emplace_back();
  plan.nodes[0].node_id = 0;
  int next_id = 1;
  while (!queue.empty()) {
    const Pending cur = queue.front();
    queue.erase(queue.begin());
    OperatorNode& node = plan.nodes[static_cast<std::size_t>(cur.id)];
    const bool leaf = cur.level >= depth || next_id >= kMaxNodes;
    const auto& vocab = leaf ? arch.leaf_ops : arch.internal_ops;
    node.op = vocab[rng.below(vocab.size())];
    node.parallel_serial =
        rng.uniform() < arch.parallel_fraction ? ParallelSerial::Parallel : ParallelSerial::Serial;
    const double batch_prob = node.parallel_serial == ParallelSerial::Parallel ? 0.7 : 0.3;
    node.row_batch = rng.uniform() < batch_prob ? RowBatch::Batch : RowBatch::Row;
    if (node.op.find("Match") != std::string::npos) {
      const char* logical = rng.uniform() < 0.7 ? "Join" : "Aggregate";
      node.optional_attrs.emplace_back("logical", logical);
    }
    if (!leaf) {
      const int fanout = rng.uniform_int(arch.min_fanout, arch.max_fanout);
      for (int k = 0; k < fanout && next_id < kMaxNodes; ++k) {
        node.children.push_back(next_id);
        plan.nodes.emplace_back();
        plan.nodes.back().node_id = next_id;
        queue.push_back({next_id, cur.level + 1});
        ++next_id;
      }
    }
  }

  // keep at least one operator parallel
  const bool any_parallel = std::any_of(plan.nodes.begin(), plan.nodes.end(), [](const auto& n) {
    return n.parallel_serial == ParallelSerial::Parallel;
  });
  if (!any_parallel) plan.nodes[0].parallel_serial = ParallelSerial::Parallel;

  // estimates: leaves share the parallel-work budget, internals apply a
  // selectivity to their children, the root tracks the serial tail
  std::size_t n_leaves = 0;
  for (const auto& n : plan.nodes)
    if (n.children.empty()) ++n_leaves;
  const double leaf_budget = arch.parallel_ms * 1e4 / static_cast<double>(n_leaves);
  const auto spread = [&] { return rng.uniform(arch.est_scale_lo, arch.est_scale_hi); };
  // children were appended after their parents, so a reverse walk is bottom-up
  for (auto it = plan.nodes.rbegin(); it != plan.nodes.rend(); ++it) {
    OperatorNode& node = *it;
    if (node.children.empty()) {
      node.est_output_bytes = leaf_budget * spread();
    } else {
      double child_bytes = 0.0;
      for (const int c : node.children)
        child_bytes += plan.nodes[static_cast<std::size_t>(c)].est_output_bytes;
      node.est_output_bytes = child_bytes * rng.uniform(0.2, 0.8);
    }
    node.est_cpu_cost = node.est_output_bytes / 1e4 * spread();
    node.est_io_cost = node.est_output_bytes / 2e4 * spread();
  }
  plan.nodes[0].est_output_bytes = arch.serial_ms * 1e3 * spread();
  return plan;
}

}  // namespace detail

// Deterministic under seed: templates and plans are driven by derived streams,
// so the corpus is reproducible and insensitive to entry evaluation order.
inline SynthCorpus generate_corpus(const std::vector<SynthEntry>& spec,
                                   const std::vector<int>& dop_set, std::uint64_t seed,
                                   const SynthOptions& options = {}) {
  if (spec.empty()) throw InvalidSpec("corpus spec has no entries");
  if (dop_set.empty()) throw EmptyDopSet("dop set is empty");
  for (const auto& entry : spec) detail::validate_entry(entry, dop_set);

  SynthCorpus corpus;
  corpus.corpus_id = options.corpus_id;
  corpus.dop_set = dop_set;
  std::sort(corpus.dop_set.begin(), corpus.dop_set.end());
  const int max_dop = corpus.dop_set.back();

  std::size_t template_index = 0;
  for (const auto& entry : spec) {
    for (std::size_t t = 0; t < entry.n_templates; ++t, ++template_index) {
      Rng rng = derived_stream(seed, template_index);

      TemplateArchetype params = entry.archetype;
      const double jitter = options.template_param_jitter;
      const auto vary = [&](double v) { return v * std::exp(rng.uniform(-jitter, jitter)); };
      params.serial_ms = vary(params.serial_ms) * options.scale;
      params.parallel_ms = vary(params.parallel_ms) * options.scale;
      params.contention_per_dop_ms = vary(params.contention_per_dop_ms) * options.scale;
      params.spill_penalty_ms = vary(params.spill_penalty_ms) * options.scale;
      params.saturation_dop = std::clamp(
          static_cast<int>(std::lround(params.saturation_dop *
                                       std::exp(rng.uniform(-jitter / 2, jitter / 2)))),
          1, max_dop);

      const QueryPlan tree = detail::build_template_tree(params, rng);
      const std::string template_id =
          to_string(params.kind) + "_t" + std::to_string(template_index);

      for (std::size_t p = 0; p < entry.n_plans_per_template; ++p) {
        const double plan_scale = std::exp(rng.uniform(-options.plan_jitter, options.plan_jitter));
        QueryPlan plan = tree;
        plan.plan_id = options.corpus_id + ":" + template_id + ":p" + std::to_string(p);
        plan.template_id = template_id;
        plan.corpus_id = options.corpus_id;
        for (auto& node : plan.nodes) {
          node.est_output_bytes *= plan_scale;
          node.est_cpu_cost *= plan_scale;
          node.est_io_cost *= plan_scale;
        }

        TemplateArchetype truth = params;
        truth.serial_ms *= plan_scale;
        truth.parallel_ms *= plan_scale;
        truth.contention_per_dop_ms *= plan_scale;
        truth.spill_penalty_ms *= plan_scale;

        for (const int d : corpus.dop_set)
          corpus.grid.add(plan.plan_id, d, ground_truth_latency(truth, d, options.sigma, rng));
        corpus.plans.push_back(std::move(plan));
        corpus.plan_truth.push_back(truth);
      }
    }
  }
  return corpus;
}

// --- generator config file -------------------------------------------------------

// {"corpus_id": "c", "seed": 17, "sigma": 0.02, "scale": 1.0, "dop_set": [...],
//  "entries": [{"kind": "parallelizable", "n_templates": 10,
//               "n_plans_per_template": 5, "overrides": {"serial_ms": 5.0}}]}
struct SynthConfig {
  std::vector<SynthEntry> entries;
  std::vector<int> dop_set = kDefaultDopSet;
  std::uint64_t seed = 0;
  SynthOptions options;
};

inline SynthConfig parse_synth_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedDocument(std::string("invalid generator config: ") + e.what());
  }
  SynthConfig config;
  config.seed = j.value("seed", std::uint64_t{0});
  config.options.sigma = j.value("sigma", 0.02);
  config.options.scale = j.value("scale", 1.0);
  config.options.corpus_id = j.value("corpus_id", "synth");
  config.options.template_param_jitter =
      j.value("template_param_jitter", config.options.template_param_jitter);
  config.options.plan_jitter = j.value("plan_jitter", config.options.plan_jitter);
  if (j.contains("dop_set")) {
    config.dop_set.clear();
    for (const auto& d : j.at("dop_set")) config.dop_set.push_back(d.get<int>());
  }
  if (!j.contains("entries")) throw InvalidSpec("generator config has no entries");
  for (const auto& ej : j.at("entries")) {
    SynthEntry entry;
    entry.archetype = default_archetype(archetype_kind_from_string(ej.at("kind")));
    entry.n_templates = ej.value("n_templates", std::size_t{1});
    entry.n_plans_per_template = ej.value("n_plans_per_template", std::size_t{1});
    if (const auto it = ej.find("overrides"); it != ej.end()) {
      TemplateArchetype& a = entry.archetype;
      for (const auto& [name, value] : it->items()) {
        if (name == "serial_ms") a.serial_ms = value.get<double>();
        else if (name == "parallel_ms") a.parallel_ms = value.get<double>();
        else if (name == "saturation_dop") a.saturation_dop = value.get<int>();
        else if (name == "contention_per_dop_ms") a.contention_per_dop_ms = value.get<double>();
        else if (name == "spill_dop") a.spill_dop = value.get<int>();
        else if (name == "spill_penalty_ms") a.spill_penalty_ms = value.get<double>();
        else if (name == "min_depth") a.min_depth = value.get<int>();
        else if (name == "max_depth") a.max_depth = value.get<int>();
        else if (name == "min_fanout") a.min_fanout = value.get<int>();
        else if (name == "max_fanout") a.max_fanout = value.get<int>();
        else if (name == "parallel_fraction") a.parallel_fraction = value.get<double>();
        else if (name == "est_scale_lo") a.est_scale_lo = value.get<double>();
        else if (name == "est_scale_hi") a.est_scale_hi = value.get<double>();
        else throw InvalidSpec("unknown archetype override \"" + name + "\"");
      }
    }
    config.entries.push_back(std::move(entry));
  }
  return config;
}

}  // namespace dopkit

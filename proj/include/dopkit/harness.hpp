#pragma once

// Experiment harness: dataset splitting for the four generalization levels,
// and the end-to-end fold pipeline (registry from training plans only ->
// featurize -> train -> evaluate both sides -> report).
//
//   G1  plan-level k-fold        same templates, same corpus
//   G2  template-level k-fold    held-out templates, same corpus
//   G3  whole-corpus pairs       same templates, different scale
//   G4  whole-corpus pairs       different templates and schema
//
// Fold assignment orders groups by a seeded hash and slices contiguously, so
// folds are balanced and adding a group moves each boundary by at most one.

#include <algorithm>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dopkit/data.hpp"
#include "dopkit/errors.hpp"
#include "dopkit/featurize.hpp"
#include "dopkit/metrics.hpp"
#include "dopkit/model.hpp"
#include "dopkit/plan.hpp"
#include "dopkit/rng.hpp"
#include "dopkit/selection.hpp"
#include "dopkit/synth.hpp"

namespace dopkit {

enum class Level { G1, G2, G3, G4 };

inline std::string to_string(Level level) {
  switch (level) {
    case Level::G1: return "G1";
    case Level::G2: return "G2";
    case Level::G3: return "G3";
    case Level::G4: return "G4";
  }
  return "?";
}

inline Level level_from_string(const std::string& s) {
  if (s == "G1" || s == "g1") return Level::G1;
  if (s == "G2" || s == "g2") return Level::G2;
  if (s == "G3" || s == "g3") return Level::G3;
  if (s == "G4" || s == "g4") return Level::G4;
  throw InvalidArgument("unknown generalization level \"" + s + "\"");
}

struct CorpusPair {
  std::string train_corpus;
  std::string test_corpus;
};

struct SplitSpec {
  Level level = Level::G1;
  std::size_t folds = 5;
  std::uint64_t seed = 0;
  std::vector<CorpusPair> corpus_pairs;  // G3/G4 only
};

namespace detail {

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// group name -> fold index, balanced within one of each other
inline std::map<std::string, std::size_t> assign_folds(const std::set<std::string>& groups,
                                                       std::size_t folds, std::uint64_t seed) {
  std::vector<std::pair<std::uint64_t, std::string>> ranked;
  ranked.reserve(groups.size());
  for (const auto& g : groups) ranked.emplace_back(splitmix64(fnv1a(g) ^ splitmix64(seed)), g);
  std::sort(ranked.begin(), ranked.end());
  std::map<std::string, std::size_t> out;
  const std::size_t n = ranked.size();
  for (std::size_t i = 0; i < n; ++i) out[ranked[i].second] = i * folds / n;
  return out;
}

}  // namespace detail

// Grouped k-fold over an already-featurized dataset. Every (plan, dop) row of
// a plan stays on one side of each fold.
inline std::vector<std::pair<Dataset, Dataset>> split(const Dataset& data,
                                                      const SplitSpec& spec) {
  if (data.points.empty()) throw EmptyDataset("cannot split an empty dataset");

  std::vector<std::pair<Dataset, Dataset>> out;
  if (spec.level == Level::G1 || spec.level == Level::G2) {
    if (spec.folds < 2) throw InvalidArgument("k-fold split needs at least 2 folds");
    std::set<std::string> groups;
    for (const auto& p : data.points) {
      if (spec.level == Level::G2 && p.template_id.empty())
        throw MissingTemplateIds("point for plan " + p.plan_id + " has no template_id");
      groups.insert(spec.level == Level::G1 ? p.plan_id : p.template_id);
    }
    if (groups.size() < spec.folds)
      throw TooFewTemplates(std::to_string(groups.size()) + " groups cannot fill " +
                            std::to_string(spec.folds) + " folds");
    const auto fold_of = detail::assign_folds(groups, spec.folds, spec.seed);
    out.resize(spec.folds);
    for (auto& [train_set, test_set] : out) {
      train_set.dop_set = data.dop_set;
      test_set.dop_set = data.dop_set;
    }
    for (const auto& p : data.points) {
      const std::size_t fold =
          fold_of.at(spec.level == Level::G1 ? p.plan_id : p.template_id);
      for (std::size_t f = 0; f < spec.folds; ++f)
        (f == fold ? out[f].second : out[f].first).points.push_back(p);
    }
  } else {
    if (spec.corpus_pairs.empty())
      throw InvalidArgument("G3/G4 splits need explicit corpus pairs");
    for (const auto& p : data.points)
      if (p.corpus_id.empty())
        throw MissingCorpusIds("point for plan " + p.plan_id + " has no corpus_id");
    for (const auto& pair : spec.corpus_pairs) {
      Dataset train_set, test_set;
      train_set.dop_set = data.dop_set;
      test_set.dop_set = data.dop_set;
      for (const auto& p : data.points) {
        if (p.corpus_id == pair.train_corpus) train_set.points.push_back(p);
        if (p.corpus_id == pair.test_corpus) test_set.points.push_back(p);
      }
      if (train_set.points.empty())
        throw MissingCorpusIds("corpus " + pair.train_corpus + " has no points");
      if (test_set.points.empty())
        throw MissingCorpusIds("corpus " + pair.test_corpus + " has no points");
      out.emplace_back(std::move(train_set), std::move(test_set));
    }
  }
  return out;
}

// --- end-to-end experiments -------------------------------------------------------

struct ExperimentInput {
  std::vector<QueryPlan> plans;
  LatencyGrid grid;  // complete over dop_set
  std::vector<int> dop_set = kDefaultDopSet;
};

struct ExperimentConfig {
  SplitSpec split;
  ModelSpec model;
  ChannelSet channels = kDefaultChannels;
  FeaturizeOptions featurize_options;
  // echoed into reports; resolved by the CLI
  std::vector<std::string> corpora;
  std::string output_dir;
};

struct FoldReport {
  std::size_t fold_index = 0;
  std::size_t train_plans = 0;
  std::size_t test_plans = 0;
  std::vector<std::string> train_templates;  // sorted unique; leakage audit
  std::vector<std::string> test_templates;
  std::size_t registry_keys = 0;
  std::size_t feature_dimension = 0;
  std::size_t unknown_test_keys = 0;  // summed distinct-per-plan tally
  MetricsReport train_metrics;
  MetricsReport test_metrics;
  std::map<int, std::size_t> chosen_dop_histogram;  // per-query choices on test
  DopRecommendation workload_recommendation;        // over the test side
  std::string model_bytes;
};

struct ExperimentReport {
  nlohmann::json config_echo;
  std::vector<FoldReport> folds;
};

namespace detail {

struct PlanFold {
  std::vector<const QueryPlan*> train;
  std::vector<const QueryPlan*> test;
};

inline std::vector<PlanFold> plan_folds(const ExperimentInput& input, const SplitSpec& spec) {
  std::vector<PlanFold> folds;
  if (spec.level == Level::G1 || spec.level == Level::G2) {
    if (spec.folds < 2) throw InvalidArgument("k-fold split needs at least 2 folds");
    std::set<std::string> groups;
    for (const auto& plan : input.plans) {
      if (spec.level == Level::G2 && plan.template_id.empty())
        throw MissingTemplateIds("plan " + plan.plan_id + " has no template_id");
      groups.insert(spec.level == Level::G1 ? plan.plan_id : plan.template_id);
    }
    if (groups.size() < spec.folds)
      throw TooFewTemplates(std::to_string(groups.size()) + " groups cannot fill " +
                            std::to_string(spec.folds) + " folds");
    const auto fold_of = assign_folds(groups, spec.folds, spec.seed);
    folds.resize(spec.folds);
    for (const auto& plan : input.plans) {
      const std::size_t fold =
          fold_of.at(spec.level == Level::G1 ? plan.plan_id : plan.template_id);
      for (std::size_t f = 0; f < spec.folds; ++f)
        (f == fold ? folds[f].test : folds[f].train).push_back(&plan);
    }
  } else {
    if (spec.corpus_pairs.empty())
      throw InvalidArgument("G3/G4 splits need explicit corpus pairs");
    for (const auto& plan : input.plans)
      if (plan.corpus_id.empty())
        throw MissingCorpusIds("plan " + plan.plan_id + " has no corpus_id");
    for (const auto& pair : spec.corpus_pairs) {
      PlanFold fold;
      for (const auto& plan : input.plans) {
        if (plan.corpus_id == pair.train_corpus) fold.train.push_back(&plan);
        if (plan.corpus_id == pair.test_corpus) fold.test.push_back(&plan);
      }
      if (fold.train.empty())
        throw MissingCorpusIds("corpus " + pair.train_corpus + " has no plans");
      if (fold.test.empty())
        throw MissingCorpusIds("corpus " + pair.test_corpus + " has no plans");
      folds.push_back(std::move(fold));
    }
  }
  return folds;
}

inline LatencyTable predicted_table(const std::vector<const QueryPlan*>& plans,
                                    const Model& model, const FeatureRegistry& registry,
                                    const LatencyGrid& grid, const std::vector<int>& dop_set,
                                    const FeaturizeOptions& options) {
  LatencyTable table;
  table.dop_set = dop_set;
  for (const QueryPlan* plan : plans) {
    const FeatureVector base = featurize(*plan, registry, options).features;
    for (const int d : dop_set)
      table.add(plan->plan_id, d, grid.at(plan->plan_id, d),
                predict(model, attach_dop(base, d)));
  }
  return table;
}

}  // namespace detail

inline ExperimentReport run_experiment(const ExperimentInput& input,
                                       const ExperimentConfig& config) {
  if (input.plans.empty()) throw EmptyCorpus("experiment input has no plans");
  if (input.dop_set.empty()) throw EmptyDopSet("experiment input has an empty dop set");

  ExperimentReport report;
  const auto folds = detail::plan_folds(input, config.split);
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto& fold = folds[f];
    FoldReport fr;
    fr.fold_index = f;
    fr.train_plans = fold.train.size();
    fr.test_plans = fold.test.size();
    {
      std::set<std::string> train_t, test_t;
      for (const QueryPlan* p : fold.train)
        if (!p->template_id.empty()) train_t.insert(p->template_id);
      for (const QueryPlan* p : fold.test)
        if (!p->template_id.empty()) test_t.insert(p->template_id);
      fr.train_templates.assign(train_t.begin(), train_t.end());
      fr.test_templates.assign(test_t.begin(), test_t.end());
    }

    std::vector<QueryPlan> train_plans;
    train_plans.reserve(fold.train.size());
    for (const QueryPlan* p : fold.train) train_plans.push_back(*p);
    const FeatureRegistry registry = build_registry(train_plans, config.channels);
    fr.registry_keys = registry.keys.size();
    fr.feature_dimension = registry.dimension();

    const Dataset train_data = make_dataset(train_plans, input.grid, registry, input.dop_set,
                                            config.featurize_options);
    const Model model = train(config.model, train_data);
    fr.model_bytes = save_model(model);

    const LatencyTable train_table = detail::predicted_table(
        fold.train, model, registry, input.grid, input.dop_set, config.featurize_options);
    const LatencyTable test_table = detail::predicted_table(
        fold.test, model, registry, input.grid, input.dop_set, config.featurize_options);
    fr.train_metrics = compute_metrics(train_table);
    fr.test_metrics = compute_metrics(test_table);

    std::vector<std::map<int, double>> test_rows;
    for (const QueryPlan* plan : fold.test) {
      const auto result = featurize(*plan, registry, config.featurize_options);
      fr.unknown_test_keys += result.unknown_keys;
      std::map<int, double> row;
      for (const int d : input.dop_set) row[d] = predict(model, attach_dop(result.features, d));
      fr.chosen_dop_histogram[select_from_row(plan->plan_id, row).chosen_dop] += 1;
      test_rows.push_back(std::move(row));
    }
    fr.workload_recommendation = select_workload_from_rows(test_rows);

    report.folds.push_back(std::move(fr));
  }

  // echo enough to reproduce the run
  nlohmann::json echo;
  echo["level"] = to_string(config.split.level);
  echo["folds"] = config.split.folds;
  echo["seed"] = config.split.seed;
  if (!config.split.corpus_pairs.empty()) {
    echo["corpus_pairs"] = nlohmann::json::array();
    for (const auto& pair : config.split.corpus_pairs)
      echo["corpus_pairs"].push_back({{"train", pair.train_corpus}, {"test", pair.test_corpus}});
  }
  echo["model"] = {{"kind", to_string(config.model.kind)},
                   {"seed", config.model.seed},
                   {"target_space",
                    config.model.target_space == TargetSpace::Raw ? "raw" : "log"},
                   {"hyperparams", resolve_spec(config.model).hyperparams}};
  echo["channels"] = config.channels.names();
  echo["log1p"] = config.featurize_options.log1p;
  echo["dop_set"] = input.dop_set;
  if (!config.corpora.empty()) echo["corpora"] = config.corpora;
  if (!config.output_dir.empty()) echo["output_dir"] = config.output_dir;
  report.config_echo = std::move(echo);
  return report;
}

// --- report emitters -----------------------------------------------------------------

inline nlohmann::json experiment_to_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["config"] = report.config_echo;
  j["folds"] = nlohmann::json::array();
  for (const auto& fr : report.folds) {
    nlohmann::json fj;
    fj["fold"] = fr.fold_index;
    fj["train_plans"] = fr.train_plans;
    fj["test_plans"] = fr.test_plans;
    fj["train_templates"] = fr.train_templates;
    fj["test_templates"] = fr.test_templates;
    fj["registry_keys"] = fr.registry_keys;
    fj["feature_dimension"] = fr.feature_dimension;
    fj["unknown_test_keys"] = fr.unknown_test_keys;
    fj["train"] = metrics_to_json(fr.train_metrics);
    fj["test"] = metrics_to_json(fr.test_metrics);
    nlohmann::json hist = nlohmann::json::object();
    for (const auto& [dop, count] : fr.chosen_dop_histogram) hist[std::to_string(dop)] = count;
    fj["chosen_dop_histogram"] = hist;
    fj["workload_recommendation"] = recommendation_to_json(fr.workload_recommendation);
    j["folds"].push_back(std::move(fj));
  }
  return j;
}

// One row per (fold, side) with the stable metric columns.
inline std::string experiment_to_csv(const ExperimentReport& report) {
  std::string out;
  for (const auto& fr : report.folds) {
    for (const auto& side : {std::pair{"train", &fr.train_metrics},
                             std::pair{"test", &fr.test_metrics}}) {
      const std::string block = metrics_to_csv(*side.second);
      const std::size_t newline = block.find('\n');
      if (out.empty()) out = "fold,side," + block.substr(0, newline) + "\n";
      out += std::to_string(fr.fold_index) + ',' + side.first + ',' +
             block.substr(newline + 1);
    }
  }
  return out;
}

// --- experiment config file -------------------------------------------------------

// {"corpora": [...], "level": "G1", "folds": 5, "seed": 0, "dop_set": [...],
//  "channels": [...], "log1p": false, "model": {...}, "corpus_pairs": [...],
//  "output_dir": "..."}
inline ExperimentConfig parse_experiment_config(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedDocument(std::string("invalid experiment config: ") + e.what());
  }
  ExperimentConfig config;
  config.split.level = level_from_string(j.value("level", "G1"));
  config.split.folds = j.value("folds", std::size_t{5});
  config.split.seed = j.value("seed", std::uint64_t{0});
  if (const auto it = j.find("corpus_pairs"); it != j.end())
    for (const auto& pair : *it)
      config.split.corpus_pairs.push_back(
          {pair.at("train").get<std::string>(), pair.at("test").get<std::string>()});
  if (const auto it = j.find("channels"); it != j.end()) {
    std::string joined;
    for (const auto& name : *it) {
      if (!joined.empty()) joined += ',';
      joined += name.get<std::string>();
    }
    config.channels = ChannelSet::parse(joined);
  }
  config.featurize_options.log1p = j.value("log1p", false);
  if (const auto it = j.find("model"); it != j.end()) {
    config.model.kind = model_kind_from_string(it->value("kind", "random_forest"));
    config.model.seed = it->value("seed", std::uint64_t{0});
    config.model.target_space =
        it->value("target_space", "raw") == std::string("log") ? TargetSpace::Log
                                                               : TargetSpace::Raw;
    if (const auto h = it->find("hyperparams"); h != it->end())
      for (const auto& [k, v] : h->items()) config.model.hyperparams[k] = v.get<double>();
  } else {
    config.model.seed = config.split.seed;
  }
  if (const auto it = j.find("corpora"); it != j.end())
    for (const auto& c : *it) config.corpora.push_back(c.get<std::string>());
  config.output_dir = j.value("output_dir", "");
  return config;
}

// dop_set lives beside the experiment config in the same file.
inline std::vector<int> parse_config_dop_set(const std::string& text) {
  const nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.contains("dop_set")) return kDefaultDopSet;
  std::vector<int> dops;
  for (const auto& d : j.at("dop_set")) dops.push_back(d.get<int>());
  return dops;
}

}  // namespace dopkit

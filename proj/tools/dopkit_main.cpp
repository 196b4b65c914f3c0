// Command-line surface for the DOP-tuning toolkit. Subcommands cover the
// batch pipeline end to end: featurize plans, train and apply latency models,
// recommend per-query/per-workload DOPs, emit speedup/costup curves, run
// split experiments, generate synthetic corpora, and grid-search model specs.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <cxxabi.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>
#include <string>
#include <typeinfo>
#include <vector>

#include <CLI11.hpp>

#include "dopkit/data.hpp"
#include "dopkit/featurize.hpp"
#include "dopkit/harness.hpp"
#include "dopkit/metrics.hpp"
#include "dopkit/model.hpp"
#include "dopkit/plan.hpp"
#include "dopkit/selection.hpp"
#include "dopkit/synth.hpp"

namespace fs = std::filesystem;
using namespace dopkit;

namespace {

// "dopkit::DanglingChild" -> "DanglingChild"
std::string error_name(const std::exception& e) {
  int status = 0;
  const std::unique_ptr<char, void (*)(void*)> demangled(
      abi::__cxa_demangle(typeid(e).name(), nullptr, nullptr, &status), std::free);
  std::string name = status == 0 && demangled ? demangled.get() : typeid(e).name();
  const std::size_t scope = name.rfind("::");
  return scope == std::string::npos ? name : name.substr(scope + 2);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  const fs::path p(path);
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << bytes;
}

// Relative outputs land in $DOPKIT_OUTPUT_DIR when it is set.
std::string out_path(const std::string& path) {
  const char* base = std::getenv("DOPKIT_OUTPUT_DIR");
  if (!base || *base == '\0' || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).string();
}

std::vector<QueryPlan> load_plan_files(const std::vector<std::string>& paths, bool verbose) {
  std::vector<QueryPlan> plans;
  std::vector<std::string> warnings;
  for (const auto& path : paths) {
    const auto batch = parse_plans(read_file(path), &warnings);
    plans.insert(plans.end(), batch.begin(), batch.end());
  }
  if (verbose)
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  return plans;
}

std::vector<int> parse_dop_list(const std::string& text) {
  std::vector<int> dops;
  std::stringstream ss(text);
  std::string field;
  while (std::getline(ss, field, ',')) dops.push_back(static_cast<int>(csv::to_long(field)));
  if (dops.empty()) throw EmptyDopSet("empty --dops list");
  std::sort(dops.begin(), dops.end());
  return dops;
}

ModelSpec spec_from_flags(const std::string& kind, const std::vector<std::string>& hyper,
                          std::uint64_t seed, const std::string& target_space) {
  ModelSpec spec;
  spec.kind = model_kind_from_string(kind);
  spec.seed = seed;
  spec.target_space = target_space == "log" ? TargetSpace::Log : TargetSpace::Raw;
  for (const auto& kv : hyper) {
    const auto at = kv.find('=');
    if (at == std::string::npos) throw InvalidArgument("--hyper expects key=value, got " + kv);
    spec.hyperparams[kv.substr(0, at)] = csv::to_double(kv.substr(at + 1));
  }
  return spec;
}

struct CorpusFiles {
  std::vector<QueryPlan> plans;
  LatencyGrid grid;
};

// A corpus directory holds plans.jsonl and latency.csv.
CorpusFiles load_corpus_dir(const std::string& dir) {
  CorpusFiles corpus;
  corpus.plans = parse_plans(read_file((fs::path(dir) / "plans.jsonl").string()));
  corpus.grid = latency_from_csv(read_file((fs::path(dir) / "latency.csv").string()));
  const std::string stamp = fs::path(dir).filename().string();
  for (auto& plan : corpus.plans)
    if (plan.corpus_id.empty()) plan.corpus_id = stamp;
  return corpus;
}

// --- subcommand bodies ------------------------------------------------------------

struct FeaturizeArgs {
  std::vector<std::string> plan_files;
  std::string channels = "count,card,weight";
  bool log1p = false;
  std::string registry_in;
  std::string registry_out = "registry.json";
  std::string features_out = "features.csv";
  bool verbose = false;
};

void run_featurize(const FeaturizeArgs& args) {
  const auto plans = load_plan_files(args.plan_files, args.verbose);
  FeatureRegistry registry;
  if (!args.registry_in.empty())
    registry = load_registry(read_file(args.registry_in));
  else
    registry = build_registry(plans, ChannelSet::parse(args.channels));
  write_file(out_path(args.registry_out), save_registry(registry));
  write_file(out_path(args.features_out),
             features_to_csv(plans, registry, {.log1p = args.log1p}));
}

struct TrainArgs {
  std::string features;
  std::string latency;
  std::string registry;
  std::string model_out = "model.json";
  std::string kind = "random_forest";
  std::vector<std::string> hyper;
  std::uint64_t seed = 0;
  std::string target_space = "raw";
  std::string dops;
};

void run_train(const TrainArgs& args) {
  const FeatureRegistry registry = load_registry(read_file(args.registry));
  const auto features = features_from_csv(read_file(args.features), registry);
  const LatencyGrid grid = latency_from_csv(read_file(args.latency));

  Dataset data;
  if (args.dops.empty()) {
    std::set<int> dops;
    for (const auto& [key, ms] : grid.actual_ms) dops.insert(key.second);
    data.dop_set.assign(dops.begin(), dops.end());
  } else {
    data.dop_set = parse_dop_list(args.dops);
  }
  for (const auto& [key, ms] : grid.actual_ms) {
    const auto it = features.find(key.first);
    if (it == features.end())
      throw UnknownPlan("latency row for plan " + key.first + " has no feature row");
    if (std::find(data.dop_set.begin(), data.dop_set.end(), key.second) == data.dop_set.end())
      continue;
    TrainingPoint point;
    point.features = attach_dop(it->second, key.second);
    point.dop = key.second;
    point.latency_ms = ms;
    point.plan_id = key.first;
    data.points.push_back(std::move(point));
  }
  const Model model = train(spec_from_flags(args.kind, args.hyper, args.seed, args.target_space),
                            data);
  write_file(out_path(args.model_out), save_model(model));
}

struct PredictArgs {
  std::string model;
  std::string registry;
  std::vector<std::string> plan_files;
  std::string out = "predicted.csv";
  std::string dops;
  bool log1p = false;
  bool verbose = false;
};

void run_predict(const PredictArgs& args) {
  const Model model = load_model(read_file(args.model));
  const FeatureRegistry registry = load_registry(read_file(args.registry));
  const auto plans = load_plan_files(args.plan_files, args.verbose);
  const std::vector<int> dops = args.dops.empty() ? kDefaultDopSet : parse_dop_list(args.dops);
  std::string csv_text = "plan_id,dop,predicted_ms\n";
  for (const auto& plan : plans) {
    const auto row = predicted_row(model, plan, registry, dops, {.log1p = args.log1p});
    for (const auto& [d, ms] : row)
      csv_text += plan.plan_id + ',' + std::to_string(d) + ',' + csv::format_double(ms) + '\n';
  }
  write_file(out_path(args.out), csv_text);
}

struct RecommendArgs {
  std::string model;
  std::string registry;
  std::vector<std::string> plan_files;
  std::string out = "recommendations.json";
  std::string dops;
  bool log1p = false;
  bool verbose = false;
};

void run_recommend(const RecommendArgs& args) {
  const Model model = load_model(read_file(args.model));
  const FeatureRegistry registry = load_registry(read_file(args.registry));
  const auto plans = load_plan_files(args.plan_files, args.verbose);
  const std::vector<int> dops = args.dops.empty() ? kDefaultDopSet : parse_dop_list(args.dops);
  const FeaturizeOptions options{.log1p = args.log1p};

  std::vector<DopRecommendation> per_query;
  std::vector<std::map<int, double>> rows;
  for (const auto& plan : plans) {
    rows.push_back(predicted_row(model, plan, registry, dops, options));
    per_query.push_back(select_from_row(plan.plan_id, rows.back()));
  }
  nlohmann::json j;
  j["per_query"] = recommendations_to_json(per_query);
  j["workload"] = recommendation_to_json(select_workload_from_rows(rows));
  write_file(out_path(args.out), j.dump(2) + "\n");
}

struct CurveArgs {
  std::string model;
  std::string registry;
  std::vector<std::string> plan_files;
  std::string grid;
  std::string out = "curve.csv";
  std::string dops;
  int baseline_dop = kDefaultBaselineDop;
  bool log1p = false;
  bool verbose = false;
};

void run_curve(const CurveArgs& args) {
  std::map<int, double> workload_row;
  CurveSource source;
  if (!args.grid.empty()) {
    source = CurveSource::Actual;
    const LatencyGrid grid = latency_from_csv(read_file(args.grid));
    for (const auto& [key, ms] : grid.actual_ms) workload_row[key.second] += ms;
  } else {
    if (args.model.empty() || args.registry.empty() || args.plan_files.empty())
      throw InvalidArgument("curve needs either --grid or --model/--registry/--plans");
    source = CurveSource::Predicted;
    const Model model = load_model(read_file(args.model));
    const FeatureRegistry registry = load_registry(read_file(args.registry));
    const auto plans = load_plan_files(args.plan_files, args.verbose);
    const std::vector<int> dops = args.dops.empty() ? kDefaultDopSet : parse_dop_list(args.dops);
    for (const auto& plan : plans)
      for (const auto& [d, ms] : predicted_row(model, plan, registry, dops,
                                               {.log1p = args.log1p}))
        workload_row[d] += ms;
  }
  write_file(out_path(args.out), curve_to_csv(speedup_costup(workload_row, args.baseline_dop,
                                                             source)));
}

struct EvaluateArgs {
  std::string config;
  std::string output_dir;
};

void run_evaluate(const EvaluateArgs& args) {
  const std::string config_text = read_file(args.config);
  ExperimentConfig config = parse_experiment_config(config_text);
  if (!args.output_dir.empty()) config.output_dir = args.output_dir;
  if (config.output_dir.empty()) config.output_dir = "evaluation";
  if (config.corpora.empty()) throw InvalidArgument("experiment config lists no corpora");

  ExperimentInput input;
  input.dop_set = parse_config_dop_set(config_text);
  for (const auto& dir : config.corpora) {
    CorpusFiles corpus = load_corpus_dir(dir);
    input.plans.insert(input.plans.end(), corpus.plans.begin(), corpus.plans.end());
    for (const auto& [key, ms] : corpus.grid.actual_ms) input.grid.actual_ms[key] = ms;
  }

  const ExperimentReport report = run_experiment(input, config);
  const fs::path out_dir(out_path(config.output_dir));
  write_file((out_dir / "report.json").string(), experiment_to_json(report).dump(2) + "\n");
  write_file((out_dir / "report.csv").string(), experiment_to_csv(report));
  for (const auto& fold : report.folds)
    write_file((out_dir / ("fold" + std::to_string(fold.fold_index) + "_model.json")).string(),
               fold.model_bytes);
}

struct SynthArgs {
  std::string config;
  std::string out_dir = "corpus";
  std::int64_t seed_override = -1;
};

void run_synth(const SynthArgs& args) {
  SynthConfig config = parse_synth_config(read_file(args.config));
  if (args.seed_override >= 0) config.seed = static_cast<std::uint64_t>(args.seed_override);
  const SynthCorpus corpus =
      generate_corpus(config.entries, config.dop_set, config.seed, config.options);
  const fs::path dir(out_path(args.out_dir));
  write_file((dir / "plans.jsonl").string(), serialize_plans(corpus.plans));
  write_file((dir / "latency.csv").string(), latency_to_csv(corpus.grid));
}

struct TuneArgs {
  std::string config;
  std::string out = "tuning.json";
};

// {"corpus": "dir", "channels": [...], "log1p": false, "folds": 5, "seed": 0,
//  "dop_set": [...], "specs": [{"kind": ..., "seed": ..., "target_space": ...,
//  "hyperparams": {...}}, ...]}
void run_tune(const TuneArgs& args) {
  const nlohmann::json j = nlohmann::json::parse(read_file(args.config));
  const CorpusFiles corpus = load_corpus_dir(j.at("corpus").get<std::string>());

  ChannelSet channels = kDefaultChannels;
  if (j.contains("channels")) {
    std::string joined;
    for (const auto& name : j.at("channels")) {
      if (!joined.empty()) joined += ',';
      joined += name.get<std::string>();
    }
    channels = ChannelSet::parse(joined);
  }
  std::vector<int> dops = kDefaultDopSet;
  if (j.contains("dop_set")) {
    dops.clear();
    for (const auto& d : j.at("dop_set")) dops.push_back(d.get<int>());
  }
  const FeaturizeOptions options{.log1p = j.value("log1p", false)};
  const FeatureRegistry registry = build_registry(corpus.plans, channels);
  const Dataset data = make_dataset(corpus.plans, corpus.grid, registry, dops, options);

  std::vector<ModelSpec> specs;
  for (const auto& sj : j.at("specs")) {
    ModelSpec spec;
    spec.kind = model_kind_from_string(sj.value("kind", "random_forest"));
    spec.seed = sj.value("seed", std::uint64_t{0});
    spec.target_space =
        sj.value("target_space", "raw") == std::string("log") ? TargetSpace::Log
                                                              : TargetSpace::Raw;
    if (const auto h = sj.find("hyperparams"); h != sj.end())
      for (const auto& [k, v] : h->items()) spec.hyperparams[k] = v.get<double>();
    specs.push_back(std::move(spec));
  }

  const auto [best, report] =
      grid_search(specs, data, j.value("folds", std::size_t{5}), j.value("seed", std::uint64_t{0}));

  nlohmann::json out;
  out["best"] = {{"kind", to_string(best.kind)},
                 {"seed", best.seed},
                 {"target_space", best.target_space == TargetSpace::Raw ? "raw" : "log"},
                 {"hyperparams", resolve_spec(best).hyperparams}};
  out["best_index"] = report.best_index;
  out["mean_mae"] = report.mean_mae;
  out["fold_mae"] = report.fold_mae;
  write_file(out_path(args.out), out.dump(2) + "\n");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Query DOP tuning toolkit: plan featurization, latency models, "
               "DOP selection, and evaluation harness"};
  app.require_subcommand(1);

  FeaturizeArgs featurize_args;
  auto* featurize_cmd =
      app.add_subcommand("featurize", "Encode plan files into a feature CSV and registry");
  featurize_cmd->add_option("--plans", featurize_args.plan_files, "plan JSON/JSONL files")
      ->required()
      ->check(CLI::ExistingFile);
  featurize_cmd->add_option("--channels", featurize_args.channels,
                            "channel set, e.g. count,card,weight");
  featurize_cmd->add_flag("--log1p", featurize_args.log1p, "log1p on magnitude slots");
  featurize_cmd->add_option("--registry", featurize_args.registry_in,
                            "reuse an existing registry instead of building one");
  featurize_cmd->add_option("--registry-out", featurize_args.registry_out, "registry output path");
  featurize_cmd->add_option("--features-out", featurize_args.features_out, "feature CSV path");
  featurize_cmd->add_flag("-v,--verbose", featurize_args.verbose, "print plan warnings");

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train a latency model from features + latencies");
  train_cmd->add_option("--features", train_args.features, "feature CSV")->required();
  train_cmd->add_option("--latency", train_args.latency, "latency CSV (plan_id,dop,latency_ms)")
      ->required();
  train_cmd->add_option("--registry", train_args.registry, "registry JSON")->required();
  train_cmd->add_option("--model-out", train_args.model_out, "model output path");
  train_cmd->add_option("--kind", train_args.kind,
                        "elastic_net | random_forest | gradient_boosting");
  train_cmd->add_option("--hyper", train_args.hyper, "hyperparameter overrides, key=value");
  train_cmd->add_option("--seed", train_args.seed, "training seed");
  train_cmd->add_option("--target-space", train_args.target_space, "raw | log");
  train_cmd->add_option("--dops", train_args.dops, "comma-separated dop set");

  PredictArgs predict_args;
  auto* predict_cmd = app.add_subcommand("predict", "Predict the latency grid for plans");
  predict_cmd->add_option("--model", predict_args.model, "model file")->required();
  predict_cmd->add_option("--registry", predict_args.registry, "registry JSON")->required();
  predict_cmd->add_option("--plans", predict_args.plan_files, "plan files")->required();
  predict_cmd->add_option("--out", predict_args.out, "predicted grid CSV path");
  predict_cmd->add_option("--dops", predict_args.dops, "comma-separated dop set");
  predict_cmd->add_flag("--log1p", predict_args.log1p, "log1p on magnitude slots");
  predict_cmd->add_flag("-v,--verbose", predict_args.verbose, "print plan warnings");

  RecommendArgs recommend_args;
  auto* recommend_cmd =
      app.add_subcommand("recommend", "Choose per-query and per-workload DOPs");
  recommend_cmd->add_option("--model", recommend_args.model, "model file")->required();
  recommend_cmd->add_option("--registry", recommend_args.registry, "registry JSON")->required();
  recommend_cmd->add_option("--plans", recommend_args.plan_files, "plan files")->required();
  recommend_cmd->add_option("--out", recommend_args.out, "recommendations JSON path");
  recommend_cmd->add_option("--dops", recommend_args.dops, "comma-separated dop set");
  recommend_cmd->add_flag("--log1p", recommend_args.log1p, "log1p on magnitude slots");
  recommend_cmd->add_flag("-v,--verbose", recommend_args.verbose, "print plan warnings");

  CurveArgs curve_args;
  auto* curve_cmd =
      app.add_subcommand("curve", "Workload speedup/costup curve from a model or actual grid");
  curve_cmd->add_option("--model", curve_args.model, "model file");
  curve_cmd->add_option("--registry", curve_args.registry, "registry JSON");
  curve_cmd->add_option("--plans", curve_args.plan_files, "plan files");
  curve_cmd->add_option("--grid", curve_args.grid, "actual latency CSV");
  curve_cmd->add_option("--out", curve_args.out, "curve CSV path");
  curve_cmd->add_option("--dops", curve_args.dops, "comma-separated dop set");
  curve_cmd->add_option("--baseline-dop", curve_args.baseline_dop, "normalization baseline");
  curve_cmd->add_flag("--log1p", curve_args.log1p, "log1p on magnitude slots");
  curve_cmd->add_flag("-v,--verbose", curve_args.verbose, "print plan warnings");

  EvaluateArgs evaluate_args;
  auto* evaluate_cmd =
      app.add_subcommand("evaluate", "Run a split experiment from a config file");
  evaluate_cmd->add_option("--config", evaluate_args.config, "experiment config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--output-dir", evaluate_args.output_dir,
                           "overrides the config's output_dir");

  SynthArgs synth_args;
  auto* synth_cmd =
      app.add_subcommand("synth", "Generate a synthetic corpus (plans.jsonl + latency.csv)");
  synth_cmd->add_option("--config", synth_args.config, "generator config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  synth_cmd->add_option("--out", synth_args.out_dir, "corpus output directory");
  synth_cmd->add_option("--seed", synth_args.seed_override, "overrides the config's seed");

  TuneArgs tune_args;
  auto* tune_cmd = app.add_subcommand("tune", "Grid-search model specs by CV MAE");
  tune_cmd->add_option("--config", tune_args.config, "grid-search config JSON")
      ->required()
      ->check(CLI::ExistingFile);
  tune_cmd->add_option("--out", tune_args.out, "tuning report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (featurize_cmd->parsed()) run_featurize(featurize_args);
    if (train_cmd->parsed()) run_train(train_args);
    if (predict_cmd->parsed()) run_predict(predict_args);
    if (recommend_cmd->parsed()) run_recommend(recommend_args);
    if (curve_cmd->parsed()) run_curve(curve_args);
    if (evaluate_cmd->parsed()) run_evaluate(evaluate_args);
    if (synth_cmd->parsed()) run_synth(synth_args);
    if (tune_cmd->parsed()) run_tune(tune_args);
  } catch (const std::exception& e) {
    std::cerr << "error [" << error_name(e) << "]: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

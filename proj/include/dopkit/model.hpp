#pragma once

// Unified latency regressor: f(ftr(P), d) -> latency_ms. Wraps the three model
// families behind one spec/train/predict/save/load surface.

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "dopkit/data.hpp"
#include "dopkit/elastic_net.hpp"
#include "dopkit/errors.hpp"
#include "dopkit/gradient_boosting.hpp"
#include "dopkit/matrix.hpp"
#include "dopkit/random_forest.hpp"

namespace dopkit {

enum class ModelKind { ElasticNet, RandomForest, GradientBoosting };
enum class TargetSpace { Raw, Log };

inline std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::ElasticNet: return "elastic_net";
    case ModelKind::RandomForest: return "random_forest";
    case ModelKind::GradientBoosting: return "gradient_boosting";
  }
  return "?";
}

inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "elastic_net") return ModelKind::ElasticNet;
  if (s == "random_forest") return ModelKind::RandomForest;
  if (s == "gradient_boosting") return ModelKind::GradientBoosting;
  throw InvalidArgument("unknown model kind \"" + s + "\"");
}

struct ModelSpec {
  ModelKind kind = ModelKind::RandomForest;
  std::map<std::string, double> hyperparams;  // missing entries take defaults
  std::uint64_t seed = 0;
  TargetSpace target_space = TargetSpace::Raw;
};

inline constexpr std::size_t kMaxEnsembleSize = 1000;

namespace detail {

inline const std::map<std::string, double>& default_hyperparams(ModelKind kind) {
  static const std::map<std::string, double> elastic_net{
      {"alpha", 0.1}, {"l1_ratio", 0.5}, {"tol", 1e-6}, {"max_sweeps", 10000}};
  static const std::map<std::string, double> random_forest{
      {"n_trees", 100},         {"max_depth", 0},   {"min_samples_leaf", 1},
      {"feature_fraction", 1.0 / 3.0}, {"bootstrap", 1}};
  static const std::map<std::string, double> gradient_boosting{
      {"n_rounds", 100},   {"max_depth", 6},          {"shrinkage", 0.1},
      {"leaf_l2", 1.0},    {"min_samples_leaf", 1},   {"feature_fraction", 1.0}};
  switch (kind) {
    case ModelKind::ElasticNet: return elastic_net;
    case ModelKind::RandomForest: return random_forest;
    default: return gradient_boosting;
  }
}

inline void check_range(const std::string& name, double v, double lo, double hi) {
  if (!(v >= lo) || !(v <= hi))
    throw InvalidHyperparameter(name + " = " + std::to_string(v) + " outside [" +
                                std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

}  // namespace detail

// Fill defaults and validate documented ranges (ensembles are capped at 1000).
inline ModelSpec resolve_spec(const ModelSpec& spec) {
  ModelSpec out = spec;
  const auto& defaults = detail::default_hyperparams(spec.kind);
  for (const auto& [name, value] : spec.hyperparams)
    if (!defaults.count(name))
      throw InvalidHyperparameter("unknown hyperparameter \"" + name + "\" for " +
                                  to_string(spec.kind));
  for (const auto& [name, value] : defaults)
    if (!out.hyperparams.count(name)) out.hyperparams[name] = value;

  const auto& h = out.hyperparams;
  switch (out.kind) {
    case ModelKind::ElasticNet:
      detail::check_range("alpha", h.at("alpha"), 0.0, 1e9);
      detail::check_range("l1_ratio", h.at("l1_ratio"), 0.0, 1.0);
      detail::check_range("tol", h.at("tol"), 1e-15, 1.0);
      detail::check_range("max_sweeps", h.at("max_sweeps"), 1, 1e9);
      break;
    case ModelKind::RandomForest:
      detail::check_range("n_trees", h.at("n_trees"), 1, static_cast<double>(kMaxEnsembleSize));
      detail::check_range("max_depth", h.at("max_depth"), 0, 64);
      detail::check_range("min_samples_leaf", h.at("min_samples_leaf"), 1, 1e9);
      detail::check_range("feature_fraction", h.at("feature_fraction"), 1e-9, 1.0);
      detail::check_range("bootstrap", h.at("bootstrap"), 0, 1);
      break;
    case ModelKind::GradientBoosting:
      detail::check_range("n_rounds", h.at("n_rounds"), 1, static_cast<double>(kMaxEnsembleSize));
      detail::check_range("max_depth", h.at("max_depth"), 0, 64);
      detail::check_range("shrinkage", h.at("shrinkage"), 1e-9, 1.0);
      detail::check_range("leaf_l2", h.at("leaf_l2"), 0.0, 1e9);
      detail::check_range("min_samples_leaf", h.at("min_samples_leaf"), 1, 1e9);
      detail::check_range("feature_fraction", h.at("feature_fraction"), 1e-9, 1.0);
      break;
  }
  return out;
}

struct TrainingSummary {
  double training_mae = 0.0;
  std::size_t components = 0;  // trees, boosting rounds, or descent sweeps
};

struct Model {
  ModelSpec spec;  // resolved
  std::uint64_t registry_fingerprint = 0;
  std::size_t dimension = 0;
  TrainingSummary summary;
  std::variant<ElasticNetModel, RandomForestModel, GradientBoostingModel> impl;
};

namespace detail {

inline double raw_prediction(const Model& model, std::span<const double> x) {
  return std::visit([&](const auto& m) { return m.predict(x); }, model.impl);
}

}  // namespace detail

inline double predict(const Model& model, const FeatureVector& x) {
  if (x.values.size() != model.dimension)
    throw DimensionMismatch("feature vector has dimension " + std::to_string(x.values.size()) +
                            ", model expects " + std::to_string(model.dimension));
  if (x.registry_fingerprint != 0 && model.registry_fingerprint != 0 &&
      x.registry_fingerprint != model.registry_fingerprint)
    throw DimensionMismatch("feature vector was produced by a different registry");
  const double value = detail::raw_prediction(model, x.values);
  if (model.spec.target_space == TargetSpace::Log) return std::exp(value);
  return value < 0.0 ? 0.0 : value;  // latency cannot be negative
}

inline Model train(const ModelSpec& spec_in, const Dataset& data) {
  if (data.points.empty()) throw EmptyDataset("cannot train on an empty dataset");
  const ModelSpec spec = resolve_spec(spec_in);

  const std::size_t n = data.points.size();
  const std::size_t dim = data.points.front().features.values.size();
  for (const auto& p : data.points)
    if (p.features.values.size() != dim)
      throw DimensionMismatch("training points disagree on feature dimension");

  Matrix x = Matrix::zeros(n, dim);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = data.points[i];
    std::copy(p.features.values.begin(), p.features.values.end(), x.values.begin() + i * dim);
    double target = p.latency_ms;
    if (spec.target_space == TargetSpace::Log) target = std::log(target);
    if (!std::isfinite(target))
      throw NonFiniteTarget("target for plan " + p.plan_id + " at dop " + std::to_string(p.dop) +
                            " is not finite");
    y[i] = target;
  }

  Model model;
  model.spec = spec;
  model.registry_fingerprint = data.points.front().features.registry_fingerprint;
  model.dimension = dim;
  const auto& h = spec.hyperparams;
  switch (spec.kind) {
    case ModelKind::ElasticNet: {
      ElasticNetParams params;
      params.alpha = h.at("alpha");
      params.l1_ratio = h.at("l1_ratio");
      params.tol = h.at("tol");
      params.max_sweeps = static_cast<std::size_t>(h.at("max_sweeps"));
      auto fitted = fit_elastic_net(x, y, params);
      model.summary.components = fitted.sweeps_run;
      model.impl = std::move(fitted);
      break;
    }
    case ModelKind::RandomForest: {
      RandomForestParams params;
      params.n_trees = static_cast<std::size_t>(h.at("n_trees"));
      params.tree.max_depth = static_cast<int>(h.at("max_depth"));
      params.tree.min_samples_leaf = static_cast<std::size_t>(h.at("min_samples_leaf"));
      params.tree.feature_fraction = h.at("feature_fraction");
      params.bootstrap = h.at("bootstrap") != 0.0;
      auto fitted = fit_random_forest(x, y, params, spec.seed);
      model.summary.components = fitted.trees.size();
      model.impl = std::move(fitted);
      break;
    }
    case ModelKind::GradientBoosting: {
      GradientBoostingParams params;
      params.n_rounds = static_cast<std::size_t>(h.at("n_rounds"));
      params.tree.max_depth = static_cast<int>(h.at("max_depth"));
      params.tree.min_samples_leaf = static_cast<std::size_t>(h.at("min_samples_leaf"));
      params.tree.feature_fraction = h.at("feature_fraction");
      params.tree.leaf_l2 = h.at("leaf_l2");
      params.shrinkage = h.at("shrinkage");
      auto fitted = fit_gradient_boosting(x, y, params, spec.seed);
      model.summary.components = fitted.trees.size();
      model.impl = std::move(fitted);
      break;
    }
  }

  double mae = 0.0;
  for (const auto& p : data.points) mae += std::abs(predict(model, p.features) - p.latency_ms);
  model.summary.training_mae = mae / static_cast<double>(n);
  return model;
}

// --- serialization ------------------------------------------------------------

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json tree_to_json(const RegressionTree& tree) {
  nlohmann::json j;
  auto& feature = j["feature"] = nlohmann::json::array();
  auto& threshold = j["threshold"] = nlohmann::json::array();
  auto& left = j["left"] = nlohmann::json::array();
  auto& right = j["right"] = nlohmann::json::array();
  auto& value = j["value"] = nlohmann::json::array();
  for (const auto& n : tree.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return j;
}

inline RegressionTree tree_from_json(const nlohmann::json& j) {
  RegressionTree tree;
  const auto& feature = j.at("feature");
  const auto& threshold = j.at("threshold");
  const auto& left = j.at("left");
  const auto& right = j.at("right");
  const auto& value = j.at("value");
  const std::size_t n = feature.size();
  if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n)
    throw CorruptModel("tree arrays disagree on length");
  tree.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    tree.nodes[i].feature = feature[i].get<int>();
    tree.nodes[i].threshold = threshold[i].get<double>();
    tree.nodes[i].left = left[i].get<int>();
    tree.nodes[i].right = right[i].get<int>();
    tree.nodes[i].value = value[i].get<double>();
  }
  if (tree.nodes.empty()) throw CorruptModel("tree has no nodes");
  return tree;
}

}  // namespace detail

inline std::string save_model(const Model& model) {
  nlohmann::json j;
  j["format"] = "dopkit-model";
  j["format_version"] = kModelFormatVersion;
  j["kind"] = to_string(model.spec.kind);
  j["target_space"] = model.spec.target_space == TargetSpace::Raw ? "raw" : "log";
  j["seed"] = model.spec.seed;
  j["hyperparams"] = model.spec.hyperparams;
  j["registry_fingerprint"] = model.registry_fingerprint;
  j["dimension"] = model.dimension;
  j["training_summary"] = {{"training_mae", model.summary.training_mae},
                           {"components", model.summary.components}};
  nlohmann::json params;
  if (const auto* en = std::get_if<ElasticNetModel>(&model.impl)) {
    params["coefficients"] = en->coef;
    params["intercept"] = en->intercept;
    params["feature_mean"] = en->feature_mean;
    params["feature_scale"] = en->feature_scale;
    params["sweeps_run"] = en->sweeps_run;
  } else if (const auto* rf = std::get_if<RandomForestModel>(&model.impl)) {
    params["trees"] = nlohmann::json::array();
    for (const auto& tree : rf->trees) params["trees"].push_back(detail::tree_to_json(tree));
  } else {
    const auto& gbt = std::get<GradientBoostingModel>(model.impl);
    params["base_score"] = gbt.base_score;
    params["shrinkage"] = gbt.shrinkage;
    params["trees"] = nlohmann::json::array();
    for (const auto& tree : gbt.trees) params["trees"].push_back(detail::tree_to_json(tree));
  }
  j["params"] = std::move(params);
  return j.dump() + "\n";
}

inline Model load_model(const std::string& bytes) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes);
  } catch (const nlohmann::json::parse_error&) {
    throw CorruptModel("model file is not valid JSON");
  }
  if (!j.is_object() || j.value("format", "") != "dopkit-model")
    throw CorruptModel("not a model file");
  const int version = j.value("format_version", -1);
  if (version != kModelFormatVersion)
    throw VersionMismatch("model format version " + std::to_string(version) +
                          " is not supported (expected " + std::to_string(kModelFormatVersion) +
                          ")");
  try {
    Model model;
    model.spec.kind = model_kind_from_string(j.at("kind").get<std::string>());
    model.spec.target_space =
        j.at("target_space").get<std::string>() == "log" ? TargetSpace::Log : TargetSpace::Raw;
    model.spec.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("hyperparams").items())
      model.spec.hyperparams[k] = v.get<double>();
    model.registry_fingerprint = j.at("registry_fingerprint").get<std::uint64_t>();
    model.dimension = j.at("dimension").get<std::size_t>();
    model.summary.training_mae = j.at("training_summary").at("training_mae").get<double>();
    model.summary.components = j.at("training_summary").at("components").get<std::size_t>();

    const auto& params = j.at("params");
    switch (model.spec.kind) {
      case ModelKind::ElasticNet: {
        ElasticNetModel en;
        en.coef = params.at("coefficients").get<std::vector<double>>();
        en.intercept = params.at("intercept").get<double>();
        en.feature_mean = params.at("feature_mean").get<std::vector<double>>();
        en.feature_scale = params.at("feature_scale").get<std::vector<double>>();
        en.sweeps_run = params.at("sweeps_run").get<std::size_t>();
        if (en.coef.size() != model.dimension || en.feature_mean.size() != model.dimension ||
            en.feature_scale.size() != model.dimension)
          throw CorruptModel("coefficient arrays do not match the model dimension");
        model.impl = std::move(en);
        break;
      }
      case ModelKind::RandomForest: {
        RandomForestModel rf;
        for (const auto& tj : params.at("trees")) rf.trees.push_back(detail::tree_from_json(tj));
        if (rf.trees.empty()) throw CorruptModel("forest has no trees");
        model.impl = std::move(rf);
        break;
      }
      case ModelKind::GradientBoosting: {
        GradientBoostingModel gbt;
        gbt.base_score = params.at("base_score").get<double>();
        gbt.shrinkage = params.at("shrinkage").get<double>();
        for (const auto& tj : params.at("trees")) gbt.trees.push_back(detail::tree_from_json(tj));
        if (gbt.trees.empty()) throw CorruptModel("boosting ensemble has no trees");
        model.impl = std::move(gbt);
        break;
      }
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptModel(std::string("model file is missing fields: ") + e.what());
  }
}

// --- cross-validated spec selection ------------------------------------------------

struct CvReport {
  std::vector<ModelSpec> specs;
  std::vector<std::vector<double>> fold_mae;  // [spec][fold]
  std::vector<double> mean_mae;               // [spec]
  std::size_t best_index = 0;
};

// Lowest mean validation MAE wins; ties go to the earliest spec in the list.
inline std::pair<ModelSpec, CvReport> grid_search(const std::vector<ModelSpec>& specs,
                                                  const Dataset& data, std::size_t folds,
                                                  std::uint64_t seed = 0) {
  if (specs.empty()) throw InvalidArgument("grid_search needs at least one spec");
  if (data.points.empty()) throw EmptyDataset("grid_search on an empty dataset");
  if (folds < 2) throw InvalidArgument("grid_search needs k >= 2 folds");
  if (folds > data.points.size())
    throw TooFewPointsForFolds(std::to_string(data.points.size()) + " points cannot fill " +
                               std::to_string(folds) + " folds");

  const std::size_t n = data.points.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> fold_of(n);
  for (std::size_t pos = 0; pos < n; ++pos) fold_of[order[pos]] = pos % folds;

  CvReport report;
  report.specs = specs;
  report.fold_mae.assign(specs.size(), std::vector<double>(folds, 0.0));
  report.mean_mae.assign(specs.size(), 0.0);

  for (std::size_t s = 0; s < specs.size(); ++s) {
    for (std::size_t f = 0; f < folds; ++f) {
      Dataset train_set, valid_set;
      train_set.dop_set = data.dop_set;
      valid_set.dop_set = data.dop_set;
      for (std::size_t i = 0; i < n; ++i)
        (fold_of[i] == f ? valid_set : train_set).points.push_back(data.points[i]);
      const Model model = train(specs[s], train_set);
      double mae = 0.0;
      for (const auto& p : valid_set.points)
        mae += std::abs(predict(model, p.features) - p.latency_ms);
      report.fold_mae[s][f] = mae / static_cast<double>(valid_set.points.size());
      report.mean_mae[s] += report.fold_mae[s][f];
    }
    report.mean_mae[s] /= static_cast<double>(folds);
    if (report.mean_mae[s] < report.mean_mae[report.best_index]) report.best_index = s;
  }
  return {specs[report.best_index], report};
}

}  // namespace dopkit

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "dopkit/model.hpp"
#include "dopkit/rng.hpp"

using namespace dopkit;

namespace {

Dataset dataset_from(const std::vector<std::pair<std::vector<double>, double>>& rows) {
  Dataset data;
  data.dop_set = {1};
  for (std::size_t i = 0; i < rows.size(); ++i) {
    TrainingPoint p;
    p.features.values = rows[i].first;
    p.dop = 1;
    p.latency_ms = rows[i].second;
    p.plan_id = "p" + std::to_string(i);
    data.points.push_back(std::move(p));
  }
  return data;
}

Matrix matrix_from(const std::vector<std::vector<double>>& rows) {
  Matrix m = Matrix::zeros(rows.size(), rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m.at(i, j) = rows[i][j];
  return m;
}

ModelSpec memorizing_forest_spec(std::uint64_t seed = 0) {
  ModelSpec spec;
  spec.kind = ModelKind::RandomForest;
  spec.seed = seed;
  spec.hyperparams = {{"n_trees", 1}, {"bootstrap", 0}, {"feature_fraction", 1.0}};
  return spec;
}

}  // namespace

TEST_CASE("elastic net recovers a planted linear relation with no penalty", "[models]") {
  Rng rng(31);
  std::vector<std::pair<std::vector<double>, double>> rows;
  for (int i = 0; i < 60; ++i) {
    const double x1 = rng.uniform(0.0, 50.0);
    const double x2 = rng.uniform(0.0, 10.0);
    rows.push_back({{x1, x2}, 2.0 * x1 + 3.0});
  }
  ModelSpec spec;
  spec.kind = ModelKind::ElasticNet;
  spec.hyperparams = {{"alpha", 0.0}};
  const Model model = train(spec, dataset_from(rows));
  const auto& en = std::get<ElasticNetModel>(model.impl);
  const auto coef = en.user_coefficients();
  CHECK(std::abs(coef[0] - 2.0) < 1e-3);
  CHECK(std::abs(coef[1]) < 1e-3);
  CHECK(std::abs(en.user_intercept() - 3.0) < 1e-3);
  CHECK(model.summary.training_mae < 1e-3);
}

TEST_CASE("elastic net objective never increases across sweeps", "[models][property]") {
  Rng rng(32);
  const std::size_t n = 80, m = 6;
  Matrix x = Matrix::zeros(n, m);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) x.at(i, j) = rng.uniform(-5.0, 5.0);
    y[i] = 3.0 * x.at(i, 0) - 2.0 * x.at(i, 3) + rng.normal();
  }
  ElasticNetParams params;
  params.alpha = 0.5;
  params.l1_ratio = 0.4;
  std::vector<double> trace;
  fit_elastic_net(x, y, params, &trace);
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i)
    REQUIRE(trace[i] <= trace[i - 1] + 1e-12 * std::max(1.0, trace[i - 1]));
}

TEST_CASE("constant elastic net predicts its intercept", "[models]") {
  Model model;
  model.spec.kind = ModelKind::ElasticNet;
  model.dimension = 3;
  ElasticNetModel en;
  en.coef = {0.0, 0.0, 0.0};
  en.intercept = 7.0;
  en.feature_mean = {0.0, 0.0, 0.0};
  en.feature_scale = {1.0, 1.0, 1.0};
  model.impl = en;
  FeatureVector x;
  x.values = {123.0, -4.0, 9.0};
  CHECK(predict(model, x) == 7.0);
}

TEST_CASE("single unlimited-depth tree memorizes distinct points", "[models]") {
  Rng rng(33);
  std::vector<std::pair<std::vector<double>, double>> rows;
  for (int i = 0; i < 50; ++i)
    rows.push_back({{rng.uniform(0.0, 100.0), rng.uniform(0.0, 100.0)},
                    rng.uniform(1.0, 1000.0)});
  const Dataset data = dataset_from(rows);
  const Model model = train(memorizing_forest_spec(), data);
  double scale = 0.0;
  for (const auto& p : data.points) scale += std::abs(p.latency_ms);
  scale /= static_cast<double>(data.points.size());
  CHECK(model.summary.training_mae / scale < 1e-9);

  SECTION("a memorized point is reproduced at query time") {
    Dataset with_412 = data;
    with_412.points[7].latency_ms = 412.0;
    const Model m2 = train(memorizing_forest_spec(), with_412);
    CHECK(predict(m2, with_412.points[7].features) == Catch::Approx(412.0).margin(1e-6));
  }
}

TEST_CASE("forest prediction is the arithmetic mean of its trees", "[models]") {
  RandomForestModel forest;
  RegressionTree leaf10, leaf20;
  leaf10.nodes = {TreeNode{-1, 0.0, -1, -1, 10.0}};
  leaf20.nodes = {TreeNode{-1, 0.0, -1, -1, 20.0}};
  forest.trees = {leaf10, leaf20};
  const std::vector<double> x{1.0, 2.0};
  CHECK(forest.predict(x) == 15.0);
}

TEST_CASE("gradient boosting training MSE is non-increasing", "[models][property]") {
  Rng rng(34);
  const std::size_t n = 120, m = 4;
  Matrix x = Matrix::zeros(n, m);
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) x.at(i, j) = rng.uniform(0.0, 10.0);
    y[i] = 50.0 + 10.0 * std::sin(x.at(i, 0)) + x.at(i, 1) * x.at(i, 2) + rng.normal();
  }
  GradientBoostingParams params;
  params.n_rounds = 100;
  std::vector<double> trace;
  const GradientBoostingModel model = fit_gradient_boosting(x, y, params, 5, &trace);
  REQUIRE(trace.size() == params.n_rounds + 1);
  for (std::size_t r = 1; r < trace.size(); ++r) REQUIRE(trace[r] <= trace[r - 1]);

  SECTION("per-round MSE reconstructed from the trees matches the trace") {
    std::vector<double> prediction(n, model.base_score);
    for (std::size_t r = 0; r < model.trees.size(); ++r) {
      for (std::size_t i = 0; i < n; ++i)
        prediction[i] += model.shrinkage * model.trees[r].predict(x.row(i));
      double mse = 0.0;
      for (std::size_t i = 0; i < n; ++i) mse += (y[i] - prediction[i]) * (y[i] - prediction[i]);
      mse /= static_cast<double>(n);
      REQUIRE(mse == Catch::Approx(trace[r + 1]).epsilon(1e-12));
    }
  }
}

TEST_CASE("split ties break toward the lower slot and threshold", "[models]") {
  SECTION("duplicated feature column: lower slot wins") {
    const Matrix x = matrix_from({{0, 0}, {1, 1}, {2, 2}, {3, 3}});
    const std::vector<double> y{0, 0, 1, 1};
    Rng rng(1);
    const RegressionTree tree = fit_tree(x, y, {0, 1, 2, 3}, TreeParams{}, rng);
    REQUIRE(tree.nodes[0].feature == 0);
    CHECK(tree.nodes[0].threshold == 1.5);
  }
  SECTION("symmetric gains within one feature: lower threshold wins") {
    const Matrix x = matrix_from({{0}, {1}, {2}, {3}});
    const std::vector<double> y{0, 1, 1, 0};
    Rng rng(1);
    const RegressionTree tree = fit_tree(x, y, {0, 1, 2, 3}, TreeParams{}, rng);
    REQUIRE(tree.nodes[0].feature == 0);
    CHECK(tree.nodes[0].threshold == 0.5);
  }
}

TEST_CASE("training is deterministic in spec, seed, and data", "[models]") {
  Rng rng(35);
  std::vector<std::pair<std::vector<double>, double>> rows;
  for (int i = 0; i < 40; ++i)
    rows.push_back({{rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)},
                    rng.uniform(1.0, 500.0)});
  const Dataset data = dataset_from(rows);
  for (const ModelKind kind :
       {ModelKind::ElasticNet, ModelKind::RandomForest, ModelKind::GradientBoosting}) {
    ModelSpec spec;
    spec.kind = kind;
    spec.seed = 99;
    if (kind != ModelKind::ElasticNet) spec.hyperparams["n_" + std::string(kind == ModelKind::RandomForest ? "trees" : "rounds")] = 10;
    const std::string a = save_model(train(spec, data));
    const std::string b = save_model(train(spec, data));
    REQUIRE(a == b);
  }
}

TEST_CASE("model files round-trip and reject damage", "[models]") {
  Rng rng(36);
  std::vector<std::pair<std::vector<double>, double>> rows;
  for (int i = 0; i < 30; ++i)
    rows.push_back({{rng.uniform(0.0, 10.0), rng.uniform(0.0, 10.0)}, rng.uniform(1.0, 100.0)});
  const Dataset data = dataset_from(rows);

  for (const ModelKind kind :
       {ModelKind::ElasticNet, ModelKind::RandomForest, ModelKind::GradientBoosting}) {
    ModelSpec spec;
    spec.kind = kind;
    spec.seed = 5;
    if (kind != ModelKind::ElasticNet)
      spec.hyperparams[kind == ModelKind::RandomForest ? "n_trees" : "n_rounds"] = 8;
    const Model model = train(spec, data);
    const std::string bytes = save_model(model);
    const Model loaded = load_model(bytes);
    for (int i = 0; i < 100; ++i) {
      FeatureVector x;
      x.values = {rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0)};
      REQUIRE(predict(loaded, x) == predict(model, x));  // bitwise
    }
    REQUIRE(save_model(loaded) == bytes);

    SECTION("truncated file is corrupt: " + to_string(kind)) {
      CHECK_THROWS_AS(load_model(bytes.substr(0, bytes.size() / 2)), CorruptModel);
    }
  }

  SECTION("newer major version is rejected") {
    const Model model = train(memorizing_forest_spec(), data);
    nlohmann::json j = nlohmann::json::parse(save_model(model));
    j["format_version"] = kModelFormatVersion + 1;
    CHECK_THROWS_AS(load_model(j.dump()), VersionMismatch);
  }
  SECTION("non-model JSON is corrupt") {
    CHECK_THROWS_AS(load_model("{\"hello\": 1}"), CorruptModel);
  }
}

TEST_CASE("grid search picks the spec with the lowest CV MAE", "[models]") {
  // smooth nonlinear target: a memorizing forest interpolates it far better
  // than a heavily regularized (near-constant) linear model
  std::vector<std::pair<std::vector<double>, double>> rows;
  for (int i = 0; i < 50; ++i) {
    const double v = static_cast<double>(i);
    rows.push_back({{v}, (v - 25.0) * (v - 25.0) + 10.0});
  }
  const Dataset data = dataset_from(rows);

  ModelSpec constant;
  constant.kind = ModelKind::ElasticNet;
  constant.hyperparams = {{"alpha", 1e9}};
  const ModelSpec forest = memorizing_forest_spec(3);

  SECTION("single spec comes straight back with its report") {
    const auto [best, report] = grid_search({constant}, data, 5, 17);
    CHECK(best.kind == ModelKind::ElasticNet);
    REQUIRE(report.fold_mae.size() == 1);
    REQUIRE(report.fold_mae[0].size() == 5);
  }

  SECTION("memorizing family beats the constant model, and the reported MAEs "
          "match a direct recomputation") {
    const std::size_t k = 5;
    const std::uint64_t seed = 17;
    const auto [best, report] = grid_search({constant, forest}, data, k, seed);
    CHECK(best.kind == ModelKind::RandomForest);
    CHECK(report.best_index == 1);
    CHECK(report.mean_mae[1] < report.mean_mae[0]);

    // direct recomputation of each spec's CV MAE over the same folds
    const std::size_t n = data.points.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng rng(seed);
    rng.shuffle(order);
    std::vector<std::size_t> fold_of(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold_of[order[pos]] = pos % k;
    const std::vector<ModelSpec> specs{constant, forest};
    for (std::size_t s = 0; s < specs.size(); ++s) {
      for (std::size_t f = 0; f < k; ++f) {
        Dataset tr, va;
        tr.dop_set = va.dop_set = data.dop_set;
        for (std::size_t i = 0; i < n; ++i)
          (fold_of[i] == f ? va : tr).points.push_back(data.points[i]);
        const Model m = train(specs[s], tr);
        double mae = 0.0;
        for (const auto& p : va.points) mae += std::abs(predict(m, p.features) - p.latency_ms);
        mae /= static_cast<double>(va.points.size());
        REQUIRE(mae == report.fold_mae[s][f]);
      }
    }
  }

  SECTION("more folds than points is an error") {
    CHECK_THROWS_AS(grid_search({constant}, data, data.points.size() + 1, 0),
                    TooFewPointsForFolds);
  }
}

TEST_CASE("log target space exponentiates the internal prediction", "[models]") {
  Rng rng(37);
  std::vector<std::pair<std::vector<double>, double>> rows;
  for (int i = 0; i < 40; ++i)
    rows.push_back({{rng.uniform(0.0, 10.0)}, std::exp(rng.uniform(0.0, 6.0))});
  ModelSpec spec = memorizing_forest_spec();
  spec.target_space = TargetSpace::Log;
  const Model model = train(spec, dataset_from(rows));
  FeatureVector x;
  x.values = {4.2};
  const double internal = detail::raw_prediction(model, x.values);
  CHECK(predict(model, x) == std::exp(internal));
  CHECK(predict(model, x) > 0.0);
}

TEST_CASE("training input validation", "[models]") {
  SECTION("empty dataset") {
    CHECK_THROWS_AS(train(ModelSpec{}, Dataset{}), EmptyDataset);
  }
  SECTION("inconsistent dimensions") {
    Dataset data = dataset_from({{{1.0, 2.0}, 5.0}});
    TrainingPoint odd;
    odd.features.values = {1.0};
    odd.latency_ms = 2.0;
    data.points.push_back(odd);
    CHECK_THROWS_AS(train(ModelSpec{}, data), DimensionMismatch);
  }
  SECTION("non-finite target") {
    Dataset data = dataset_from({{{1.0}, 5.0}, {{2.0}, std::nan("")}});
    CHECK_THROWS_AS(train(ModelSpec{}, data), NonFiniteTarget);
  }
  SECTION("log space rejects non-positive latency") {
    Dataset data = dataset_from({{{1.0}, 5.0}, {{2.0}, 0.0}});
    ModelSpec spec;
    spec.target_space = TargetSpace::Log;
    CHECK_THROWS_AS(train(spec, data), NonFiniteTarget);
  }
  SECTION("hyperparameters outside documented ranges") {
    ModelSpec spec;
    spec.kind = ModelKind::RandomForest;
    spec.hyperparams = {{"n_trees", 2000}};
    CHECK_THROWS_AS(resolve_spec(spec), InvalidHyperparameter);
    spec.hyperparams = {{"no_such_knob", 1}};
    CHECK_THROWS_AS(resolve_spec(spec), InvalidHyperparameter);
  }
  SECTION("prediction dimension mismatch") {
    const Model model = train(memorizing_forest_spec(), dataset_from({{{1.0, 2.0}, 5.0},
                                                                      {{3.0, 4.0}, 6.0}}));
    FeatureVector x;
    x.values = {1.0};
    CHECK_THROWS_AS(predict(model, x), DimensionMismatch);
  }
}

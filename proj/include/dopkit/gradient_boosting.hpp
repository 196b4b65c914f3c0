#pragma once

// Gradient-boosted regression trees for squared loss: each round fits a tree
// to the current residuals (for this loss the Newton step and the residual fit
// coincide), leaf values carry an L2 term, and updates are shrunk.

#include <cstdint>
#include <span>
#include <vector>

#include "dopkit/decision_tree.hpp"
#include "dopkit/matrix.hpp"
#include "dopkit/rng.hpp"

namespace dopkit {

struct GradientBoostingParams {
  std::size_t n_rounds = 100;
  TreeParams tree{6, 1, 1.0, 1.0};  // depth 6, leaf_l2 = 1
  double shrinkage = 0.1;
};

struct GradientBoostingModel {
  double base_score = 0.0;
  double shrinkage = 0.1;
  std::vector<RegressionTree> trees;

  double predict(std::span<const double> x) const {
    double acc = base_score;
    for (const auto& tree : trees) acc += shrinkage * tree.predict(x);
    return acc;
  }
};

inline GradientBoostingModel fit_gradient_boosting(const Matrix& x, std::span<const double> y,
                                                   const GradientBoostingParams& params,
                                                   std::uint64_t seed,
                                                   std::vector<double>* mse_trace = nullptr) {
  const std::size_t n = x.rows;
  GradientBoostingModel model;
  model.shrinkage = params.shrinkage;
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean += y[i];
  model.base_score = mean / static_cast<double>(n);

  std::vector<double> prediction(n, model.base_score);
  std::vector<double> residual(n);
  const auto mse = [&] {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = y[i] - prediction[i];
      acc += d * d;
    }
    return acc / static_cast<double>(n);
  };
  if (mse_trace) mse_trace->push_back(mse());

  model.trees.reserve(params.n_rounds);
  for (std::size_t round = 0; round < params.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - prediction[i];
    Rng rng = member_stream(seed, round);
    std::vector<std::size_t> rows(n);
    for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    RegressionTree tree = fit_tree(x, residual, std::move(rows), params.tree, rng);
    for (std::size_t i = 0; i < n; ++i)
      prediction[i] += params.shrinkage * tree.predict(x.row(i));
    model.trees.push_back(std::move(tree));
    if (mse_trace) mse_trace->push_back(mse());
  }
  return model;
}

}  // namespace dopkit

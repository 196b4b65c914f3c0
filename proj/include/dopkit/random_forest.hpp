#pragma once

// Bagged regression forest. Each member draws its bootstrap resample and
// per-split feature subsets from a stream seeded with seed + tree index, so
// growing the forest never changes the trees already built.

#include <atomic>
#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "dopkit/decision_tree.hpp"
#include "dopkit/matrix.hpp"
#include "dopkit/rng.hpp"

namespace dopkit {

struct RandomForestParams {
  std::size_t n_trees = 100;
  TreeParams tree{0, 1, 1.0 / 3.0, 0.0};
  bool bootstrap = true;
};

struct RandomForestModel {
  std::vector<RegressionTree> trees;

  double predict(std::span<const double> x) const {
    double sum = 0.0;
    for (const auto& tree : trees) sum += tree.predict(x);
    return sum / static_cast<double>(trees.size());
  }
};

// Members are fit concurrently; each draws from its own seed + index stream
// and lands in its own slot, so the result is identical to a sequential fit.
inline RandomForestModel fit_random_forest(const Matrix& x, std::span<const double> y,
                                           const RandomForestParams& params,
                                           std::uint64_t seed) {
  RandomForestModel model;
  model.trees.resize(params.n_trees);
  const std::size_t n = x.rows;

  const auto fit_member = [&](std::size_t t) {
    Rng rng = member_stream(seed, t);
    std::vector<std::size_t> rows(n);
    if (params.bootstrap)
      for (auto& r : rows) r = static_cast<std::size_t>(rng.below(n));
    else
      for (std::size_t i = 0; i < n; ++i) rows[i] = i;
    model.trees[t] = fit_tree(x, y, std::move(rows), params.tree, rng);
  };

  const std::size_t workers =
      std::min<std::size_t>(params.n_trees,
                            std::max<std::size_t>(1, std::thread::hardware_concurrency()));
  if (workers <= 1) {
    for (std::size_t t = 0; t < params.n_trees; ++t) fit_member(t);
    return model;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t t = next.fetch_add(1); t < params.n_trees; t = next.fetch_add(1))
        fit_member(t);
    });
  for (auto& worker : pool) worker.join();
  return model;
}

}  // namespace dopkit

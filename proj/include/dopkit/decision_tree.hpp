#pragma once

// CART regression trees. Splits are exact greedy sum-of-squares reduction over
// the sorted unique values of each candidate feature; ties resolve to the
// lower feature slot, then the lower threshold (guaranteed by scanning
// features and thresholds in ascending order and replacing only on a strict
// improvement).

#include <algorithm>
#include <cmath>
#include <span>
#include <utility>
#include <vector>

#include "dopkit/matrix.hpp"
#include "dopkit/rng.hpp"

namespace dopkit {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  double predict(std::span<const double> x) const {
    int at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
      const TreeNode& n = nodes[static_cast<std::size_t>(at)];
      at = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
  }
};

struct TreeParams {
  int max_depth = 0;  // 0 = unbounded
  std::size_t min_samples_leaf = 1;
  double feature_fraction = 1.0;  // candidate features per split
  double leaf_l2 = 0.0;           // leaf value = sum(y) / (n + leaf_l2)
};

namespace detail {

struct TreeBuilder {
  const Matrix& x;
  std::span<const double> y;
  const TreeParams& params;
  Rng& rng;
  std::vector<TreeNode> nodes;

  struct Best {
    double gain = 0.0;
    int feature = -1;
    double threshold = 0.0;
  };

  static double sse(double sum, double sumsq, double n) {
    const double s = sumsq - sum * sum / n;
    return s > 0.0 ? s : 0.0;
  }

  std::vector<std::size_t> candidate_features() const {
    const std::size_t m = x.cols;
    if (params.feature_fraction >= 1.0) {
      std::vector<std::size_t> all(m);
      for (std::size_t j = 0; j < m; ++j) all[j] = j;
      return all;
    }
    const auto k = static_cast<std::size_t>(
        std::max(1.0, std::ceil(params.feature_fraction * static_cast<double>(m))));
    return rng.sample_without_replacement(m, std::min(k, m));  // ascending
  }

  int build(std::vector<std::size_t>& rows, int depth) {
    const double n = static_cast<double>(rows.size());
    double sum = 0.0, sumsq = 0.0;
    for (const std::size_t r : rows) {
      sum += y[r];
      sumsq += y[r] * y[r];
    }
    const double node_sse = sse(sum, sumsq, n);
    const double leaf_value = sum / (n + params.leaf_l2);

    const bool depth_capped = params.max_depth > 0 && depth >= params.max_depth;
    Best best;
    if (!depth_capped && rows.size() >= 2 * params.min_samples_leaf && node_sse > 0.0)
      best = find_split(rows, sum, sumsq, node_sse);

    const int index = static_cast<int>(nodes.size());
    nodes.emplace_back();
    if (best.feature < 0) {
      nodes[static_cast<std::size_t>(index)].value = leaf_value;
      return index;
    }

    std::vector<std::size_t> left, right;
    left.reserve(rows.size());
    right.reserve(rows.size());
    for (const std::size_t r : rows)
      (x.at(r, static_cast<std::size_t>(best.feature)) <= best.threshold ? left : right)
          .push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    nodes[static_cast<std::size_t>(index)].feature = best.feature;
    nodes[static_cast<std::size_t>(index)].threshold = best.threshold;
    const int l = build(left, depth + 1);
    const int r = build(right, depth + 1);
    nodes[static_cast<std::size_t>(index)].left = l;
    nodes[static_cast<std::size_t>(index)].right = r;
    return index;
  }

  Best find_split(const std::vector<std::size_t>& rows, double total_sum, double total_sumsq,
                  double node_sse) {
    Best best;
    const std::size_t n = rows.size();
    std::vector<std::pair<double, std::size_t>> order(n);
    for (const std::size_t feature : candidate_features()) {
      for (std::size_t i = 0; i < n; ++i) order[i] = {x.at(rows[i], feature), rows[i]};
      std::sort(order.begin(), order.end());
      if (order.front().first == order.back().first) continue;  // constant feature

      double left_sum = 0.0, left_sumsq = 0.0;
      for (std::size_t i = 1; i < n; ++i) {
        const double yv = y[order[i - 1].second];
        left_sum += yv;
        left_sumsq += yv * yv;
        const double lo = order[i - 1].first;
        const double hi = order[i].first;
        if (lo == hi) continue;
        if (i < params.min_samples_leaf || n - i < params.min_samples_leaf) continue;
        const double gain = node_sse - sse(left_sum, left_sumsq, static_cast<double>(i)) -
                            sse(total_sum - left_sum, total_sumsq - left_sumsq,
                                static_cast<double>(n - i));
        if (gain > best.gain) {
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold < hi)) threshold = lo;  // midpoint rounded up to hi
          best = {gain, static_cast<int>(feature), threshold};
        }
      }
    }
    return best;
  }
};

}  // namespace detail

inline RegressionTree fit_tree(const Matrix& x, std::span<const double> y,
                               std::vector<std::size_t> rows, const TreeParams& params,
                               Rng& rng) {
  detail::TreeBuilder builder{x, y, params, rng, {}};
  builder.build(rows, 0);
  RegressionTree tree;
  tree.nodes = std::move(builder.nodes);
  return tree;
}

}  // namespace dopkit

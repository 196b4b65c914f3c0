#pragma once

// Elastic-net linear regression by cyclic coordinate descent. The objective is
//   MSE + alpha * ( l1_ratio * ||w||_1 + (1 - l1_ratio)/2 * ||w||_2^2 )
// with features z-scored internally; the scaling statistics stay in the model.

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "dopkit/errors.hpp"
#include "dopkit/matrix.hpp"

namespace dopkit {

struct ElasticNetParams {
  double alpha = 0.1;
  double l1_ratio = 0.5;
  double tol = 1e-6;  // max coefficient change per sweep
  std::size_t max_sweeps = 10000;
};

struct ElasticNetModel {
  std::vector<double> coef;  // in z-scored space
  double intercept = 0.0;
  std::vector<double> feature_mean;
  std::vector<double> feature_scale;
  std::size_t sweeps_run = 0;

  double predict(std::span<const double> x) const {
    double acc = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j)
      acc += coef[j] * (x[j] - feature_mean[j]) / feature_scale[j];
    return acc;
  }

  // Coefficients in the original (unscaled) feature space.
  std::vector<double> user_coefficients() const {
    std::vector<double> out(coef.size());
    for (std::size_t j = 0; j < coef.size(); ++j) out[j] = coef[j] / feature_scale[j];
    return out;
  }
  double user_intercept() const {
    double b = intercept;
    for (std::size_t j = 0; j < coef.size(); ++j) b -= coef[j] * feature_mean[j] / feature_scale[j];
    return b;
  }
};

inline ElasticNetModel fit_elastic_net(const Matrix& x, std::span<const double> y,
                                       const ElasticNetParams& params,
                                       std::vector<double>* objective_trace = nullptr) {
  const std::size_t n = x.rows;
  const std::size_t m = x.cols;
  ElasticNetModel model;
  model.coef.assign(m, 0.0);
  model.feature_mean.assign(m, 0.0);
  model.feature_scale.assign(m, 1.0);

  // population z-score; constant columns keep scale 1 and coefficient 0
  std::vector<bool> active(m, false);
  for (std::size_t j = 0; j < m; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += x.at(i, j);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = x.at(i, j) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    model.feature_mean[j] = mean;
    if (var > 0.0) {
      model.feature_scale[j] = std::sqrt(var);
      active[j] = true;
    }
  }

  Matrix xs = Matrix::zeros(n, m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      xs.at(i, j) = (x.at(i, j) - model.feature_mean[j]) / model.feature_scale[j];

  double y_mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) y_mean += y[i];
  y_mean /= static_cast<double>(n);
  model.intercept = y_mean;  // columns are centered, so the intercept is fixed

  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - model.intercept;

  const double l1 = params.alpha * params.l1_ratio;
  const double l2 = params.alpha * (1.0 - params.l1_ratio);
  const auto objective = [&] {
    double mse = 0.0;
    for (const double r : residual) mse += r * r;
    mse /= static_cast<double>(n);
    double norm1 = 0.0, norm2 = 0.0;
    for (const double w : model.coef) {
      norm1 += std::abs(w);
      norm2 += w * w;
    }
    return mse + params.alpha * (params.l1_ratio * norm1 + (1.0 - params.l1_ratio) / 2.0 * norm2);
  };
  if (objective_trace) objective_trace->push_back(objective());

  for (std::size_t sweep = 0; sweep < params.max_sweeps; ++sweep) {
    double max_change = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!active[j]) continue;
      const double old_w = model.coef[j];
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += xs.at(i, j) * residual[i];
      const double z = dot / static_cast<double>(n) + old_w;  // (1/n) sum xs^2 == 1
      const double numer = 2.0 * z;
      const double shrunk = std::abs(numer) > l1 ? (numer > 0 ? numer - l1 : numer + l1) : 0.0;
      const double new_w = shrunk / (2.0 + l2);
      if (new_w != old_w) {
        const double delta = new_w - old_w;
        for (std::size_t i = 0; i < n; ++i) residual[i] -= xs.at(i, j) * delta;
        model.coef[j] = new_w;
        max_change = std::max(max_change, std::abs(delta));
      }
    }
    model.sweeps_run = sweep + 1;
    if (objective_trace) objective_trace->push_back(objective());
    if (max_change < params.tol) break;
  }
  return model;
}

}  // namespace dopkit

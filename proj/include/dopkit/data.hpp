#pragma once

// Training data assembly: measured latency grids joined with featurized plans,
// plus the CSV formats the CLI exchanges.

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dopkit/csv.hpp"
#include "dopkit/errors.hpp"
#include "dopkit/featurize.hpp"
#include "dopkit/plan.hpp"

namespace dopkit {

inline const std::vector<int> kDefaultDopSet{1, 2, 4, 8, 16, 20, 32, 40, 64, 80};
inline constexpr int kDefaultBaselineDop = 64;

struct TrainingPoint {
  FeatureVector features;  // DOP slot filled
  int dop = 1;
  double latency_ms = 0.0;
  std::string plan_id;
  std::string template_id;
  std::string corpus_id;
};

struct Dataset {
  std::vector<TrainingPoint> points;
  std::vector<int> dop_set;  // sorted ascending
};

// Measured (plan, dop) -> latency_ms.
struct LatencyGrid {
  std::map<std::pair<std::string, int>, double> actual_ms;

  void add(const std::string& plan_id, int dop, double latency_ms) {
    if (!(latency_ms > 0.0) || !std::isfinite(latency_ms))
      throw NonPositiveLatency("latency for (" + plan_id + ", dop " + std::to_string(dop) +
                               ") must be a positive number");
    actual_ms[{plan_id, dop}] = latency_ms;
  }

  double at(const std::string& plan_id, int dop) const {
    const auto it = actual_ms.find({plan_id, dop});
    if (it == actual_ms.end())
      throw IncompleteGrid("no latency for (" + plan_id + ", dop " + std::to_string(dop) + ")");
    return it->second;
  }

  bool contains(const std::string& plan_id, int dop) const {
    return actual_ms.count({plan_id, dop}) > 0;
  }
};

// "plan_id,dop,latency_ms" with a header row.
inline std::string latency_to_csv(const LatencyGrid& grid) {
  std::string out = "plan_id,dop,latency_ms\n";
  for (const auto& [key, ms] : grid.actual_ms) {
    out += key.first;
    out += ',';
    out += std::to_string(key.second);
    out += ',';
    out += csv::format_double(ms);
    out += '\n';
  }
  return out;
}

inline LatencyGrid latency_from_csv(const std::string& text) {
  const auto rows = csv::parse(text);
  if (rows.empty()) throw MalformedDocument("latency CSV is empty");
  std::size_t first = 0;
  if (rows[0].size() >= 3 && rows[0][0] == "plan_id") first = 1;  // header optional
  LatencyGrid grid;
  for (std::size_t i = first; i < rows.size(); ++i) {
    if (rows[i].size() != 3)
      throw MalformedDocument("latency CSV row " + std::to_string(i + 1) + " needs 3 fields");
    grid.add(rows[i][0], static_cast<int>(csv::to_long(rows[i][1])), csv::to_double(rows[i][2]));
  }
  return grid;
}

// Feature matrix CSV: plan_id column, one column per slot, trailing dop column
// (the dop slot itself, 0 for unattached vectors).
inline std::string features_to_csv(const std::vector<QueryPlan>& plans,
                                   const FeatureRegistry& registry,
                                   const FeaturizeOptions& options = {}) {
  std::string out = "plan_id";
  for (const auto& name : registry.slot_names()) {
    out += ',';
    out += name;
  }
  out += '\n';
  for (const auto& plan : plans) {
    const auto result = featurize(plan, registry, options);
    out += plan.plan_id;
    for (const double v : result.features.values) {
      out += ',';
      out += csv::format_double(v);
    }
    out += '\n';
  }
  return out;
}

inline std::map<std::string, FeatureVector> features_from_csv(const std::string& text,
                                                              const FeatureRegistry& registry) {
  const auto rows = csv::parse(text);
  if (rows.size() < 2) throw MalformedDocument("feature CSV has no data rows");
  const std::size_t dim = registry.dimension();
  if (rows[0].size() != dim + 1)
    throw DimensionMismatch("feature CSV width " + std::to_string(rows[0].size() - 1) +
                            " does not match registry dimension " + std::to_string(dim));
  std::map<std::string, FeatureVector> out;
  const std::uint64_t fp = registry.fingerprint();
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != dim + 1)
      throw MalformedDocument("feature CSV row " + std::to_string(i + 1) + " has wrong width");
    FeatureVector v;
    v.registry_fingerprint = fp;
    v.values.reserve(dim);
    for (std::size_t c = 1; c < rows[i].size(); ++c) v.values.push_back(csv::to_double(rows[i][c]));
    out[rows[i][0]] = std::move(v);
  }
  return out;
}

// Join plans with a measured grid into training points. Every point's dop must
// be in dop_set; plans missing any (plan, dop) cell are rejected.
inline Dataset make_dataset(const std::vector<QueryPlan>& plans, const LatencyGrid& grid,
                            const FeatureRegistry& registry, const std::vector<int>& dop_set,
                            const FeaturizeOptions& options = {}) {
  if (dop_set.empty()) throw EmptyDopSet("dop set is empty");
  Dataset data;
  data.dop_set = dop_set;
  std::sort(data.dop_set.begin(), data.dop_set.end());
  for (const auto& plan : plans) {
    const auto featurized = featurize(plan, registry, options);
    for (const int dop : data.dop_set) {
      TrainingPoint point;
      point.features = attach_dop(featurized.features, dop);
      point.dop = dop;
      point.latency_ms = grid.at(plan.plan_id, dop);
      point.plan_id = plan.plan_id;
      point.template_id = plan.template_id;
      point.corpus_id = plan.corpus_id;
      data.points.push_back(std::move(point));
    }
  }
  return data;
}

}  // namespace dopkit

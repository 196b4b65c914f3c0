#pragma once

// DOP selection from predicted latency rows, and speedup/costup curves. Ties
// on predicted latency go to the smallest DOP: equal latency on fewer cores
// strictly dominates on cost.

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dopkit/csv.hpp"
#include "dopkit/errors.hpp"
#include "dopkit/featurize.hpp"
#include "dopkit/model.hpp"
#include "dopkit/plan.hpp"

namespace dopkit {

struct DopRecommendation {
  std::string id;  // plan_id, or a workload tag
  int chosen_dop = 1;
  double predicted_ms_at_choice = 0.0;
  std::map<int, double> predicted_row;  // over the full dop set
};

enum class CurveSource { Predicted, Actual };

struct SpeedupCurve {
  int baseline_dop = 1;
  CurveSource source = CurveSource::Predicted;
  struct Point {
    int dop = 1;
    double speedup = 1.0;
    double costup = 1.0;
  };
  std::vector<Point> points;
};

// Predicted latency at every dop in the set, from one shared featurization.
inline std::map<int, double> predicted_row(const Model& model, const QueryPlan& plan,
                                           const FeatureRegistry& registry,
                                           const std::vector<int>& dop_set,
                                           const FeaturizeOptions& options = {}) {
  if (dop_set.empty()) throw EmptyDopSet("dop set is empty");
  const FeatureVector base = featurize(plan, registry, options).features;
  std::map<int, double> row;
  for (const int d : dop_set) row[d] = predict(model, attach_dop(base, d));
  return row;
}

inline DopRecommendation select_from_row(const std::string& id,
                                         const std::map<int, double>& row) {
  if (row.empty()) throw EmptyDopSet("predicted row is empty");
  DopRecommendation rec;
  rec.id = id;
  rec.predicted_row = row;
  rec.chosen_dop = row.begin()->first;
  rec.predicted_ms_at_choice = row.begin()->second;
  for (const auto& [dop, ms] : row) {  // ascending dop; strict < keeps the smallest
    if (ms < rec.predicted_ms_at_choice) {
      rec.chosen_dop = dop;
      rec.predicted_ms_at_choice = ms;
    }
  }
  return rec;
}

inline DopRecommendation select_per_query(const Model& model, const QueryPlan& plan,
                                          const FeatureRegistry& registry,
                                          const std::vector<int>& dop_set,
                                          const FeaturizeOptions& options = {}) {
  return select_from_row(plan.plan_id, predicted_row(model, plan, registry, dop_set, options));
}

inline DopRecommendation select_workload_from_rows(
    const std::vector<std::map<int, double>>& rows, const std::string& tag = "workload") {
  if (rows.empty()) throw EmptyWorkload("no plans in the workload");
  std::map<int, double> total;
  for (const auto& row : rows) {
    if (row.empty()) throw EmptyDopSet("predicted row is empty");
    for (const auto& [dop, ms] : row) total[dop] += ms;
  }
  for (const auto& row : rows)
    if (row.size() != total.size())
      throw IncompleteGrid("plans disagree on the dop set in workload selection");
  return select_from_row(tag, total);
}

inline DopRecommendation select_workload(const Model& model, const std::vector<QueryPlan>& plans,
                                         const FeatureRegistry& registry,
                                         const std::vector<int>& dop_set,
                                         const FeaturizeOptions& options = {}) {
  if (plans.empty()) throw EmptyWorkload("no plans in the workload");
  std::vector<std::map<int, double>> rows;
  rows.reserve(plans.size());
  for (const auto& plan : plans)
    rows.push_back(predicted_row(model, plan, registry, dop_set, options));
  return select_workload_from_rows(rows);
}

// speedup(d) = lat(baseline)/lat(d); costup(d) = cores(d)*lat(d) normalized to
// the baseline. cores(d) defaults to d itself.
inline SpeedupCurve speedup_costup(const std::map<int, double>& row, int baseline_dop,
                                   CurveSource source = CurveSource::Predicted,
                                   const std::map<int, double>* cores_provisioned = nullptr) {
  const auto base_it = row.find(baseline_dop);
  if (base_it == row.end())
    throw MissingBaseline("baseline dop " + std::to_string(baseline_dop) + " is not in the row");
  const auto cores = [&](int d) {
    if (!cores_provisioned) return static_cast<double>(d);
    const auto it = cores_provisioned->find(d);
    if (it == cores_provisioned->end())
      throw MissingBaseline("no provisioned-cores entry for dop " + std::to_string(d));
    return it->second;
  };
  for (const auto& [dop, ms] : row)
    if (!(ms > 0.0))
      throw NonPositiveLatency("latency at dop " + std::to_string(dop) + " must be positive");

  SpeedupCurve curve;
  curve.baseline_dop = baseline_dop;
  curve.source = source;
  const double base_ms = base_it->second;
  const double base_cost = cores(baseline_dop) * base_ms;
  for (const auto& [dop, ms] : row)
    curve.points.push_back({dop, base_ms / ms, cores(dop) * ms / base_cost});
  return curve;
}

// --- exports -------------------------------------------------------------------

inline std::string curve_to_csv(const SpeedupCurve& curve) {
  std::string out = "dop,speedup,costup,source\n";
  const char* source = curve.source == CurveSource::Predicted ? "predicted" : "actual";
  for (const auto& p : curve.points) {
    out += std::to_string(p.dop);
    out += ',';
    out += csv::format_double(p.speedup);
    out += ',';
    out += csv::format_double(p.costup);
    out += ',';
    out += source;
    out += '\n';
  }
  return out;
}

inline nlohmann::json recommendation_to_json(const DopRecommendation& rec) {
  nlohmann::json row = nlohmann::json::object();
  for (const auto& [dop, ms] : rec.predicted_row) row[std::to_string(dop)] = ms;
  return {{"id", rec.id},
          {"chosen_dop", rec.chosen_dop},
          {"predicted_ms_at_choice", rec.predicted_ms_at_choice},
          {"predicted_row", row}};
}

inline nlohmann::json recommendations_to_json(const std::vector<DopRecommendation>& recs) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : recs) arr.push_back(recommendation_to_json(r));
  return arr;
}

}  // namespace dopkit

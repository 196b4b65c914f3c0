#pragma once

// Comparison metrics over a complete (plan x dop) grid of actual and predicted
// latencies: MAE, per-plan relative and speedup prediction error, workload
// throughput under per-query and per-workload DOP selection, and cumulative
// error distributions.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dopkit/csv.hpp"
#include "dopkit/errors.hpp"

namespace dopkit {

struct LatencyCell {
  double actual_ms = 0.0;
  double predicted_ms = 0.0;
};

struct LatencyTable {
  std::vector<int> dop_set;                                  // sorted ascending
  std::map<std::string, std::map<int, LatencyCell>> rows;    // plan -> dop -> cell

  void add(const std::string& plan_id, int dop, double actual_ms, double predicted_ms) {
    if (!(actual_ms > 0.0) || !std::isfinite(actual_ms))
      throw NonPositiveLatency("actual latency for (" + plan_id + ", dop " +
                               std::to_string(dop) + ") must be positive");
    if (predicted_ms < 0.0 || !std::isfinite(predicted_ms))
      throw InvalidArgument("predicted latency for (" + plan_id + ", dop " +
                            std::to_string(dop) + ") must be finite and non-negative");
    rows[plan_id][dop] = {actual_ms, predicted_ms};
  }

  void require_complete() const {
    if (rows.empty() || dop_set.empty()) throw IncompleteGrid("latency table is empty");
    for (const auto& [plan, row] : rows)
      for (const int d : dop_set)
        if (!row.count(d))
          throw IncompleteGrid("plan " + plan + " is missing dop " + std::to_string(d));
  }

  const std::map<int, LatencyCell>& row(const std::string& plan_id) const {
    const auto it = rows.find(plan_id);
    if (it == rows.end()) throw UnknownPlan("plan " + plan_id + " is not in the table");
    for (const int d : dop_set)
      if (!it->second.count(d))
        throw IncompleteGrid("plan " + plan_id + " is missing dop " + std::to_string(d));
    return it->second;
  }
};

// MAE over all (plan, dop) cells, in the latency unit.
inline double mae(const LatencyTable& table) {
  table.require_complete();
  double acc = 0.0;
  std::size_t cells = 0;
  for (const auto& [plan, row] : table.rows)
    for (const int d : table.dop_set) {
      const LatencyCell& c = row.at(d);
      acc += std::abs(c.predicted_ms - c.actual_ms);
      ++cells;
    }
  return acc / static_cast<double>(cells);
}

// Mean over dops of |predicted - actual| / actual for one plan.
inline double rpe(const LatencyTable& table, const std::string& plan_id) {
  const auto& row = table.row(plan_id);
  double acc = 0.0;
  for (const int d : table.dop_set) {
    const LatencyCell& c = row.at(d);
    acc += std::abs(c.predicted_ms - c.actual_ms) / c.actual_ms;
  }
  return acc / static_cast<double>(table.dop_set.size());
}

// Mean over dops of |predicted_d/predicted_1 - actual_d/actual_1|.
inline double spe(const LatencyTable& table, const std::string& plan_id) {
  if (std::find(table.dop_set.begin(), table.dop_set.end(), 1) == table.dop_set.end())
    throw MissingBaselineDop("speedup prediction error needs dop 1 in the dop set");
  const auto& row = table.row(plan_id);
  const LatencyCell& base = row.at(1);
  if (base.predicted_ms == 0.0)
    throw PredictedBaselineZero("plan " + plan_id + " has predicted latency 0 at dop 1");
  double acc = 0.0;
  for (const int d : table.dop_set) {
    const LatencyCell& c = row.at(d);
    acc += std::abs(c.predicted_ms / base.predicted_ms - c.actual_ms / base.actual_ms);
  }
  return acc / static_cast<double>(table.dop_set.size());
}

namespace detail {

// smallest dop wins ties
template <class Get>
int argmin_dop(const std::vector<int>& dop_set, Get&& value) {
  int best_dop = dop_set.front();
  double best = value(dop_set.front());
  for (const int d : dop_set) {
    const double v = value(d);
    if (v < best) {
      best = v;
      best_dop = d;
    }
  }
  return best_dop;
}

}  // namespace detail

// Workload throughput with per-query DOP selection over predicted latencies.
inline double tq(const LatencyTable& table) {
  table.require_complete();
  double total = 0.0;
  for (const auto& [plan, row] : table.rows) {
    double best = std::numeric_limits<double>::infinity();
    for (const int d : table.dop_set) best = std::min(best, row.at(d).predicted_ms);
    total += best;
  }
  return static_cast<double>(table.rows.size()) / total;
}

// Workload throughput with one shared DOP over predicted latencies.
inline double tw(const LatencyTable& table) {
  table.require_complete();
  double best = std::numeric_limits<double>::infinity();
  for (const int d : table.dop_set) {
    double total = 0.0;
    for (const auto& [plan, row] : table.rows) total += row.at(d).predicted_ms;
    best = std::min(best, total);
  }
  return static_cast<double>(table.rows.size()) / best;
}

// Throughput actually achieved by running each plan at its predicted-optimal
// DOP (actual latency at the model's per-query choice).
inline double realized_tq(const LatencyTable& table) {
  table.require_complete();
  double total = 0.0;
  for (const auto& [plan, row] : table.rows) {
    const int chosen =
        detail::argmin_dop(table.dop_set, [&](int d) { return row.at(d).predicted_ms; });
    total += row.at(chosen).actual_ms;
  }
  return static_cast<double>(table.rows.size()) / total;
}

// Throughput actually achieved at the predicted-optimal shared DOP.
inline double realized_tw(const LatencyTable& table) {
  table.require_complete();
  const int chosen = detail::argmin_dop(table.dop_set, [&](int d) {
    double total = 0.0;
    for (const auto& [plan, row] : table.rows) total += row.at(d).predicted_ms;
    return total;
  });
  double total = 0.0;
  for (const auto& [plan, row] : table.rows) total += row.at(chosen).actual_ms;
  return static_cast<double>(table.rows.size()) / total;
}

// Best achievable counterparts, selecting on actual latencies. Useful as the
// denominator when reporting how close realized throughput gets to optimal.
inline double oracle_tq(const LatencyTable& table) {
  table.require_complete();
  double total = 0.0;
  for (const auto& [plan, row] : table.rows) {
    double best = std::numeric_limits<double>::infinity();
    for (const int d : table.dop_set) best = std::min(best, row.at(d).actual_ms);
    total += best;
  }
  return static_cast<double>(table.rows.size()) / total;
}

inline double oracle_tw(const LatencyTable& table) {
  table.require_complete();
  double best = std::numeric_limits<double>::infinity();
  for (const int d : table.dop_set) {
    double total = 0.0;
    for (const auto& [plan, row] : table.rows) total += row.at(d).actual_ms;
    best = std::min(best, total);
  }
  return static_cast<double>(table.rows.size()) / best;
}

// Cumulative percentage of values at or below each threshold.
inline std::vector<double> error_distribution(const std::vector<double>& values,
                                              const std::vector<double>& thresholds) {
  if (values.empty()) throw EmptyValues("error distribution over zero values");
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw InvalidArgument("thresholds must be sorted ascending");
  std::vector<double> out;
  out.reserve(thresholds.size());
  for (const double t : thresholds) {
    std::size_t within = 0;
    for (const double v : values)
      if (v <= t) ++within;
    out.push_back(100.0 * static_cast<double>(within) / static_cast<double>(values.size()));
  }
  return out;
}

inline const std::vector<double> kRpeThresholds{0.1, 0.2, 0.3, 0.4, 0.5,
                                                0.6, 0.7, 0.8, 0.9, 1.0};
inline const std::vector<double> kSpeThresholds{0.001, 0.005, 0.010, 0.050, 0.100};

// --- report --------------------------------------------------------------------

struct MetricsReport {
  double mae = 0.0;
  double rpe_mean = 0.0;
  double rpe_median = 0.0;
  double spe_mean = 0.0;
  double spe_median = 0.0;
  double tq = 0.0;
  double tw = 0.0;
  double realized_tq = 0.0;
  double realized_tw = 0.0;
  double oracle_tq = 0.0;
  double oracle_tw = 0.0;
  std::vector<double> rpe_thresholds, rpe_distribution;
  std::vector<double> spe_thresholds, spe_distribution;
  std::map<std::string, double> rpe_per_plan;
  std::map<std::string, double> spe_per_plan;
};

inline double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 ? values[n / 2] : (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

inline MetricsReport compute_metrics(const LatencyTable& table,
                                     const std::vector<double>& rpe_thresholds = kRpeThresholds,
                                     const std::vector<double>& spe_thresholds = kSpeThresholds) {
  table.require_complete();
  MetricsReport report;
  report.mae = mae(table);
  const bool has_baseline =
      std::find(table.dop_set.begin(), table.dop_set.end(), 1) != table.dop_set.end();
  std::vector<double> rpes, spes;
  for (const auto& [plan, row] : table.rows) {
    const double r = rpe(table, plan);
    rpes.push_back(r);
    report.rpe_per_plan[plan] = r;
    if (has_baseline) {
      const double s = spe(table, plan);
      spes.push_back(s);
      report.spe_per_plan[plan] = s;
    }
  }
  const auto mean_of = [](const std::vector<double>& v) {
    double acc = 0.0;
    for (const double x : v) acc += x;
    return acc / static_cast<double>(v.size());
  };
  report.rpe_mean = mean_of(rpes);
  report.rpe_median = median(rpes);
  report.rpe_thresholds = rpe_thresholds;
  report.rpe_distribution = error_distribution(rpes, rpe_thresholds);
  if (has_baseline) {
    report.spe_mean = mean_of(spes);
    report.spe_median = median(spes);
    report.spe_thresholds = spe_thresholds;
    report.spe_distribution = error_distribution(spes, spe_thresholds);
  }
  report.tq = tq(table);
  report.tw = tw(table);
  report.realized_tq = realized_tq(table);
  report.realized_tw = realized_tw(table);
  report.oracle_tq = oracle_tq(table);
  report.oracle_tw = oracle_tw(table);
  return report;
}

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["mae"] = r.mae;
  j["rpe_mean"] = r.rpe_mean;
  j["rpe_median"] = r.rpe_median;
  j["spe_mean"] = r.spe_mean;
  j["spe_median"] = r.spe_median;
  j["tq"] = r.tq;
  j["tw"] = r.tw;
  j["realized_tq"] = r.realized_tq;
  j["realized_tw"] = r.realized_tw;
  j["oracle_tq"] = r.oracle_tq;
  j["oracle_tw"] = r.oracle_tw;
  j["distributions"] = {
      {"rpe", {{"thresholds", r.rpe_thresholds}, {"percent_within", r.rpe_distribution}}},
      {"spe", {{"thresholds", r.spe_thresholds}, {"percent_within", r.spe_distribution}}}};
  j["rpe_per_plan"] = r.rpe_per_plan;
  j["spe_per_plan"] = r.spe_per_plan;
  return j;
}

// One header row and one value row; distribution columns are suffixed with
// their threshold, e.g. "rpe_le_0.3".
inline std::string metrics_to_csv(const MetricsReport& r) {
  std::string header = "mae,rpe_mean,rpe_median,spe_mean,spe_median,tq,tw,realized_tq,"
                       "realized_tw,oracle_tq,oracle_tw";
  std::string values = csv::format_double(r.mae) + ',' + csv::format_double(r.rpe_mean) + ',' +
                       csv::format_double(r.rpe_median) + ',' + csv::format_double(r.spe_mean) +
                       ',' + csv::format_double(r.spe_median) + ',' + csv::format_double(r.tq) +
                       ',' + csv::format_double(r.tw) + ',' + csv::format_double(r.realized_tq) +
                       ',' + csv::format_double(r.realized_tw) + ',' +
                       csv::format_double(r.oracle_tq) + ',' + csv::format_double(r.oracle_tw);
  for (std::size_t i = 0; i < r.rpe_thresholds.size(); ++i) {
    header += ",rpe_le_" + csv::format_double(r.rpe_thresholds[i]);
    values += ',' + csv::format_double(r.rpe_distribution[i]);
  }
  for (std::size_t i = 0; i < r.spe_thresholds.size(); ++i) {
    header += ",spe_le_" + csv::format_double(r.spe_thresholds[i]);
    values += ',' + csv::format_double(r.spe_distribution[i]);
  }
  return header + '\n' + values + '\n';
}

}  // namespace dopkit

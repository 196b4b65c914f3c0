#include <catch2/catch_amalgamated.hpp>

#include "dopkit/metrics.hpp"
#include "dopkit/rng.hpp"

using namespace dopkit;

namespace {

LatencyTable table_of(std::vector<int> dops,
                      const std::map<std::string, std::map<int, LatencyCell>>& rows) {
  LatencyTable t;
  t.dop_set = std::move(dops);
  for (const auto& [plan, row] : rows)
    for (const auto& [dop, cell] : row) t.add(plan, dop, cell.actual_ms, cell.predicted_ms);
  return t;
}

LatencyTable random_table(Rng& rng, std::size_t plans, const std::vector<int>& dops) {
  LatencyTable t;
  t.dop_set = dops;
  for (std::size_t p = 0; p < plans; ++p)
    for (const int d : dops)
      t.add("p" + std::to_string(p), d, rng.uniform(1.0, 1000.0), rng.uniform(0.0, 1000.0));
  return t;
}

}  // namespace

TEST_CASE("mean absolute error", "[metrics]") {
  SECTION("perfect prediction gives zero") {
    const auto t = table_of({1, 2}, {{"q", {{1, {10, 10}}, {2, {20, 20}}}}});
    CHECK(mae(t) == 0.0);
  }
  SECTION("hand-computed fixture") {
    // 1 plan, D={1,2}, actual {10,20}, predicted {12,16} -> (2+4)/2 = 3
    const auto t = table_of({1, 2}, {{"q", {{1, {10, 12}}, {2, {20, 16}}}}});
    CHECK(mae(t) == 3.0);
  }
  SECTION("missing cell is an incomplete grid") {
    LatencyTable t;
    t.dop_set = {1, 2};
    t.add("q", 1, 10, 10);
    CHECK_THROWS_AS(mae(t), IncompleteGrid);
  }
}

TEST_CASE("relative prediction error", "[metrics]") {
  SECTION("uniform factor-of-two over-prediction gives 1.0") {
    const auto t = table_of({1, 2}, {{"q", {{1, {10, 20}}, {2, {30, 60}}}}});
    CHECK(rpe(t, "q") == 1.0);
  }
  SECTION("hand-computed fixture") {
    // actual {10,20}, predicted {11,18} -> (0.1 + 0.1)/2 = 0.1
    const auto t = table_of({1, 2}, {{"q", {{1, {10, 11}}, {2, {20, 18}}}}});
    CHECK(rpe(t, "q") == Catch::Approx(0.1).epsilon(1e-12));
  }
  SECTION("perfect prediction gives zero") {
    const auto t = table_of({1, 2}, {{"q", {{1, {10, 10}}, {2, {20, 20}}}}});
    CHECK(rpe(t, "q") == 0.0);
  }
  SECTION("unknown plan") {
    const auto t = table_of({1}, {{"q", {{1, {10, 10}}}}});
    CHECK_THROWS_AS(rpe(t, "nope"), UnknownPlan);
  }
}

TEST_CASE("speedup prediction error", "[metrics]") {
  SECTION("any uniform scaling of predictions gives zero") {
    const auto t = table_of({1, 2, 4}, {{"q",
                                         {{1, {100, 370}},
                                          {2, {50, 185}},
                                          {4, {25, 92.5}}}}});
    CHECK(spe(t, "q") == 0.0);
  }
  SECTION("hand-computed fixture") {
    // actual {1:100, 2:50} (2x speedup), predicted flat -> (0 + 0.5)/2 = 0.25
    const auto t = table_of({1, 2}, {{"q", {{1, {100, 100}}, {2, {50, 100}}}}});
    CHECK(spe(t, "q") == Catch::Approx(0.25).epsilon(1e-12));
  }
  SECTION("dop set without 1 cannot be normalized") {
    const auto t = table_of({2, 4}, {{"q", {{2, {50, 50}}, {4, {25, 25}}}}});
    CHECK_THROWS_AS(spe(t, "q"), MissingBaselineDop);
  }
  SECTION("predicted baseline of zero is an error, not infinity") {
    const auto t = table_of({1, 2}, {{"q", {{1, {100, 0}}, {2, {50, 10}}}}});
    CHECK_THROWS_AS(spe(t, "q"), PredictedBaselineZero);
  }
}

TEST_CASE("throughput metrics", "[metrics]") {
  SECTION("hand-computed fixture") {
    // predicted rows {10,20} and {20,10}: TQ = 2/20 = 0.1, TW = 2/30
    const auto t = table_of({1, 2}, {{"a", {{1, {15, 10}}, {2, {15, 20}}}},
                                     {"b", {{1, {15, 20}}, {2, {15, 10}}}}});
    CHECK(tq(t) == Catch::Approx(0.1).epsilon(1e-12));
    CHECK(tw(t) == Catch::Approx(2.0 / 30.0).epsilon(1e-12));
  }
  SECTION("constant predictions collapse TQ and TW") {
    const auto t = table_of({1, 2}, {{"a", {{1, {5, 7}}, {2, {5, 7}}}},
                                     {"b", {{1, {5, 7}}, {2, {5, 7}}}}});
    CHECK(tq(t) == tw(t));
    CHECK(tq(t) == Catch::Approx(2.0 / 14.0).epsilon(1e-12));
  }
  SECTION("single plan degenerates to the same value") {
    const auto t = table_of({1, 2}, {{"a", {{1, {5, 9}}, {2, {5, 4}}}}});
    CHECK(tq(t) == tw(t));
  }
  SECTION("TQ >= TW on randomized complete grids") {
    Rng rng(616);
    for (int i = 0; i < 300; ++i) {
      const auto t = random_table(rng, 1 + rng.below(6), {1, 2, 4, 8});
      REQUIRE(tq(t) >= tw(t));
    }
  }
}

TEST_CASE("realized throughput uses actual latency at the predicted choice", "[metrics]") {
  // model prefers dop 2 for both plans; actual latencies at dop 2 are 40 and 60
  const auto t = table_of({1, 2}, {{"a", {{1, {30, 50}}, {2, {40, 20}}}},
                                   {"b", {{1, {50, 90}}, {2, {60, 30}}}}});
  CHECK(realized_tq(t) == Catch::Approx(2.0 / 100.0).epsilon(1e-12));
  CHECK(realized_tw(t) == Catch::Approx(2.0 / 100.0).epsilon(1e-12));
  // oracle picks actual minima: 30 + 50
  CHECK(oracle_tq(t) == Catch::Approx(2.0 / 80.0).epsilon(1e-12));
  CHECK(oracle_tw(t) == Catch::Approx(2.0 / 80.0).epsilon(1e-12));
}

TEST_CASE("SPE is invariant to scaling a plan's predicted row", "[metrics][property]") {
  Rng rng(617);
  for (int i = 0; i < 100; ++i) {
    LatencyTable t;
    t.dop_set = {1, 2, 4};
    for (const int d : t.dop_set) t.add("q", d, rng.uniform(1.0, 100.0), rng.uniform(0.1, 100.0));
    const double before = spe(t, "q");
    const double factor = rng.uniform(0.1, 10.0);
    LatencyTable scaled;
    scaled.dop_set = t.dop_set;
    for (const int d : t.dop_set) {
      const auto& cell = t.rows.at("q").at(d);
      scaled.add("q", d, cell.actual_ms, cell.predicted_ms * factor);
    }
    REQUIRE(spe(scaled, "q") == Catch::Approx(before).margin(1e-12));
  }
}

TEST_CASE("error distribution", "[metrics]") {
  SECTION("hand-computed fixture") {
    const auto d = error_distribution({0.05, 0.15, 0.25}, {0.1, 0.2, 0.3});
    REQUIRE(d.size() == 3);
    CHECK(d[0] == Catch::Approx(100.0 / 3.0).epsilon(1e-12));
    CHECK(d[1] == Catch::Approx(200.0 / 3.0).epsilon(1e-12));
    CHECK(d[2] == 100.0);
  }
  SECTION("all-zero values saturate immediately") {
    const auto d = error_distribution({0.0, 0.0}, {0.0, 0.5});
    CHECK(d == std::vector<double>{100.0, 100.0});
  }
  SECTION("threshold below the minimum gives zero percent") {
    const auto d = error_distribution({0.5, 0.7}, {0.1});
    CHECK(d[0] == 0.0);
  }
  SECTION("empty input is an error") {
    CHECK_THROWS_AS(error_distribution({}, {0.1}), EmptyValues);
  }
  SECTION("output is monotone in the thresholds") {
    Rng rng(618);
    std::vector<double> values;
    for (int i = 0; i < 50; ++i) values.push_back(rng.uniform(0.0, 2.0));
    const auto d = error_distribution(values, kRpeThresholds);
    for (std::size_t i = 1; i < d.size(); ++i) REQUIRE(d[i] >= d[i - 1]);
    for (const double p : d) {
      REQUIRE(p >= 0.0);
      REQUIRE(p <= 100.0);
    }
  }
}

TEST_CASE("metrics report emitters", "[metrics]") {
  Rng rng(619);
  const auto t = random_table(rng, 4, {1, 2, 4});
  const MetricsReport report = compute_metrics(t);

  SECTION("JSON carries the stable column names") {
    const auto j = metrics_to_json(report);
    for (const char* field : {"mae", "rpe_mean", "spe_mean", "tq", "tw", "realized_tq",
                              "realized_tw", "distributions"})
      REQUIRE(j.contains(field));
    CHECK(j["distributions"]["rpe"]["thresholds"].size() == kRpeThresholds.size());
  }
  SECTION("CSV header is stable and row parses back") {
    const std::string text = metrics_to_csv(report);
    const auto rows = csv::parse(text);
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][0] == "mae");
    CHECK(rows[0].size() == rows[1].size());
    CHECK(csv::to_double(rows[1][0]) == report.mae);
  }
  SECTION("perfect predictions zero every error metric") {
    LatencyTable perfect;
    perfect.dop_set = {1, 2};
    for (const int d : perfect.dop_set) {
      perfect.add("a", d, 10.0 * d, 10.0 * d);
      perfect.add("b", d, 7.0 * d, 7.0 * d);
    }
    const auto r = compute_metrics(perfect);
    CHECK(r.mae == 0.0);
    CHECK(r.rpe_mean == 0.0);
    CHECK(r.spe_mean == 0.0);
    CHECK(r.realized_tq == r.oracle_tq);
  }
}

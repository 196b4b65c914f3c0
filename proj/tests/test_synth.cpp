#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "dopkit/synth.hpp"

using namespace dopkit;

namespace {

TemplateArchetype bare(ArchetypeKind kind, double serial, double parallel, int saturation,
                       double contention) {
  TemplateArchetype a = default_archetype(kind);
  a.serial_ms = serial;
  a.parallel_ms = parallel;
  a.saturation_dop = saturation;
  a.contention_per_dop_ms = contention;
  return a;
}

}  // namespace

TEST_CASE("ground-truth latency closed form", "[synth]") {
  SECTION("flat archetype is constant") {
    const auto a = bare(ArchetypeKind::Flat, 100.0, 0.0, 4, 0.0);
    for (const int d : kDefaultDopSet) CHECK(ground_truth_latency(a, d) == 100.0);
  }
  SECTION("pure parallel work scales ideally until saturation") {
    const auto a = bare(ArchetypeKind::Parallelizable, 0.0, 800.0, 80, 0.0);
    CHECK(ground_truth_latency(a, 1) == 800.0);
    CHECK(ground_truth_latency(a, 8) == 100.0);
    CHECK(ground_truth_latency(a, 80) == 10.0);
  }
  SECTION("latency flattens past the saturation dop") {
    const auto a = bare(ArchetypeKind::Saturating, 10.0, 640.0, 16, 0.0);
    CHECK(ground_truth_latency(a, 16) == ground_truth_latency(a, 64));
  }
  SECTION("contention grows linearly with dop") {
    const auto a = bare(ArchetypeKind::Flat, 10.0, 0.0, 1, 2.0);
    CHECK(ground_truth_latency(a, 10) - ground_truth_latency(a, 1) == 18.0);
  }
  SECTION("spill cliff appears strictly beyond spill_dop") {
    auto a = bare(ArchetypeKind::SpillCliff, 10.0, 100.0, 80, 0.0);
    a.spill_dop = 20;
    a.spill_penalty_ms = 500.0;
    CHECK(ground_truth_latency(a, 16) < ground_truth_latency(a, 32));
    CHECK(ground_truth_latency(a, 20) == 10.0 + 5.0);          // at the edge, no penalty
    CHECK(ground_truth_latency(a, 32) == 10.0 + 3.125 + 500.0);
  }
  SECTION("invalid dop") {
    CHECK_THROWS_AS(ground_truth_latency(default_archetype(ArchetypeKind::Flat), 0), InvalidDop);
  }
  SECTION("noise multiplies and sigma zero is exact") {
    const auto a = bare(ArchetypeKind::Parallelizable, 5.0, 100.0, 8, 0.1);
    Rng rng(9);
    CHECK(ground_truth_latency(a, 4, 0.0, rng) == ground_truth_latency(a, 4));
    for (int i = 0; i < 100; ++i) {
      const double noisy = ground_truth_latency(a, 4, 0.05, rng);
      REQUIRE(noisy > 0.0);
    }
  }
}

TEST_CASE("corpus generation", "[synth]") {
  const std::vector<int> dops{1, 2, 4, 8, 16, 20, 32, 40, 64, 80};

  SECTION("grid size arithmetic: 1 template x 1 plan x |D| points") {
    SynthEntry entry;
    entry.archetype = default_archetype(ArchetypeKind::Parallelizable);
    const auto corpus = generate_corpus({entry}, dops, 7);
    REQUIRE(corpus.plans.size() == 1);
    CHECK(corpus.grid.actual_ms.size() == dops.size());
    for (const int d : dops) CHECK(corpus.grid.contains(corpus.plans[0].plan_id, d));
  }
  SECTION("same seed reproduces the corpus exactly") {
    SynthEntry entry;
    entry.archetype = default_archetype(ArchetypeKind::Saturating);
    entry.n_templates = 3;
    entry.n_plans_per_template = 4;
    const auto a = generate_corpus({entry}, dops, 99);
    const auto b = generate_corpus({entry}, dops, 99);
    REQUIRE(a.plans == b.plans);
    REQUIRE(a.grid.actual_ms == b.grid.actual_ms);
  }
  SECTION("different seeds differ") {
    SynthEntry entry;
    entry.archetype = default_archetype(ArchetypeKind::Saturating);
    entry.n_templates = 2;
    entry.n_plans_per_template = 2;
    const auto a = generate_corpus({entry}, dops, 1);
    const auto b = generate_corpus({entry}, dops, 2);
    CHECK(a.grid.actual_ms != b.grid.actual_ms);
  }
  SECTION("plans are valid and carry provenance") {
    std::vector<SynthEntry> spec;
    for (const auto kind : {ArchetypeKind::Flat, ArchetypeKind::Parallelizable,
                            ArchetypeKind::Saturating, ArchetypeKind::SpillCliff}) {
      SynthEntry e;
      e.archetype = default_archetype(kind);
      e.n_templates = 2;
      e.n_plans_per_template = 3;
      spec.push_back(e);
    }
    const auto corpus = generate_corpus(spec, dops, 5, {.corpus_id = "c1"});
    REQUIRE(corpus.plans.size() == 4 * 2 * 3);
    std::set<std::string> plan_ids;
    for (const auto& plan : corpus.plans) {
      CHECK(validate_plan(plan).empty());  // no fully-serial warnings by construction
      CHECK(plan.corpus_id == "c1");
      CHECK_FALSE(plan.template_id.empty());
      plan_ids.insert(plan.plan_id);
    }
    CHECK(plan_ids.size() == corpus.plans.size());
  }
  SECTION("archetype vocabularies give distinguishable key multisets") {
    std::map<ArchetypeKind, std::set<std::string>> ops_by_kind;
    for (const auto kind : {ArchetypeKind::Flat, ArchetypeKind::Parallelizable,
                            ArchetypeKind::Saturating, ArchetypeKind::SpillCliff}) {
      SynthEntry e;
      e.archetype = default_archetype(kind);
      e.n_templates = 4;
      const auto corpus = generate_corpus({e}, dops, 3);
      for (const auto& plan : corpus.plans)
        for (const auto& n : plan.nodes) ops_by_kind[kind].insert(n.op);
    }
    // every archetype uses at least one operator no other archetype uses
    for (const auto& [kind, ops] : ops_by_kind) {
      bool has_unique = false;
      for (const auto& op : ops) {
        bool elsewhere = false;
        for (const auto& [other, other_ops] : ops_by_kind)
          if (other != kind && other_ops.count(op)) elsewhere = true;
        if (!elsewhere) has_unique = true;
      }
      CHECK(has_unique);
    }
  }
  SECTION("plan estimates track the per-plan latency scale") {
    SynthEntry entry;
    entry.archetype = default_archetype(ArchetypeKind::Parallelizable);
    entry.n_plans_per_template = 4;
    const auto corpus = generate_corpus({entry}, dops, 21, {.sigma = 0.0});
    // all plans share a template; bytes ratios must equal latency ratios
    const double bytes0 = corpus.plans[0].nodes[1].est_output_bytes;
    const double lat0 = corpus.grid.at(corpus.plans[0].plan_id, 1);
    for (std::size_t p = 1; p < corpus.plans.size(); ++p) {
      const double bytes_ratio = corpus.plans[p].nodes[1].est_output_bytes / bytes0;
      const double lat_ratio = corpus.grid.at(corpus.plans[p].plan_id, 1) / lat0;
      CHECK(bytes_ratio == Catch::Approx(lat_ratio).epsilon(1e-9));
    }
  }
  SECTION("scale option multiplies latencies") {
    SynthEntry entry;
    entry.archetype = default_archetype(ArchetypeKind::Flat);
    const auto small = generate_corpus({entry}, dops, 11, {.sigma = 0.0, .scale = 1.0});
    const auto big = generate_corpus({entry}, dops, 11, {.sigma = 0.0, .scale = 3.0});
    const double ratio = big.grid.at(big.plans[0].plan_id, 1) /
                         small.grid.at(small.plans[0].plan_id, 1);
    CHECK(ratio == Catch::Approx(3.0).epsilon(1e-9));
  }
  SECTION("invalid specs are rejected") {
    CHECK_THROWS_AS(generate_corpus({}, dops, 1), InvalidSpec);
    SynthEntry entry;
    entry.archetype = default_archetype(ArchetypeKind::SpillCliff);
    entry.archetype.spill_dop = 13;  // not in the dop set
    CHECK_THROWS_AS(generate_corpus({entry}, dops, 1), InvalidSpec);
    SynthEntry negative;
    negative.archetype = default_archetype(ArchetypeKind::Flat);
    negative.archetype.serial_ms = -5.0;
    CHECK_THROWS_AS(generate_corpus({negative}, dops, 1), InvalidSpec);
  }
}

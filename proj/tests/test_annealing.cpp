#include <doctest.h>

#include <cmath>
#include <map>

#include "isde_anneal/annealing.hpp"
#include "oracles.hpp"

using namespace isde_anneal;

namespace {

CostFunction bowl_1d() {
  return CostFunction(
      1, [](const Vec& a) { return a[0] * a[0]; },
      [](const Vec& a) { return Vec{2.0 * a[0]}; });
}

CostFunction bowl(std::size_t n) {
  return CostFunction(
      n, [](const Vec& a) { return dot(a, a); },
      [](const Vec& a) {
        Vec g(a.size());
        for (std::size_t i = 0; i < a.size(); ++i) g[i] = 2.0 * a[i];
        return g;
      });
}

void check_trace_invariants(const RunResult& res) {
  double best = std::numeric_limits<double>::infinity();
  std::uint64_t evals = 0;
  int stage = 0;
  for (const TraceRow& row : res.trace) {
    CHECK(row.stage == stage + 1);
    stage = row.stage;
    CHECK(row.best_cost <= best + 1e-300);
    best = row.best_cost;
    CHECK(row.evaluations >= evals);
    evals = row.evaluations;
  }
  CHECK(res.best_value == res.trace.back().best_cost);
}

}  // namespace

TEST_CASE("temperature law") {
  const AnnealSchedule flat{2.0, 0.0, 0.5, 10};
  for (int k = 1; k <= 10; ++k) CHECK(temperature(k, flat) == doctest::Approx(2.5));

  const AnnealSchedule decay{2.0, 0.1, 0.25, 2000};
  CHECK(temperature(2000, decay) == doctest::Approx(0.25).epsilon(1e-8));
  for (int k = 1; k < 2000; ++k)
    CHECK(temperature(k + 1, decay) <= temperature(k, decay));

  const AnnealSchedule paper{36.7, 0.02, 0.0351, 500};
  CHECK(temperature(1, paper) ==
        doctest::Approx(36.7 * std::exp(-0.02) + 0.0351).epsilon(1e-14));
  CHECK(temperature(1, paper) == doctest::Approx(36.008).epsilon(1e-4));

  CHECK_THROWS_AS(temperature(0, paper), std::invalid_argument);
  CHECK_THROWS_AS(temperature(501, paper), std::invalid_argument);
  CHECK_THROWS_AS((AnnealSchedule{-1.0, 0.1, 0.0, 5}).validate(), std::invalid_argument);
}

TEST_CASE("metropolis acceptance frequency at delta = T is about 1/e") {
  Rng rng(101);
  int accepted = 0;
  const int trials = 10000;
  for (int t = 0; t < trials; ++t) {
    if (metropolis_accept(1.0, 1.0, rng)) ++accepted;
  }
  const double rate = static_cast<double>(accepted) / trials;
  CHECK(std::abs(rate - std::exp(-1.0)) < 0.02);

  CHECK(metropolis_accept(-0.5, 1e-300, rng));  // improvements always accepted
}

TEST_CASE("classical sa behaves as strict descent at vanishing temperature") {
  const CostFunction cost = bowl_1d();
  const auto region = AdmissibleRegion::box(Vec{-1.0}, Vec{1.0});
  ClassicalSaOptions opts;
  opts.schedule = {1e-6, 50.0, 0.0, 2};  // T ~ 2e-28 from stage 1 on
  opts.steps_per_stage = 1001;           // 1000 proposals in the single stage
  const RunResult res = classical_sa(cost, region, opts, 4);
  CHECK_FALSE(res.aborted);
  CHECK(res.counters.proposals == 1000);
  CHECK(res.counters.uphill_accepted == 0);
  check_trace_invariants(res);
}

TEST_CASE("classical sa finds the 1-d bowl minimum on a slow schedule") {
  const CostFunction cost = bowl_1d();
  const auto region = AdmissibleRegion::box(Vec{-1.0}, Vec{1.0});
  ClassicalSaOptions opts;
  opts.schedule = {1.0, 0.02, 1e-4, 300};
  opts.steps_per_stage = 10;
  int good = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const RunResult res = classical_sa(cost, region, opts, seed);
    REQUIRE_FALSE(res.aborted);
    if (std::abs(res.best_point[0]) < 0.05) ++good;
    check_trace_invariants(res);
  }
  CHECK(good >= 9);
}

TEST_CASE("classical sa trace and accounting") {
  const CostFunction cost = bowl(2);
  const auto region = AdmissibleRegion::box(Vec(2, -2.0), Vec(2, 2.0));
  ClassicalSaOptions opts;
  opts.schedule = {1.0, 0.05, 0.01, 25};
  opts.steps_per_stage = 5;
  const std::uint64_t before = cost.evaluations();
  const RunResult res = classical_sa(cost, region, opts, 9);
  CHECK(res.trace.size() == 25);
  CHECK(res.evaluations == cost.evaluations() - before);
  CHECK(res.counters.proposals == 24 * 4);
  CHECK(res.counters.accepted <= res.counters.proposals);
  check_trace_invariants(res);
}

TEST_CASE("isde sa solves the bowl and carries velocity between stages") {
  const CostFunction cost = bowl(2);
  const auto region = AdmissibleRegion::box(Vec(2, -2.0), Vec(2, 2.0));
  IsdeSaOptions opts;
  opts.schedule = {1.0, 0.03, 1e-4, 200};
  opts.isde.steps_per_stage = 15;

  std::map<int, IsdeState> ends;
  std::map<int, IsdeState> begins;
  opts.stage_observer = [&](int k, const IsdeState& b, const IsdeState& e) {
    begins[k] = b;
    ends[k] = e;
  };

  int good = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    begins.clear();
    ends.clear();
    const RunResult res = isde_sa(cost, region, opts, seed);
    REQUIRE_FALSE(res.aborted);
    if (norm(res.best_point) < 0.05) ++good;
    check_trace_invariants(res);
    // Stage k + 1 starts exactly where stage k ended.
    for (int k = 1; k < 199; ++k) {
      CHECK(begins.at(k + 1).position == ends.at(k).position);
      CHECK(begins.at(k + 1).velocity == ends.at(k).velocity);
    }
  }
  CHECK(good >= 9);
}

TEST_CASE("isde sa is reproducible bit for bit") {
  const CostFunction cost = bowl(3);
  const auto region = AdmissibleRegion::box(Vec(3, -2.0), Vec(3, 2.0));
  IsdeSaOptions opts;
  opts.schedule = {1.0, 0.05, 1e-3, 50};
  opts.isde.steps_per_stage = 10;
  const RunResult a = isde_sa(cost, region, opts, 77);
  const RunResult b = isde_sa(cost, region, opts, 77);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].point == b.trace[i].point);
    CHECK(a.trace[i].exact_cost == b.trace[i].exact_cost);
  }
  CHECK(a.best_point == b.best_point);
}

TEST_CASE("approx isde sa: accounting identity and control-point containment") {
  const CostFunction cost = make_ackley(3);
  const auto region = AdmissibleRegion::box(Vec(3, -5.0), Vec(3, 5.0), Vec(3, 0.3));
  ApproxIsdeSaOptions opts;
  opts.schedule = {2.5, 0.05, 0.01, 40};
  opts.isde.steps_per_stage = 20;
  opts.initial_control_points = 12;
  const std::uint64_t before = cost.evaluations();
  const RunResult res = approx_isde_sa(cost, region, opts, 5);
  REQUIRE_FALSE(res.aborted);
  REQUIRE(res.final_surrogate);

  // evaluations = initial design + accepted enrichments (+ any skips that
  // failed after evaluation; none expected on ackley)
  const std::uint64_t accepted = res.final_surrogate->size() - 12;
  CHECK(res.evaluations == cost.evaluations() - before);
  CHECK(res.evaluations == 12 + accepted + res.counters.enrichment_skips);
  CHECK(res.evaluations <= 12 + 39);
  CHECK(res.trace.size() == 40);
  check_trace_invariants(res);

  // Every control point stays within the box expanded by 3 alpha.
  for (std::size_t i = 0; i < res.final_surrogate->size(); ++i) {
    const Vec p = res.final_surrogate->point(i);
    for (std::size_t d = 0; d < p.size(); ++d) {
      CHECK(p[d] >= region.lower[d] - 3.0 * region.alpha[d]);
      CHECK(p[d] <= region.upper[d] + 3.0 * region.alpha[d]);
    }
  }
}

TEST_CASE("approx isde sa is deterministic also with several chains") {
  const CostFunction cost = make_ackley(2);
  const auto region = AdmissibleRegion::box(Vec(2, -5.0), Vec(2, 5.0), Vec(2, 0.3));
  ApproxIsdeSaOptions opts;
  opts.schedule = {2.5, 0.05, 0.01, 25};
  opts.isde.steps_per_stage = 12;
  opts.initial_control_points = 10;
  opts.chains = 3;
  opts.max_threads = 2;
  const RunResult a = approx_isde_sa(cost, region, opts, 11);
  const RunResult b = approx_isde_sa(cost, region, opts, 11);
  REQUIRE_FALSE(a.aborted);
  REQUIRE(a.trace.size() == b.trace.size());
  for (std::size_t i = 0; i < a.trace.size(); ++i) {
    CHECK(a.trace[i].point == b.trace[i].point);
    CHECK(a.trace[i].exact_cost == b.trace[i].exact_cost);
    CHECK(a.trace[i].surrogate_cost == b.trace[i].surrogate_cost);
  }
  CHECK(a.best_point == b.best_point);
  CHECK(a.best_value == b.best_value);
  CHECK(a.evaluations == b.evaluations);
  // Multi-chain budget: initial + at most stages * chains.
  CHECK(a.evaluations <= 10 + 24 * 3);
}

TEST_CASE("approx isde sa validates its preconditions") {
  const CostFunction cost = make_ackley(4);
  const auto region = AdmissibleRegion::box(Vec(4, -5.0), Vec(4, 5.0));
  ApproxIsdeSaOptions opts;
  opts.schedule = {1.0, 0.05, 0.01, 5};
  opts.initial_control_points = 4;  // < N + 2
  CHECK_THROWS_AS(approx_isde_sa(cost, region, opts, 1), std::invalid_argument);

  const auto positive = AdmissibleRegion::positive(Vec(4, 0.1));
  opts.initial_control_points = 10;
  CHECK_THROWS_AS(approx_isde_sa(cost, positive, opts, 1), std::invalid_argument);
  opts.seed_box = SeedBox{Vec(4, 0.5), Vec(4, 5.0)};
  CHECK_FALSE(approx_isde_sa(cost, positive, opts, 1).aborted);
}

TEST_CASE("a stage that keeps diverging is retried once, then aborts with a partial trace") {
  // The gradient is tame near the start but non-finite outside |a| < 0.5, a
  // zone the flat-potential dynamics leave within a few steps, on the halved
  // step as well.
  const CostFunction cost(
      1, [](const Vec& a) { return std::abs(a[0]); },
      [](const Vec& a) {
        if (std::abs(a[0]) > 0.5) return Vec{std::numeric_limits<double>::infinity()};
        return Vec{a[0]};
      });
  const auto region = AdmissibleRegion::box(Vec{-50.0}, Vec{50.0}, Vec{1.0});
  IsdeSaOptions opts;
  opts.schedule = {1.0, 0.05, 0.01, 10};
  opts.isde.steps_per_stage = 40;
  opts.seed_box = SeedBox{Vec{-0.1}, Vec{0.1}};
  const RunResult res = isde_sa(cost, region, opts, 1);
  CHECK(res.aborted);
  CHECK(res.counters.divergence_retries == 1);
  CHECK(res.trace.size() == 1);  // the initial row survives
}

TEST_CASE("integrate reports the failing step index") {
  const CostFunction cost(
      1, [](const Vec& a) { return a[0] * a[0]; },
      [](const Vec& a) { return Vec{2.0 * a[0]}; });
  const auto region = AdmissibleRegion::box(Vec{-1e300}, Vec{1e300}, Vec{1.0});
  const Potential pot(cost, region, 1.0, /*gradient_cap=*/1e307);
  IsdeConfig cfg;
  cfg.step = 1e160;  // overflows the position update after a couple of steps
  cfg.damping = 0.0;
  cfg.steps_per_stage = 10;
  Rng rng(1);
  try {
    integrate({Vec{1.0}, Vec{0.0}}, pot, cfg, rng);
    FAIL("expected DivergedStateError");
  } catch (const DivergedStateError& e) {
    CHECK(e.step_index() >= 1);
    CHECK(e.last_position().size() == 1);
  }
}

TEST_CASE("approx isde sa reproduces the planar ackley run at paper scale") {
  const CostFunction cost = make_ackley(2);
  const auto region = AdmissibleRegion::box(Vec(2, -5.0), Vec(2, 5.0), Vec(2, 0.3));
  ApproxIsdeSaOptions opts;
  opts.schedule = {36.7, 0.02, 0.0351, 500};
  opts.isde.steps_per_stage = 40;
  opts.initial_control_points = 140;
  const RunResult res = approx_isde_sa(cost, region, opts, 2);
  REQUIRE_FALSE(res.aborted);
  CHECK(res.best_value < 0.5);
  CHECK(res.evaluations <= 140 + 499);
}

TEST_CASE("equal-budget comparison is paired and self-consistent") {
  const CostFunction cost = bowl(2);
  const auto region = AdmissibleRegion::box(Vec(2, -2.0), Vec(2, 2.0));
  const AnnealSchedule sched{1.0, 0.05, 1e-3, 40};
  IsdeConfig base;

  const ComparisonReport self = compare_equal_budget(
      cost, region, sched, base, Algorithm::classical, 17, Algorithm::classical, 17, 3, 4);
  CHECK(self.rows.size() == 8);  // 2 algorithms x seeds
  CHECK(self.median_first == self.median_second);

  const ComparisonReport cmp = compare_equal_budget(
      cost, region, sched, base, Algorithm::classical, 17, Algorithm::isde, 4, 3, 4);
  CHECK(cmp.rows.size() == 8);
  for (const ComparisonRow& r : cmp.rows) CHECK(std::isfinite(r.final_best));
}

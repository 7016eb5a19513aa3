#include <random>

#include "doctest.h"
#include "hadis/error.hpp"
#include "hadis/planner.hpp"
#include "oracles.hpp"

using namespace hadis;

namespace {

Catalog two_models() {
  const std::vector<int> b{1};
  return Catalog({make_variant("L", 0.5, b, 0.25, 36, 0, 4, 8),
                  make_variant("H", 2.0, b, 0.25, 24, 0, 4, 8)},
                 b);
}

ConfigRow pair_row(double rl, double rh, double fid, double lat = 1.0) {
  ConfigRow r;
  r.light = "L";
  r.heavy = "H";
  r.route_light = rl;
  r.route_heavy = rh;
  r.bypass_fraction = 1.0 - rl;
  r.rejected_fraction = rh - r.bypass_fraction;
  r.fid = fid;
  r.mean_latency = lat;
  return r;
}

PlannerInput input(const std::vector<ConfigRow>& rows, const Catalog& cat, double lambda,
                   int s, double slo) {
  PlannerInput in;
  in.rows = rows;
  in.catalog = &cat;
  in.lambda = lambda;
  in.workers = s;
  in.t_slo = slo;
  return in;
}

const LookupTable& default_table() {
  static const LookupTable t = [] {
    std::mt19937_64 rng(4);
    return build_lookup_table(default_catalog(), ThresholdGrid::uniform(5),
                              oracle::random_population(rng, 200), {1, 0.05});
  }();
  return t;
}

}  // namespace

TEST_CASE("queue_delay examples") {
  CHECK(queue_delay(0, 3.0, 1.5, 0.01) == 0.0);
  CHECK(queue_delay(10, 2.0, 1.5, 0.01) == doctest::Approx(7.5));
  CHECK(queue_delay(1, 0.0, 1.0, 0.01) == doctest::Approx(100.0));
}

TEST_CASE("demand estimator") {
  DemandEstimator e{1.0, 3.0};
  CHECK(e.update(7.0) == 7.0);
  DemandEstimator h{0.5, 10.0};
  CHECK(h.update(20.0) == 15.0);
  DemandEstimator c{0.3, 0.0};
  double prev = 0.0;
  for (int i = 0; i < 60; ++i) {
    const double v = c.update(12.0);
    CHECK(v >= prev);
    CHECK(v <= 12.0);
    prev = v;
  }
  CHECK(prev == doctest::Approx(12.0).epsilon(1e-6));
}

TEST_CASE("closed-form worker counts") {
  const auto cat = two_models();
  const std::vector<ConfigRow> rows{pair_row(0.75, 0.25, 30)};
  const auto in = input(rows, cat, 4.0, 8, 10.0);
  const auto p = solve(in);
  CHECK(p.feasible);
  CHECK(p.workers.at("L") == 2);
  CHECK(p.workers.at("H") == 2);
  CHECK(p.objective == 30.0);
  CHECK(validate_plan(p, in).empty());
  const auto bf = brute_force_solve(in);
  CHECK(bf.key() == p.key());
}

TEST_CASE("zero demand picks the best row that fits the deadline") {
  const auto cat = two_models();
  // The H-only row at fid 24 has path latency 2 > 1.5; the cascade needs 2.5.
  std::vector<ConfigRow> rows{pair_row(1.0, 0.0, 36), pair_row(0.0, 1.0, 24),
                              pair_row(0.5, 0.6, 28)};
  auto in = input(rows, cat, 0.0, 4, 1.5);
  auto p = solve(in);
  CHECK(p.row_index == 0);
  CHECK(p.workers.at("L") == 1);
  in.t_slo = 2.0;
  p = solve(in);
  CHECK(p.row_index == 1);
  CHECK(p.workers.at("H") == 1);
  CHECK(p.total_workers == 1);
}

TEST_CASE("no feasible row yields the flagged fallback") {
  const auto cat = two_models();
  const std::vector<ConfigRow> rows{pair_row(0.75, 0.25, 30)};
  const auto in = input(rows, cat, 100.0, 4, 10.0);
  const auto p = solve(in);
  CHECK_FALSE(p.feasible);
  CHECK(p.total_workers == 4);
  CHECK(brute_force_solve(in).key() == p.key());
  CHECK_THROWS_AS(solve(input({}, cat, 1.0, 4, 10.0)), Error);
}

TEST_CASE("solve agrees with both oracles on random instances") {
  std::mt19937_64 rng(2024);
  for (int t = 0; t < 50; ++t) {
    const auto inst = oracle::random_instance(rng, t % 2 == 1);
    const auto in = oracle::input_of(inst);
    const auto p = solve(in);
    const auto bf = brute_force_solve(in);
    const auto ref = oracle::solve(inst);
    CHECK(p.key() == bf.key());
    CHECK(p.feasible == ref.has_value());
    if (ref) {
      CHECK(p.objective == ref->objective);
      CHECK(p.total_workers == ref->total_workers);
      CHECK(p.row_index == ref->row_index);
      CHECK(oracle::validate(p, in, kPlanSlack).empty());
      CHECK(validate_plan(p, in).empty());
    }
  }
}

TEST_CASE("oracle guard") {
  const auto cat = two_models();
  const std::vector<ConfigRow> rows{pair_row(0.75, 0.25, 30)};
  CHECK_THROWS_WITH_AS(brute_force_solve(input(rows, cat, 1.0, 17, 10.0)),
                       doctest::Contains("oracle-too-large"), Error);
  const std::vector<ConfigRow> many(201, pair_row(0.75, 0.25, 30));
  CHECK_THROWS_AS(brute_force_solve(input(many, cat, 1.0, 4, 10.0)), Error);
}

TEST_CASE("optimum is monotone in demand and deadline with empty queues") {
  std::mt19937_64 rng(77);
  for (int t = 0; t < 40; ++t) {
    auto inst = oracle::random_instance(rng, false);
    auto in = oracle::input_of(inst);
    std::optional<double> prev;
    for (double lam : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0}) {
      in.lambda = lam;
      const auto p = solve(in);
      if (!p.feasible) break;
      if (prev) CHECK(p.objective >= *prev);
      prev = p.objective;
    }
    in = oracle::input_of(inst);
    prev.reset();
    for (double slo : {0.5, 1.0, 2.0, 5.0, 10.0, 40.0}) {
      in.t_slo = slo;
      const auto p = solve(in);
      if (!p.feasible) continue;
      if (prev) CHECK(p.objective <= *prev);
      prev = p.objective;
    }
  }
}

TEST_CASE("plan cache") {
  const auto cat = two_models();
  const std::vector<ConfigRow> rows{pair_row(0.75, 0.25, 30), pair_row(1.0, 0.0, 36)};
  int calls = 0;
  const PlanCache::Solver counting = [&](const PlannerInput& in) {
    ++calls;
    return solve(in);
  };

  SUBCASE("same demand bin hits") {
    PlanCache c(CacheMode::kDemand, 1.0, 10.0);
    c.get(input(rows, cat, 2.2, 8, 10.0), counting);
    c.get(input(rows, cat, 2.7, 8, 10.0), counting);
    CHECK(calls == 1);
    CHECK(c.hits() == 1);
  }
  SUBCASE("crossing a bin boundary misses") {
    PlanCache c(CacheMode::kDemand, 1.0, 10.0);
    c.get(input(rows, cat, 2.9, 8, 10.0), counting);
    c.get(input(rows, cat, 3.0, 8, 10.0), counting);
    CHECK(calls == 2);
    CHECK(c.misses() == 2);
  }
  SUBCASE("demand mode ignores queues") {
    PlanCache c(CacheMode::kDemand, 1.0, 10.0);
    auto a = input(rows, cat, 2.0, 8, 10.0);
    auto b = a;
    b.queues = {{"L", 1000}, {"H", 1000}};
    const auto pa = c.get(a, counting);
    const auto pb = c.get(b, counting);
    CHECK(pa.key() == pb.key());
    CHECK(pa.same_allocation(pb));
    CHECK(calls == 1);
  }
  SUBCASE("demand-queue mode keys on queue length") {
    PlanCache c(CacheMode::kDemandQueue, 1.0, 10.0);
    auto a = input(rows, cat, 2.0, 8, 10.0);
    auto b = a;
    b.queues = {{"L", 1000}};
    c.get(a, counting);
    c.get(b, counting);
    CHECK(calls == 2);
  }
  CHECK_THROWS_AS(PlanCache(CacheMode::kDemand, 0.0, 1.0), Error);
}

TEST_CASE("baseline planners") {
  const auto cat = default_catalog();
  const auto& table = default_table();
  PlannerInput in;
  in.catalog = &cat;
  in.workers = 16;
  in.t_slo = 60.0;

  SUBCASE("clipper light puts every worker on the lightest model") {
    in.lambda = 5.0;
    const auto p = baseline_plan(BaselineKind::kClipperLight, in, table, nullptr);
    CHECK(p.workers.size() == 1);
    CHECK(p.workers.at("SDXL-Lightning") == 16);
  }
  SUBCASE("clipper heavy") {
    in.lambda = 0.1;
    const auto p = baseline_plan(BaselineKind::kClipperHeavy, in, table, nullptr);
    CHECK(p.workers.at("SD3.5-Large") == 16);
  }
  SUBCASE("proteus at vanishing demand picks the heaviest model") {
    in.lambda = 1e-3;
    const auto p = baseline_plan(BaselineKind::kProteus, in, table, nullptr);
    CHECK(p.row.single_model());
    CHECK(p.row.light == "SD3.5-Large");
  }
  SUBCASE("diffserve never bypasses") {
    std::mt19937_64 rng(4);
    ThresholdGrid g{{1.0}, ThresholdGrid::uniform(5).tau};
    const auto ds = build_pair_table(cat, "SD3.5-Turbo", "SD3.5-Large", g,
                                     oracle::random_population(rng, 200), {1, 0.05});
    for (const auto& r : ds.rows) CHECK(r.theta == 1.0);
    for (double lam : {0.1, 1.0, 3.0}) {
      in.lambda = lam;
      const auto p = baseline_plan(BaselineKind::kDiffServe, in, table, &ds);
      CHECK(p.row.theta == 1.0);
      CHECK(p.row.light == "SD3.5-Turbo");
      CHECK(p.row.heavy == "SD3.5-Large");
    }
  }
}

TEST_CASE("plan json carries the declared fields") {
  const auto cat = two_models();
  const std::vector<ConfigRow> rows{pair_row(0.75, 0.25, 30)};
  const auto j = plan_to_json(solve(input(rows, cat, 4.0, 8, 10.0)));
  for (const char* k : {"workers", "batch", "objective", "feasible"}) CHECK(j.contains(k));
}

#include <random>
#include <sstream>

#include "doctest.h"
#include "hadis/error.hpp"
#include "hadis/sim.hpp"
#include "oracles.hpp"

using namespace hadis;

namespace {

const std::vector<int> kBatches{1, 2, 4};

Catalog two_models() {
  return Catalog({make_variant("L", 0.5, kBatches, 0.25, 36, 0, 4, 8),
                  make_variant("H", 2.0, kBatches, 0.25, 24, 0, 4, 8)},
                 kBatches);
}

Plan cascade(double theta, double tau, std::map<std::string, int> workers, int b = 1) {
  Plan p;
  p.row.light = "L";
  p.row.heavy = "H";
  p.row.theta = theta;
  p.row.tau = tau;
  p.row.route_light = 1.0;
  p.row.route_heavy = 0.5;
  p.workers = std::move(workers);
  for (const auto& [id, x] : p.workers) p.batch[id] = b;
  return p;
}

struct Fixture {
  Catalog cat = two_models();
  PromptPopulation prompts;
  SimConfig cfg;

  Fixture(std::vector<double> hardness, std::vector<double> times, Plan plan, int workers) {
    for (std::size_t i = 0; i < hardness.size(); ++i) {
      prompts.push_back({"q" + std::to_string(i), hardness[i], {}});
    }
    cfg.catalog = &cat;
    cfg.prompts = &prompts;
    cfg.planner = PlannerKind::kFixed;
    cfg.fixed_plan = std::move(plan);
    cfg.workers = workers;
    cfg.noise_sigma = 0.0;
    cfg.t_slo = 30.0;
    // Fixed plans carry no demand estimate; keep the drop rule from firing.
    cfg.lambda_floor = 10.0;
    for (std::size_t i = 0; i < times.size(); ++i) {
      cfg.arrivals.push_back({times[i], i % prompts.size()});
    }
  }
};

void check_conservation(const SimResult& r) {
  const auto& s = r.summary;
  CHECK(s.admitted == r.queries.size());
  CHECK(s.served + s.dropped + s.timed_out == s.admitted);
  if (s.admitted > 0) {
    CHECK(s.slo_violation_ratio ==
          doctest::Approx(static_cast<double>(s.dropped + s.timed_out) / s.admitted));
  }
  for (const auto& q : r.queries) {
    CHECK(q.outcome != Outcome::kPending);
    CHECK(q.path.size() <= 2);
    if (q.path.size() == 2) CHECK(q.path[0].model != q.path[1].model);
    double prev = q.arrival_t;
    for (const auto& st : q.path) {
      CHECK(st.enqueue_t >= prev);
      CHECK(st.start_t >= st.enqueue_t);
      CHECK(st.finish_t >= st.start_t);
      prev = st.finish_t;
    }
  }
}

std::string audit_text(const SimResult& r) {
  std::ostringstream out;
  write_audit_log(r.queries, r.plans, {"x", 0, "t"}, out);
  return out.str();
}

}  // namespace

TEST_CASE("zero arrivals") {
  Fixture f({0.1}, {}, cascade(1, 0, {{"L", 1}}), 1);
  const auto r = run_simulation(f.cfg);
  CHECK(r.queries.empty());
  CHECK(r.plans.empty());
  CHECK(r.summary.admitted == 0);
}

TEST_CASE("one easy query on an idle system") {
  Fixture f({0.0}, {1.0}, cascade(1, 0, {{"L", 1}, {"H", 1}}), 2);
  const auto r = run_simulation(f.cfg);
  REQUIRE(r.queries.size() == 1);
  const auto& q = r.queries[0];
  REQUIRE(q.path.size() == 1);
  CHECK(q.path[0].model == "L");
  CHECK(q.outcome == Outcome::kServed);
  CHECK(q.completion_t - q.arrival_t ==
        doctest::Approx(f.cfg.router_s + 0.5 + f.cfg.discriminator_s));
  CHECK(r.summary.slo_violation_ratio == 0.0);
}

TEST_CASE("routing policies") {
  SUBCASE("hybrid bypasses hard queries") {
    Fixture f({0.9}, {1.0}, cascade(0.5, 0, {{"L", 1}, {"H", 1}}), 2);
    const auto r = run_simulation(f.cfg);
    REQUIRE(r.queries[0].path.size() == 1);
    CHECK(r.queries[0].path[0].model == "H");
    CHECK(r.queries[0].bypassed);
  }
  SUBCASE("discriminator-only always starts light") {
    Fixture f({0.9}, {1.0}, cascade(0.5, 0, {{"L", 1}, {"H", 1}}), 2);
    f.cfg.policy = RoutingPolicy::kDiscriminatorOnly;
    const auto r = run_simulation(f.cfg);
    CHECK(r.queries[0].path.front().model == "L");
  }
  SUBCASE("router-only never re-routes") {
    Fixture f({0.4}, {1.0}, cascade(0.5, 1.0, {{"L", 1}, {"H", 1}}), 2);
    f.cfg.policy = RoutingPolicy::kRouterOnly;
    const auto r = run_simulation(f.cfg);
    CHECK(r.queries[0].path.size() == 1);
    CHECK(r.queries[0].served_model == "L");
  }
}

TEST_CASE("partial batches run at the next profiled point") {
  Fixture f({0.0}, {0.0, 0.01, 0.02}, cascade(1, 0, {{"L", 1}}, 4), 1);
  f.cfg.policy = RoutingPolicy::kRouterOnly;
  const auto r = run_simulation(f.cfg);
  REQUIRE(r.queries.size() == 3);
  for (const auto& q : r.queries) REQUIRE(q.path.size() == 1);
  CHECK(r.queries[0].path[0].finish_t - r.queries[0].path[0].start_t == doctest::Approx(0.5));
  for (int i : {1, 2}) {
    const auto& st = r.queries[i].path[0];
    CHECK(st.start_t == doctest::Approx(r.queries[0].path[0].finish_t));
    CHECK(st.finish_t - st.start_t == doctest::Approx(0.625));
  }
}

TEST_CASE("tau of one re-routes every light output") {
  Fixture f({0.2}, {0.0, 1.0, 2.0, 3.0, 4.0}, cascade(1, 1.0, {{"L", 1}, {"H", 1}}), 2);
  const auto r = run_simulation(f.cfg);
  for (const auto& q : r.queries) {
    REQUIRE(q.path.size() == 2);
    CHECK(q.path[0].model == "L");
    CHECK(q.path[1].model == "H");
    CHECK(q.rerouted);
    CHECK(q.served_model == "H");
    CHECK(q.quality_cost == 24.0);
  }
}

TEST_CASE("all-easy prompts never reach the heavy model") {
  std::vector<double> times;
  for (int i = 0; i < 200; ++i) times.push_back(0.3 * i);
  Fixture f({0.0}, times, cascade(0.5, 0.5, {{"L", 3}, {"H", 1}}), 4);
  const auto r = run_simulation(f.cfg);
  for (const auto& q : r.queries) {
    for (const auto& st : q.path) CHECK(st.model == "L");
  }
  check_conservation(r);
}

TEST_CASE("predict_miss") {
  CHECK_FALSE(predict_miss(0.0, 0, 1.0, 1.5, 0.01, 27.0, 60.0));
  CHECK(predict_miss(61.0, 0, 1.0, 1.5, 0.01, 0.5, 60.0));
  // 1.5 * 100 / 1 + 27 = 177 > 60.
  CHECK(predict_miss(0.0, 100, 1.0, 1.5, 0.01, 27.0, 60.0));
}

TEST_CASE("identical consecutive plans swap nothing") {
  std::vector<double> times;
  for (int i = 0; i < 60; ++i) times.push_back(0.5 * i);
  Fixture f({0.1, 0.7}, times, cascade(0.5, 0.5, {{"L", 2}, {"H", 2}}), 4);
  const auto r = run_simulation(f.cfg);
  REQUIRE(r.plans.size() > 2);
  for (std::size_t k = 1; k < r.plans.size(); ++k) CHECK(r.plans[k].swaps == 0);
  CHECK(r.summary.plan_changes == 0);
}

TEST_CASE("plan changes move the minimal set of workers and keep queued queries") {
  const auto cat = two_models();
  ConfigRow light_only;
  light_only.light = light_only.heavy = "L";
  light_only.fid = 36;
  light_only.mean_latency = 0.5;
  // All traffic reaches the heavy stage: infeasible at 4 qps with 4 workers.
  auto both = cascade(1, 0.5, {}).row;
  both.route_heavy = 1.0;
  both.fid = 30;
  LookupTable table;
  table.rows = {light_only, both};
  PromptPopulation prompts{{"q", 0.0, {}}};

  SimConfig cfg;
  cfg.catalog = &cat;
  cfg.table = &table;
  cfg.prompts = &prompts;
  cfg.workers = 4;
  cfg.t_slo = 30.0;
  cfg.noise_sigma = 0.0;
  cfg.initial_demand = 4.0;
  cfg.ewma_weight = 1.0;
  cfg.lambda_floor = 5.0;
  cfg.arrivals.push_back({1.0, 0});
  // A burst after the first epoch lands before its plan is applied.
  for (int i = 0; i < 16; ++i) cfg.arrivals.push_back({5.001 + 0.001 * i, 0});

  const auto r = run_simulation(cfg);
  REQUIRE(r.plans.size() >= 2);
  CHECK(r.plans[0].allocation == std::map<std::string, int>{{"L", 4}});
  const auto& change = r.plans[1];
  CHECK(change.plan.row_index == 1);
  CHECK(change.allocation == std::map<std::string, int>{{"H", 2}, {"L", 2}});
  CHECK(change.swaps == 2);

  // Workers 0 and 1 were re-roled; their queued queries moved to 2 and 3.
  int moved = 0;
  for (const auto& q : r.queries) {
    CHECK(q.outcome == Outcome::kServed);
    for (const auto& st : q.path) {
      if (st.model != "L" || st.start_t <= change.applied_t) continue;
      CHECK(st.worker >= 2);
      if (st.enqueue_t == change.applied_t) ++moved;
    }
  }
  CHECK(moved == 6);
  check_conservation(r);
}

TEST_CASE("end-to-end runs conserve queries and are deterministic") {
  std::mt19937_64 rng(31);
  const auto cat = default_catalog();
  const auto prompts = oracle::random_population(rng, 300);
  const auto table = build_lookup_table(cat, ThresholdGrid::uniform(5), prompts, {1, 0.05});
  const auto trace = gen_piecewise({0.5, 2.0, 5.0, 2.0}, 120);
  for (auto policy : {RoutingPolicy::kHybrid, RoutingPolicy::kRouterOnly,
                      RoutingPolicy::kDiscriminatorOnly, RoutingPolicy::kRandom}) {
    SimConfig cfg;
    cfg.catalog = &cat;
    cfg.table = &table;
    cfg.prompts = &prompts;
    cfg.policy = policy;
    cfg.seed = 5;
    cfg.arrivals = arrivals(trace, prompts, 5, ArrivalMode::kPoisson);
    const auto a = run_simulation(cfg);
    const auto b = run_simulation(cfg);
    check_conservation(a);
    CHECK(audit_text(a) == audit_text(b));
    const auto again = summarize(a.queries, a.plans);
    CHECK(again.avg_fid == a.summary.avg_fid);
    CHECK(again.slo_violation_ratio == a.summary.slo_violation_ratio);
  }
}

TEST_CASE("audit log round trip") {
  std::vector<double> times;
  for (int i = 0; i < 40; ++i) times.push_back(0.4 * i);
  Fixture f({0.1, 0.6, 0.9}, times, cascade(0.5, 0.6, {{"L", 2}, {"H", 2}}), 4);
  const auto r = run_simulation(f.cfg);
  std::istringstream in(audit_text(r));
  const auto log = read_audit_log(in);
  REQUIRE(log.header);
  CHECK(log.queries.size() == r.queries.size());
  CHECK(log.plans.size() == r.plans.size());
  const auto s = summarize(log.queries, log.plans);
  CHECK(s.avg_fid == r.summary.avg_fid);
  CHECK(s.served_by_model == r.summary.served_by_model);
}

TEST_CASE("invalid scenarios fail before running") {
  Fixture f({0.1}, {1.0}, cascade(1, 0, {{"L", 1}}), 0);
  f.cfg.t_slo = -1;
  CHECK_THROWS_WITH_AS(run_simulation(f.cfg), doctest::Contains("invalid-scenario"), Error);
  Fixture g({0.1}, {2.0, 1.0}, cascade(1, 0, {{"L", 1}}), 1);
  CHECK_THROWS_AS(run_simulation(g.cfg), Error);
  CHECK_THROWS_AS(parse_policy("nope"), Error);
  CHECK(parse_planner(planner_name(PlannerKind::kCacheDQ)) == PlannerKind::kCacheDQ);
}

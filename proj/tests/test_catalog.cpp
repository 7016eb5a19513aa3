#include <random>

#include "doctest.h"
#include "hadis/catalog.hpp"
#include "hadis/error.hpp"

using namespace hadis;

namespace {

ModelVariant point(const std::string& id, double lat, double cost) {
  const std::vector<int> b{1};
  return make_variant(id, lat, b, 0.25, cost, 0.0, 4.0, 8.0);
}

bool has(const Catalog& c, const std::string& id) { return c.find(id) != nullptr; }

}  // namespace

TEST_CASE("batch_latency on the default catalog") {
  const auto cat = default_catalog();
  CHECK(batch_latency(cat.at("SDXL-Lightning"), 1) == doctest::Approx(0.5));
  CHECK(batch_latency(cat.at("SD3.5-Large"), 1) == doctest::Approx(27.0));
  CHECK(batch_latency(cat.at("SDXL-Lightning"), 4) == doctest::Approx(0.5 * (1 + 0.25 * 3)));
  CHECK_THROWS_WITH_AS(batch_latency(cat.at("SD3.5-Large"), 3), doctest::Contains("batch-not-profiled"),
                       Error);
}

TEST_CASE("partial batches use the next profiled point") {
  const auto cat = default_catalog();
  const auto& v = cat.at("SD3.5-Turbo");
  CHECK(partial_batch_latency(v, 3) == batch_latency(v, 4));
  CHECK(partial_batch_latency(v, 2) == batch_latency(v, 2));
  CHECK_THROWS_AS(partial_batch_latency(v, 17), Error);
}

TEST_CASE("catalog invariants hold for the default catalog") {
  const auto cat = default_catalog();
  CHECK(cat.paper_calibrated());
  for (const auto& v : cat.variants()) {
    double prev = 0.0;
    for (int b : cat.batch_set()) {
      CHECK(v.latency_s.at(b) > prev);
      prev = v.latency_s.at(b);
      CHECK(std::abs(v.throughput_qps.at(b) * v.latency_s.at(b) - b) <= 1e-9);
    }
  }
  CHECK(cat.lightest().id == "SDXL-Lightning");
  CHECK(cat.heaviest().id == "SD3.5-Large");
}

TEST_CASE("catalog validation names the offending path") {
  const std::vector<int> b{1, 2};
  auto bad = make_variant_from_table("x", {{1, 1.0}, {2, 0.9}}, 10, 0, 1, 1);
  CHECK_THROWS_WITH_AS(Catalog({bad}, b), doctest::Contains("variants[0].latency_s[2]"), Error);
  auto a = make_variant("a", 1.0, b, 0.25, 10, 0, 1, 1);
  CHECK_THROWS_WITH_AS(Catalog({a, a}, b), doctest::Contains("duplicate"), Error);
  CHECK_THROWS_AS(Catalog({a}, {2, 1}), Error);
  // Calibrated catalogs need slower => strictly cheaper.
  auto slow = make_variant("slow", 2.0, b, 0.25, 12, 0, 1, 1);
  CHECK_THROWS_AS(Catalog({a, slow}, b, true), Error);
  CHECK_NOTHROW(Catalog({a, slow}, b, false));
}

TEST_CASE("catalog json round trip") {
  const auto cat = default_catalog();
  const auto back = catalog_from_json(catalog_to_json(cat));
  CHECK(catalog_hash(back) == catalog_hash(cat));
  CHECK(back.size() == 4);
  CHECK(back.at("SD3.5-Medium").latency_s == cat.at("SD3.5-Medium").latency_s);
}

TEST_CASE("catalog hash changes with any profile value") {
  auto cat = default_catalog();
  auto vs = cat.variants();
  vs[1].base_quality_cost -= 0.5;
  CHECK(catalog_hash(Catalog(vs, cat.batch_set(), true)) != catalog_hash(cat));
}

TEST_CASE("select_candidates examples") {
  const std::vector<int> b{1};
  SUBCASE("single variant survives") {
    const auto out = select_candidates(Catalog({point("a", 1, 30)}, b));
    CHECK(out.size() == 1);
  }
  SUBCASE("dominated variant is removed") {
    const auto out = select_candidates(Catalog({point("A", 0.5, 30), point("B", 0.6, 40)}, b));
    CHECK(out.size() == 1);
    CHECK(has(out, "A"));
  }
  SUBCASE("collinear middle point is removed") {
    const auto out = select_candidates(
        Catalog({point("p1", 1, 30), point("p2", 2, 20), point("p3", 3, 10)}, b), 0.05, 0.05);
    CHECK(out.size() == 2);
    CHECK_FALSE(has(out, "p2"));
  }
  SUBCASE("near-duplicate of a protected extreme is dropped") {
    const auto out =
        select_candidates(Catalog({point("zeta", 1.0, 30), point("alpha", 1.02, 30.5)}, b));
    CHECK(out.size() == 1);
    CHECK(has(out, "zeta"));
  }
  SUBCASE("near-duplicates off the extremes keep the smallest id") {
    const auto out = select_candidates(Catalog(
        {point("fast", 0.2, 40), point("m2", 5.0, 25.2), point("m1", 5.1, 25.0),
         point("slow", 30, 10)},
        b));
    CHECK(has(out, "fast"));
    CHECK(has(out, "slow"));
    CHECK(has(out, "m1"));
    CHECK_FALSE(has(out, "m2"));
  }
  SUBCASE("the default catalog survives intact") {
    CHECK(select_candidates(default_catalog()).size() == 4);
  }
  SUBCASE("empty pool") { CHECK_THROWS_WITH_AS(select_candidates(Catalog({}, b)), doctest::Contains("empty-pool"), Error); }
}

TEST_CASE("select_candidates keeps the unique latency and quality minima") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> lat(0.1, 30), cost(10, 40);
  const std::vector<int> b{1};
  for (int t = 0; t < 200; ++t) {
    std::vector<ModelVariant> vs;
    const int n = 1 + t % 7;
    for (int i = 0; i < n; ++i) vs.push_back(point("m" + std::to_string(i), lat(rng), cost(rng)));
    std::size_t fast = 0, best = 0;
    for (std::size_t i = 1; i < vs.size(); ++i) {
      if (single_latency(vs[i]) < single_latency(vs[fast])) fast = i;
      if (vs[i].base_quality_cost < vs[best].base_quality_cost) best = i;
    }
    const auto out = select_candidates(Catalog(vs, b));
    CHECK(has(out, vs[fast].id));
    CHECK(has(out, vs[best].id));
  }
}

TEST_CASE("pareto_prune examples") {
  CHECK(pareto_prune(std::vector<ParetoPoint>{}).empty());
  const std::vector<ParetoPoint> pts{{1, 5}, {2, 4}, {1.5, 6}};
  CHECK(pareto_prune(pts) == std::vector<std::size_t>{0, 1});
  const std::vector<ParetoPoint> same{{1, 1}, {1, 1}};
  CHECK(pareto_prune(same) == std::vector<std::size_t>{0});
}

TEST_CASE("pareto_prune is an idempotent chain") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> d(0, 20);
  for (int t = 0; t < 300; ++t) {
    std::vector<ParetoPoint> pts(static_cast<std::size_t>(d(rng)));
    for (auto& p : pts) p = {static_cast<double>(d(rng)), static_cast<double>(d(rng))};
    const auto idx = pareto_prune(pts);
    std::vector<ParetoPoint> kept;
    for (auto i : idx) kept.push_back(pts[i]);
    for (std::size_t i = 1; i < kept.size(); ++i) {
      CHECK(kept[i].latency > kept[i - 1].latency);
      CHECK(kept[i].quality < kept[i - 1].quality);
    }
    CHECK(pareto_prune(kept).size() == kept.size());
    // Nothing dropped is undominated.
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (std::find(idx.begin(), idx.end(), i) != idx.end()) continue;
      bool dominated = false;
      for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
        dominated = j != i && pts[j].latency <= pts[i].latency &&
                    pts[j].quality <= pts[i].quality &&
                    (pts[j].latency < pts[i].latency || pts[j].quality < pts[i].quality ||
                     j < i);
      }
      CHECK(dominated);
    }
  }
}

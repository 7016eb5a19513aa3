#include <algorithm>
#include <filesystem>
#include <random>

#include "doctest.h"
#include "hadis/error.hpp"
#include "hadis/profiler.hpp"
#include "hadis/quality.hpp"

using namespace hadis;

namespace {

PromptPopulation population(std::size_t n, std::uint64_t seed, double lo = 0.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, 1.0);
  PromptPopulation p;
  for (std::size_t i = 0; i < n; ++i) p.push_back({"prompt " + std::to_string(i), u(rng), {}});
  return p;
}

const ProfileOptions kNoiseless{1, 0.0};

}  // namespace

TEST_CASE("profile_config boundary rows") {
  const auto cat = default_catalog();
  const auto& light = cat.at("SDXL-Lightning");
  const auto& heavy = cat.at("SD3.5-Large");
  const auto pop = population(200, 4, 0.01);

  const auto open = profile_config(light, heavy, 1.0, 0.0, pop, kNoiseless);
  CHECK(open.route_light == 1.0);
  CHECK(open.route_heavy == 0.0);
  CHECK(open.fid == doctest::Approx(profile_single(light, pop).fid).epsilon(1e-12));
  CHECK(open.mean_latency == doctest::Approx(0.5));

  const auto shut = profile_config(light, heavy, 0.0, 0.5, pop, kNoiseless);
  CHECK(shut.route_light == 0.0);
  CHECK(shut.route_heavy == 1.0);
  CHECK(shut.mean_latency == doctest::Approx(27.0));
}

TEST_CASE("profile_config matches a direct tally") {
  const auto cat = default_catalog();
  const auto& light = cat.at("SD3.5-Turbo");
  const auto& heavy = cat.at("SD3.5-Medium");
  const auto pop = population(100, 9);
  const double theta = 0.6, tau = 0.8;
  int bypass = 0, rejected = 0;
  double cost = 0, lat = 0;
  for (const auto& p : pop) {
    if (p.hardness > theta) {
      ++bypass;
      cost += heavy.base_quality_cost + heavy.hardness_penalty * p.hardness;
      lat += 13.0;
    } else if (sigmoid(light.accept_offset - light.accept_slope * p.hardness) < tau) {
      ++rejected;
      cost += heavy.base_quality_cost + heavy.hardness_penalty * p.hardness;
      lat += 1.3 + 13.0;
    } else {
      cost += light.base_quality_cost + light.hardness_penalty * p.hardness;
      lat += 1.3;
    }
  }
  const auto r = profile_config(light, heavy, theta, tau, pop, kNoiseless);
  CHECK(r.bypass_fraction == doctest::Approx(bypass / 100.0));
  CHECK(r.rejected_fraction == doctest::Approx(rejected / 100.0));
  CHECK(r.route_light == doctest::Approx(1.0 - bypass / 100.0));
  CHECK(r.route_heavy == doctest::Approx((bypass + rejected) / 100.0));
  CHECK(r.fid == doctest::Approx(cost / 100.0));
  CHECK(r.mean_latency == doctest::Approx(lat / 100.0));
  CHECK(bypass > 0);
  CHECK(rejected > 0);
}

TEST_CASE("profile_config rejects a mis-ordered pair") {
  const auto cat = default_catalog();
  CHECK_THROWS_WITH_AS(profile_config(cat.at("SD3.5-Large"), cat.at("SDXL-Lightning"), 0.5,
                                      0.5, population(5, 1), kNoiseless),
                       doctest::Contains("pair-order"), Error);
}

TEST_CASE("build_lookup_table on the default catalog") {
  const auto cat = default_catalog();
  const auto pop = population(300, 2);
  const auto grid = ThresholdGrid::uniform(10);
  const ProfileOptions opt{5, 0.05};
  const auto t = build_lookup_table(cat, grid, pop, opt);
  REQUIRE(t.pair_stats.size() == 6);
  std::size_t retained = 0;
  const auto order = cat.by_latency();
  std::size_t k = 0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j, ++k) {
      const auto& st = t.pair_stats[k];
      CHECK(st.profiled == 121);
      // Independent dominance scan over the raw pair rows.
      const auto rows = profile_pair(*order[i], *order[j], grid, pop, opt);
      std::size_t undominated = 0;
      for (std::size_t a = 0; a < rows.size(); ++a) {
        bool dom = false;
        for (std::size_t b = 0; b < rows.size() && !dom; ++b) {
          if (a == b) continue;
          const bool le = rows[b].mean_latency <= rows[a].mean_latency &&
                          rows[b].fid <= rows[a].fid;
          const bool strict = rows[b].mean_latency < rows[a].mean_latency ||
                              rows[b].fid < rows[a].fid;
          dom = le && (strict || b < a);
        }
        undominated += dom ? 0 : 1;
      }
      CHECK(st.retained == undominated);
      retained += st.retained;
    }
  }
  CHECK(t.rows.size() == retained);
  CHECK(t.standalone.size() == 4);
  for (const auto& r : t.rows) {
    CHECK(r.route_light + r.bypass_fraction == 1.0);
    CHECK(r.route_heavy == doctest::Approx(r.bypass_fraction + r.rejected_fraction));
    CHECK(r.fid > 0.0);
  }
}

TEST_CASE("two variants on a 2x2 grid") {
  const auto cat = default_catalog();
  const Catalog two({cat.at("SDXL-Lightning"), cat.at("SD3.5-Large")}, cat.batch_set(), true);
  ThresholdGrid g{{0, 1}, {0, 1}};
  const auto t = build_lookup_table(two, g, population(50, 3), kNoiseless);
  CHECK(t.pair_stats.front().profiled == 4);
  CHECK(t.rows.size() >= 1);
  CHECK(t.rows.size() <= 4);
  CHECK_THROWS_AS(build_lookup_table(Catalog({cat.at("SD3.5-Large")}, cat.batch_set()), g,
                                     population(5, 1), kNoiseless),
                  Error);
}

TEST_CASE("prompt order does not change the table") {
  const auto cat = default_catalog();
  auto pop = population(150, 6);
  const ProfileOptions opt{3, 0.05};
  const auto a = table_to_json(build_lookup_table(cat, ThresholdGrid::uniform(5), pop, opt));
  std::shuffle(pop.begin(), pop.end(), std::mt19937_64(1));
  const auto b = table_to_json(build_lookup_table(cat, ThresholdGrid::uniform(5), pop, opt));
  CHECK(a.dump() == b.dump());
}

TEST_CASE("thresholds move fractions monotonically without noise") {
  const auto cat = default_catalog();
  const auto& light = cat.at("SDXL-Lightning");
  const auto& heavy = cat.at("SD3.5-Medium");
  const auto pop = population(250, 12);
  const auto grid = ThresholdGrid::uniform(20);
  for (double tau : grid.tau) {
    double prev = 2.0;
    for (double theta : grid.theta) {
      const auto r = profile_config(light, heavy, theta, tau, pop, kNoiseless);
      CHECK(r.bypass_fraction <= prev);
      prev = r.bypass_fraction;
    }
  }
  for (double theta : grid.theta) {
    double prev_rej = -1.0, prev_fid = 1e9;
    for (double tau : grid.tau) {
      const auto r = profile_config(light, heavy, theta, tau, pop, kNoiseless);
      CHECK(r.rejected_fraction >= prev_rej);
      CHECK(r.fid <= prev_fid + 1e-12);
      prev_rej = r.rejected_fraction;
      prev_fid = r.fid;
    }
  }
}

TEST_CASE("table round trip and provenance") {
  const auto cat = default_catalog();
  const auto t = build_lookup_table(cat, ThresholdGrid::uniform(4), population(80, 1), {2, 0.05});
  const auto back = table_from_json(table_to_json(t));
  CHECK(back.rows == t.rows);
  CHECK(back.standalone == t.standalone);
  CHECK(back.provenance.catalog_hash == t.provenance.catalog_hash);
  CHECK(back.provenance.population_hash == t.provenance.population_hash);

  const auto path = (std::filesystem::temp_directory_path() / "hadis_table_test.json").string();
  save_table(t, path);
  CHECK(load_table(path, cat).rows == t.rows);
  auto vs = cat.variants();
  vs[0].base_quality_cost += 1.0;
  const Catalog other(vs, cat.batch_set(), true);
  CHECK_THROWS_WITH_AS(load_table(path, other), doctest::Contains("provenance-mismatch"), Error);
  CHECK_NOTHROW(load_table(path, other, true));
  std::filesystem::remove(path);
}

TEST_CASE("frontier_compare") {
  const auto cat = default_catalog();
  const Catalog two({cat.at("SDXL-Lightning"), cat.at("SD3.5-Large")}, cat.batch_set(), true);
  CHECK_THROWS_WITH_AS(
      frontier_compare(two, ThresholdGrid::uniform(4), population(20, 1), kNoiseless),
      doctest::Contains("need-3-variants"), Error);
  const auto rep = frontier_compare(cat, ThresholdGrid::uniform(5), population(120, 7), kNoiseless);
  CHECK(rep.two_model.size() >= 2);
  CHECK(rep.three_model_configs > 0);
  CHECK(rep.max_quality_gap >= 0.0);
}

TEST_CASE("lower_frontier and interpolation") {
  const auto f = lower_frontier({{1, 10}, {2, 8}, {3, 7.5}, {4, 4}, {5, 6}});
  REQUIRE(f.size() == 2);
  CHECK(f.front().latency == 1);
  CHECK(f.back().latency == 4);
  CHECK(frontier_value(f, 2.5) == doctest::Approx(7.0));
  CHECK(frontier_value(f, 0.0) == 10.0);
  CHECK(frontier_value(f, 9.0) == 4.0);
}

#include <sstream>

#include "doctest.h"
#include "hadis/error.hpp"
#include "hadis/workload.hpp"

using namespace hadis;

namespace {

DemandTrace parse(const std::string& s) {
  std::istringstream in(s);
  return parse_trace(in);
}

PromptPopulation pool(const char* tag, std::size_t n, double h) {
  PromptPopulation p;
  for (std::size_t i = 0; i < n; ++i) p.push_back({tag + std::to_string(i), h, {}});
  return p;
}

}  // namespace

TEST_CASE("trace scaling preserves shape") {
  const auto t = parse("start_s,qps\n0,1.5\n60,3\n120,0.25\n");
  CHECK(t.buckets.size() == 3);
  CHECK(t.duration_s == 180.0);
  const auto same = scale_trace(t, 1.0);
  for (std::size_t i = 0; i < 3; ++i) CHECK(same.buckets[i].qps == t.buckets[i].qps);
  const auto dbl = scale_trace(t, 2.0);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(dbl.buckets[i].qps == 2.0 * t.buckets[i].qps);
    CHECK(dbl.buckets[i].start_s == t.buckets[i].start_s);
  }
  CHECK(dbl.peak() / dbl.buckets[2].qps ==
        doctest::Approx(t.peak() / t.buckets[2].qps).epsilon(1e-12));
  CHECK_THROWS_AS(scale_trace(t, 0.0), Error);
}

TEST_CASE("trace parsing errors name the line") {
  CHECK_THROWS_WITH_AS(parse("start_s,qps\n0,1\n60,abc\n"), doctest::Contains("3"), Error);
  CHECK_THROWS_WITH_AS(parse("start_s,qps\n0,-1\n"), doctest::Contains("2"), Error);
  CHECK_THROWS_AS(parse("start_s,qps\n60,1\n0,1\n"), Error);
}

TEST_CASE("duration comment extends the last bucket") {
  const auto t = parse("# duration_s=500\nstart_s,qps\n0,1\n100,2\n");
  CHECK(t.duration_s == 500.0);
  CHECK(t.end_of(1) == 500.0);
}

TEST_CASE("gen_piecewise") {
  const auto one = gen_piecewise({1.0}, 30);
  CHECK(one.buckets.size() == 1);
  CHECK(one.duration_s == 30.0);
  const auto t = gen_piecewise({2, 4, 8, 4}, 300);
  CHECK(t.duration_s == 1200.0);
  REQUIRE(t.buckets.size() == 4);
  CHECK(t.buckets[2].start_s == 600.0);
  CHECK(t.peak() == 8.0);
  std::ostringstream out;
  write_trace(t, out);
  std::istringstream in(out.str());
  const auto back = parse_trace(in);
  CHECK(back.duration_s == t.duration_s);
  REQUIRE(back.buckets.size() == t.buckets.size());
  for (std::size_t i = 0; i < t.buckets.size(); ++i) {
    CHECK(back.buckets[i].start_s == t.buckets[i].start_s);
    CHECK(back.buckets[i].qps == t.buckets[i].qps);
  }
}

TEST_CASE("azure-like trace round trips bit-exactly") {
  const auto t = gen_azure_like(900, 60, 3);
  CHECK(t.peak() == doctest::Approx(1.0));
  std::ostringstream out;
  write_trace(t, out);
  std::istringstream in(out.str());
  const auto back = parse_trace(in);
  for (std::size_t i = 0; i < t.buckets.size(); ++i) CHECK(back.buckets[i].qps == t.buckets[i].qps);
}

TEST_CASE("hardness phases") {
  const auto hp = gen_hardness_phases(pool("easy ", 20, 0.1), pool("hard ", 20, 0.9), 100, 2.0);
  REQUIRE(hp.trace.buckets.size() == 4);
  for (std::size_t k = 0; k < 4; ++k) CHECK(hp.trace.buckets[k].start_s == 100.0 * k);
  CHECK(hp.phase_hard == std::vector<bool>{false, true, false, true});
  const auto arr = arrivals(hp.trace, hp.pools, hp.bucket_pool, 5, ArrivalMode::kPoisson);
  double sum[2] = {0, 0};
  int n[2] = {0, 0};
  for (const auto& a : arr) {
    const auto phase = static_cast<std::size_t>(a.time / 100.0);
    const auto& p = hp.prompts[a.prompt];
    if (phase == 1) CHECK(p.text.rfind("hard ", 0) == 0);
    const int k = hp.phase_hard[phase] ? 1 : 0;
    sum[k] += p.hardness;
    ++n[k];
  }
  REQUIRE(n[0] > 0);
  REQUIRE(n[1] > 0);
  CHECK(sum[1] / n[1] > sum[0] / n[0]);
  CHECK_THROWS_AS(gen_hardness_phases({}, pool("h", 1, 1), 10, 1), Error);
}

TEST_CASE("arrival expansion") {
  const auto prompts = pool("p", 7, 0.5);
  SUBCASE("zero-demand bucket is silent") {
    const auto t = parse("start_s,qps\n0,0\n10,1\n# end\n");
    for (const auto& a : arrivals(t, prompts, 1, ArrivalMode::kPoisson)) CHECK(a.time >= 10.0);
  }
  SUBCASE("uniform spacing") {
    const auto a = arrivals(gen_piecewise({2.0}, 10), prompts, 1, ArrivalMode::kUniform);
    REQUIRE(a.size() == 20);
    for (std::size_t i = 1; i < a.size(); ++i) {
      CHECK(a[i].time - a[i - 1].time == doctest::Approx(0.5));
    }
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].prompt == i % 7);
  }
  SUBCASE("poisson rate") {
    const auto a = arrivals(gen_piecewise({3.0}, 10000), prompts, 9, ArrivalMode::kPoisson);
    const double rate = static_cast<double>(a.size()) / 10000.0;
    CHECK(std::abs(rate - 3.0) / 3.0 < 0.05);
    for (std::size_t i = 1; i < a.size(); ++i) CHECK(a[i].time > a[i - 1].time);
  }
  SUBCASE("deterministic per seed") {
    const auto t = gen_piecewise({1, 4, 2}, 50);
    const auto a = arrivals(t, prompts, 4, ArrivalMode::kPoisson);
    const auto b = arrivals(t, prompts, 4, ArrivalMode::kPoisson);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].time == b[i].time);
  }
}

TEST_CASE("generated prompts get articles right") {
  for (const auto& g : gen_prompt_texts(300, 2)) {
    CHECK(g.text.find(" a a") == std::string::npos);
    CHECK(g.text.find(" a e") == std::string::npos);
    CHECK(g.text.find(" a o") == std::string::npos);
    CHECK(g.complexity >= 0.0);
    CHECK(g.complexity <= 1.0);
  }
}

TEST_CASE("population labels follow complexity thirds") {
  const auto texts = gen_prompt_texts(300, 3);
  const auto pop = build_population(texts, default_lexicon(), RouterWeights::uniform());
  REQUIRE(pop.size() == texts.size());
  std::size_t easy = 0, hard = 0;
  double he = 0, hh = 0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const auto& p = pop[i];
    CHECK(p.hardness >= 0.0);
    CHECK(p.hardness <= 1.0);
    const double c = texts[i].complexity;
    CHECK(p.hard.has_value() == (c < 1.0 / 3.0 || c >= 2.0 / 3.0));
    if (!p.hard) continue;
    if (*p.hard) {
      ++hard;
      hh += p.hardness;
    } else {
      ++easy;
      he += p.hardness;
    }
  }
  REQUIRE(easy > 0);
  REQUIRE(hard > 0);
  CHECK(hh / hard > he / easy);
}

TEST_CASE("auto_scale hits the requested fraction of light capacity") {
  const auto cat = default_catalog();
  const auto t = gen_piecewise({1, 2, 4}, 10);
  const double s = auto_scale(t, cat, 16, 0.8);
  const double cap = 16 * batch_throughput(cat.lightest(), cat.batch_set().back());
  CHECK(s * t.peak() == doctest::Approx(0.8 * cap));
}

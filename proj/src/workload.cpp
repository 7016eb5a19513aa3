#include "hadis/workload.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>

#include "hadis/error.hpp"
#include "hadis/rng.hpp"

namespace hadis {

namespace {

std::string trim(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) {
    s.pop_back();
  }
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
  return s.substr(i);
}

bool parse_double(std::string_view s, double& out) {
  s = s.substr(s.find_first_not_of(' ') == std::string_view::npos
                   ? s.size()
                   : s.find_first_not_of(' '));
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <class T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

const std::vector<std::string> kCommonNouns = {
    "cat", "dog", "banana", "apple", "chair", "car", "house", "tree", "flower",
    "bird", "horse", "ball", "cup", "bottle", "book", "boat", "lamp", "bowl",
    "cake", "hat", "clock", "bicycle", "table", "train"};
const std::vector<std::string> kScenes = {
    "plate", "table", "street", "beach", "field", "garden", "park", "room",
    "kitchen", "road", "lake"};
const std::vector<std::string> kRarerNouns = {
    "vase", "robot", "dragon", "castle", "astronaut", "knight", "wizard",
    "lighthouse", "owl", "fox", "giraffe", "violin", "telescope", "lantern",
    "chandelier", "zeppelin", "samurai", "minotaur", "hourglass", "gramophone",
    "axolotl", "pangolin", "narwhal"};
const std::vector<std::string> kPlainAdjectives = {
    "red", "blue", "green", "yellow", "white", "black", "small", "large", "old",
    "wooden", "tall", "bright"};
const std::vector<std::string> kFancyAdjectives = {
    "golden", "ancient", "glowing", "futuristic", "majestic", "mysterious",
    "surreal", "translucent", "intricate", "ornate", "ethereal", "iridescent",
    "baroque", "bioluminescent"};
const std::vector<std::string> kRelations = {
    "next to", "in front of", "behind", "above", "under", "on top of",
    "beside", "between", "inside", "near"};
const std::vector<std::string> kVerbs = {
    "running", "jumping", "dancing", "flying", "swimming", "juggling",
    "climbing", "holding", "chasing", "painting", "reading", "spinning"};
const std::vector<std::string> kAbstract = {
    "time", "memory", "freedom", "hope", "chaos", "harmony", "nostalgia",
    "eternity", "solitude", "entropy", "melancholy", "destiny"};
const std::vector<std::string> kArtists = {
    "Monet", "Vermeer", "Hokusai", "Klimt", "Escher", "Dali", "Kahlo",
    "Turner"};
const std::vector<std::string> kPlaces = {
    "Venice", "Kyoto", "Paris", "Reykjavik", "Marrakesh", "Patagonia"};

std::string object_phrase(std::mt19937_64& rng, double c) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::string s;
  const int adjectives = (u(rng) < c * 0.9 ? 1 : 0) + (u(rng) < c * 0.6 ? 1 : 0);
  for (int k = 0; k < adjectives; ++k) {
    s += (u(rng) < c * 0.8 ? pick(rng, kFancyAdjectives) : pick(rng, kPlainAdjectives));
    s += ' ';
  }
  s += u(rng) < c * 0.85 ? pick(rng, kRarerNouns) : pick(rng, kCommonNouns);
  return s;
}

}  // namespace

double DemandTrace::peak() const {
  double p = 0.0;
  for (const auto& b : buckets) p = std::max(p, b.qps);
  return p;
}

double DemandTrace::end_of(std::size_t i) const {
  return i + 1 < buckets.size() ? buckets[i + 1].start_s : duration_s;
}

double DemandTrace::mean_qps() const {
  if (buckets.empty() || duration_s <= 0.0) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < buckets.size(); ++i) {
    total += buckets[i].qps * (end_of(i) - buckets[i].start_s);
  }
  return total / (duration_s - buckets.front().start_s);
}

DemandTrace parse_trace(std::istream& in, double scale, const std::string& origin) {
  if (!(scale > 0.0)) throw Error("invalid-trace", "scale must be positive");
  DemandTrace t;
  std::optional<double> duration;
  bool header = false;
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw Error("invalid-trace", fmt::format("{}:{}: {}", origin, line_no, why));
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("duration_s=");
      if (pos != std::string::npos) {
        double d = 0.0;
        if (!parse_double(line.substr(pos + 11), d) || !(d > 0.0)) {
          fail("bad duration_s");
        }
        duration = d;
      }
      continue;
    }
    if (!header) {
      if (line != "start_s,qps") fail("expected header 'start_s,qps'");
      header = true;
      continue;
    }
    const auto comma = line.find(',');
    double start = 0.0, qps = 0.0;
    if (comma == std::string::npos ||
        !parse_double(std::string_view(line).substr(0, comma), start) ||
        !parse_double(std::string_view(line).substr(comma + 1), qps)) {
      fail("expected 'start_s,qps'");
    }
    if (qps < 0.0) fail("negative qps");
    if (!std::isfinite(start) || !std::isfinite(qps)) fail("non-finite value");
    if (!t.buckets.empty() && start <= t.buckets.back().start_s) {
      fail("start_s must be strictly increasing");
    }
    t.buckets.push_back({start, qps * scale});
  }
  if (!header) throw Error("invalid-trace", origin + ": missing header");
  if (t.buckets.empty()) return t;
  if (duration) {
    if (*duration <= t.buckets.back().start_s) {
      throw Error("invalid-trace", origin + ": duration_s ends before last bucket");
    }
    t.duration_s = *duration;
  } else if (t.buckets.size() >= 2) {
    const auto n = t.buckets.size();
    t.duration_s = t.buckets[n - 1].start_s +
                   (t.buckets[n - 1].start_s - t.buckets[n - 2].start_s);
  } else {
    t.duration_s = t.buckets[0].start_s + 1.0;
  }
  return t;
}

DemandTrace load_trace(const std::string& path, double scale) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open trace " + path);
  return parse_trace(in, scale, path);
}

void write_trace(const DemandTrace& t, std::ostream& out) {
  out << "# duration_s=" << format_double(t.duration_s) << '\n';
  out << "start_s,qps\n";
  for (const auto& b : t.buckets) {
    out << format_double(b.start_s) << ',' << format_double(b.qps) << '\n';
  }
}

void save_trace(const DemandTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path);
  write_trace(trace, out);
}

DemandTrace scale_trace(const DemandTrace& trace, double scale) {
  if (!(scale > 0.0)) throw Error("invalid-trace", "scale must be positive");
  DemandTrace t = trace;
  for (auto& b : t.buckets) b.qps *= scale;
  return t;
}

DemandTrace gen_piecewise(const std::vector<double>& levels, double dwell_s) {
  if (levels.empty() || !(dwell_s > 0.0)) {
    throw Error("invalid-trace", "need levels and a positive dwell");
  }
  DemandTrace t;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 0.0) throw Error("invalid-trace", "negative level");
    t.buckets.push_back({static_cast<double>(i) * dwell_s, levels[i]});
  }
  t.duration_s = static_cast<double>(levels.size()) * dwell_s;
  return t;
}

DemandTrace gen_azure_like(double duration_s, double bucket_s, std::uint64_t seed) {
  if (!(duration_s > 0.0) || !(bucket_s > 0.0)) {
    throw Error("invalid-trace", "duration and bucket must be positive");
  }
  auto rng = make_stream(seed, 0, StreamTag::kTraceGen);
  std::normal_distribution<double> jitter(0.0, 0.04);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto n = static_cast<std::size_t>(std::ceil(duration_s / bucket_s));
  const double pi = std::acos(-1.0);
  std::vector<double> level(n);
  double burst = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = static_cast<double>(i) / static_cast<double>(n);
    // Trough at the start, single broad peak past the middle.
    double base = 0.55 - 0.4 * std::cos(2.0 * pi * x) + 0.08 * std::sin(6.0 * pi * x);
    if (u(rng) < 0.03) burst = 0.25 + 0.2 * u(rng);
    base += burst;
    burst *= 0.6;
    level[i] = std::max(0.02, base * (1.0 + jitter(rng)));
  }
  const double peak = *std::max_element(level.begin(), level.end());
  DemandTrace t;
  for (std::size_t i = 0; i < n; ++i) {
    t.buckets.push_back({static_cast<double>(i) * bucket_s, level[i] / peak});
  }
  t.duration_s = static_cast<double>(n) * bucket_s;
  return t;
}

HardnessPhases gen_hardness_phases(const PromptPopulation& easy_pool,
                                   const PromptPopulation& hard_pool,
                                   double phase_s, double qps) {
  if (easy_pool.empty() || hard_pool.empty()) {
    throw Error("invalid-workload", "both prompt pools must be nonempty");
  }
  HardnessPhases h;
  h.trace = gen_piecewise({qps, qps, qps, qps}, phase_s);
  h.prompts = easy_pool;
  h.prompts.insert(h.prompts.end(), hard_pool.begin(), hard_pool.end());
  h.pools.resize(2);
  for (std::size_t i = 0; i < easy_pool.size(); ++i) h.pools[0].push_back(i);
  for (std::size_t i = 0; i < hard_pool.size(); ++i) {
    h.pools[1].push_back(easy_pool.size() + i);
  }
  h.bucket_pool = {0, 1, 0, 1};
  h.phase_hard = {false, true, false, true};
  return h;
}

std::vector<Arrival> arrivals(const DemandTrace& trace,
                              const PromptPopulation& prompts,
                              std::uint64_t seed, ArrivalMode mode) {
  if (prompts.empty()) throw Error("invalid-workload", "no prompts");
  std::vector<std::vector<std::size_t>> pools(1);
  pools[0].resize(prompts.size());
  std::iota(pools[0].begin(), pools[0].end(), 0);
  return arrivals(trace, pools, std::vector<std::size_t>(trace.buckets.size(), 0),
                  seed, mode);
}

std::vector<Arrival> arrivals(const DemandTrace& trace,
                              const std::vector<std::vector<std::size_t>>& pools,
                              const std::vector<std::size_t>& bucket_pool,
                              std::uint64_t seed, ArrivalMode mode) {
  if (bucket_pool.size() != trace.buckets.size()) {
    throw Error("invalid-workload", "one pool index per bucket required");
  }
  for (std::size_t p : bucket_pool) {
    if (p >= pools.size() || pools[p].empty()) {
      throw Error("invalid-workload", "bucket refers to an empty pool");
    }
  }
  auto rng = make_stream(seed, 0, StreamTag::kArrivals);
  std::vector<std::size_t> cursor(pools.size(), 0);
  std::vector<Arrival> out;
  for (std::size_t i = 0; i < trace.buckets.size(); ++i) {
    const double start = trace.buckets[i].start_s;
    const double end = trace.end_of(i);
    const double qps = trace.buckets[i].qps;
    if (qps <= 0.0) continue;
    auto emit = [&](double t) {
      if (!out.empty() && t <= out.back().time) {
        t = std::nextafter(out.back().time, std::numeric_limits<double>::infinity());
      }
      const auto& pool = pools[bucket_pool[i]];
      auto& c = cursor[bucket_pool[i]];
      out.push_back({t, pool[c % pool.size()]});
      ++c;
    };
    if (mode == ArrivalMode::kUniform) {
      for (std::size_t k = 0;; ++k) {
        const double t = start + static_cast<double>(k) / qps;
        if (t >= end) break;
        emit(t);
      }
    } else {
      std::exponential_distribution<double> gap(qps);
      for (double t = start + gap(rng); t < end; t += gap(rng)) emit(t);
    }
  }
  return out;
}

namespace {

std::string fix_articles(const std::string& s) {
  std::string out;
  out.reserve(s.size() + 8);
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += s[i];
    const bool word_a = s[i] == 'a' && (i == 0 || s[i - 1] == ' ') && i + 2 < s.size() &&
                        s[i + 1] == ' ';
    if (word_a && std::strchr("aeiou", s[i + 2])) out += 'n';
  }
  return out;
}

}  // namespace

std::vector<GeneratedPrompt> gen_prompt_texts(std::size_t n, std::uint64_t seed) {
  auto rng = make_stream(seed, 0, StreamTag::kPromptGen);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<GeneratedPrompt> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double c = u(rng);
    int objects = 1;
    for (int k = 0; k < 3; ++k) objects += u(rng) < c ? 1 : 0;
    std::string s = "a " + object_phrase(rng, c);
    if (u(rng) < c * 0.9) s += " " + pick(rng, kVerbs);
    for (int k = 1; k < objects; ++k) {
      s += u(rng) < 0.3 + 0.7 * c ? " " + pick(rng, kRelations) + " a " : " and a ";
      s += object_phrase(rng, c);
    }
    if (objects == 1 && u(rng) < 0.7) {
      s += " on a " + (u(rng) < c ? pick(rng, kPlainAdjectives) + " " : std::string()) +
           pick(rng, kScenes);
    }
    if (u(rng) < c * c) {
      s += " representing " + pick(rng, kAbstract) + " and " + pick(rng, kAbstract);
    }
    if (u(rng) < c * 0.7) s += " in " + pick(rng, kPlaces);
    if (u(rng) < c * 0.7) s += ", in the style of " + pick(rng, kArtists);
    out.push_back({fix_articles(s), c});
  }
  return out;
}

PromptPopulation build_population(const std::vector<GeneratedPrompt>& texts,
                                  const LexiconSet& lex,
                                  const RouterWeights& weights) {
  PromptPopulation pop;
  pop.reserve(texts.size());
  for (const auto& g : texts) {
    Prompt p = score_prompt(g.text, lex, weights);
    if (g.complexity < 1.0 / 3.0) {
      p.hard = false;
    } else if (g.complexity >= 2.0 / 3.0) {
      p.hard = true;
    }
    pop.push_back(std::move(p));
  }
  return pop;
}

PromptPopulation load_prompts(const std::string& path, const LexiconSet& lex,
                              const RouterWeights& weights) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open prompts " + path);
  PromptPopulation pop;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::optional<bool> label;
    const auto tab = line.rfind('\t');
    if (tab != std::string::npos) {
      const auto tag = trim(line.substr(tab + 1));
      if (tag == "easy") {
        label = false;
      } else if (tag == "hard") {
        label = true;
      } else if (!tag.empty()) {
        throw Error("invalid-prompts",
                    fmt::format("{}:{}: label must be easy or hard", path, line_no));
      }
      line = line.substr(0, tab);
    }
    Prompt p = score_prompt(line, lex, weights);
    p.hard = label;
    pop.push_back(std::move(p));
  }
  if (pop.empty()) throw Error("invalid-prompts", path + ": no prompts");
  return pop;
}

void save_prompts(const PromptPopulation& prompts, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path);
  for (const auto& p : prompts) {
    out << p.text;
    if (p.hard) out << '\t' << (*p.hard ? "hard" : "easy");
    out << '\n';
  }
}

double auto_scale(const DemandTrace& trace, const Catalog& catalog, int workers,
                  double fraction) {
  const auto& light = catalog.lightest();
  double mu = 0.0;
  for (const auto& [b, m] : light.throughput_qps) mu = std::max(mu, m);
  const double peak = trace.peak();
  if (!(peak > 0.0)) throw Error("invalid-trace", "cannot scale an all-zero trace");
  return fraction * workers * mu / peak;
}

}  // namespace hadis

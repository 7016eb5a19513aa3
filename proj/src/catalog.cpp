#include "hadis/catalog.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include "hadis/error.hpp"
#include "hadis/rng.hpp"

namespace hadis {

namespace {

constexpr double kThroughputTol = 1e-9;

bool rel_close(double x, double y, double eps) {
  return std::abs(x - y) <= eps * std::max(std::abs(x), std::abs(y));
}

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  throw Error("invalid-catalog", path + ": " + what);
}

}  // namespace

ModelVariant make_variant(std::string id, double latency_b1,
                          std::span<const int> batch_set, double beta,
                          double base_quality_cost, double hardness_penalty,
                          double accept_offset, double accept_slope) {
  std::map<int, double> lat;
  for (int b : batch_set) lat[b] = latency_b1 * (1.0 + beta * (b - 1));
  return make_variant_from_table(std::move(id), std::move(lat),
                                 base_quality_cost, hardness_penalty,
                                 accept_offset, accept_slope);
}

ModelVariant make_variant_from_table(std::string id,
                                     std::map<int, double> latency_s,
                                     double base_quality_cost,
                                     double hardness_penalty,
                                     double accept_offset,
                                     double accept_slope) {
  ModelVariant v;
  v.id = std::move(id);
  v.latency_s = std::move(latency_s);
  for (const auto& [b, l] : v.latency_s) v.throughput_qps[b] = b / l;
  v.base_quality_cost = base_quality_cost;
  v.hardness_penalty = hardness_penalty;
  v.accept_offset = accept_offset;
  v.accept_slope = accept_slope;
  return v;
}

double batch_latency(const ModelVariant& v, int b) {
  auto it = v.latency_s.find(b);
  if (it == v.latency_s.end()) {
    throw Error("batch-not-profiled", fmt::format("{} at b={}", v.id, b));
  }
  return it->second;
}

double batch_throughput(const ModelVariant& v, int b) {
  auto it = v.throughput_qps.find(b);
  if (it == v.throughput_qps.end()) {
    throw Error("batch-not-profiled", fmt::format("{} at b={}", v.id, b));
  }
  return it->second;
}

double partial_batch_latency(const ModelVariant& v, int count) {
  auto it = v.latency_s.lower_bound(std::max(count, 1));
  if (it == v.latency_s.end()) {
    throw Error("batch-not-profiled",
                fmt::format("{} has no batch point >= {}", v.id, count));
  }
  return it->second;
}

double single_latency(const ModelVariant& v) {
  if (v.latency_s.empty()) throw Error("batch-not-profiled", v.id);
  return v.latency_s.begin()->second;
}

Catalog::Catalog(std::vector<ModelVariant> variants, std::vector<int> batch_set,
                 bool paper_calibrated)
    : variants_(std::move(variants)),
      batch_set_(std::move(batch_set)),
      paper_calibrated_(paper_calibrated) {
  if (batch_set_.empty()) invalid("batch_set", "must be nonempty");
  for (std::size_t i = 0; i < batch_set_.size(); ++i) {
    if (batch_set_[i] <= 0) {
      invalid(fmt::format("batch_set[{}]", i), "batch sizes must be positive");
    }
    if (i > 0 && batch_set_[i] <= batch_set_[i - 1]) {
      invalid(fmt::format("batch_set[{}]", i), "must be sorted ascending");
    }
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < variants_.size(); ++i) {
    const auto& v = variants_[i];
    const std::string path = fmt::format("variants[{}]", i);
    if (v.id.empty()) invalid(path + ".id", "must be nonempty");
    if (!ids.insert(v.id).second) invalid(path + ".id", "duplicate id " + v.id);
    if (v.latency_s.size() != batch_set_.size()) {
      invalid(path + ".latency_s", "must cover exactly the batch set");
    }
    double prev = 0.0;
    for (int b : batch_set_) {
      const std::string bp = fmt::format("{}.latency_s[{}]", path, b);
      auto it = v.latency_s.find(b);
      if (it == v.latency_s.end()) invalid(bp, "missing");
      if (!(it->second > prev)) invalid(bp, "latency must increase with b");
      prev = it->second;
      auto mu = v.throughput_qps.find(b);
      if (mu == v.throughput_qps.end() ||
          std::abs(mu->second * it->second - b) > kThroughputTol) {
        invalid(fmt::format("{}.throughput_qps[{}]", path, b),
                "must equal b / latency");
      }
    }
    if (!(v.base_quality_cost >= 0.0)) {
      invalid(path + ".base_quality_cost", "must be nonnegative");
    }
    if (!(v.hardness_penalty >= 0.0)) {
      invalid(path + ".hardness_penalty", "must be nonnegative");
    }
  }
  if (paper_calibrated_) {
    auto order = by_latency();
    for (std::size_t i = 1; i < order.size(); ++i) {
      if (!(order[i]->base_quality_cost < order[i - 1]->base_quality_cost)) {
        invalid(fmt::format("variants[{}].base_quality_cost",
                            index_of(order[i]->id)),
                "slower model must have strictly lower quality cost");
      }
    }
  }
}

const ModelVariant* Catalog::find(const std::string& id) const {
  for (const auto& v : variants_) {
    if (v.id == id) return &v;
  }
  return nullptr;
}

const ModelVariant& Catalog::at(const std::string& id) const {
  const ModelVariant* v = find(id);
  if (v == nullptr) throw Error("unknown-model", id);
  return *v;
}

std::size_t Catalog::index_of(const std::string& id) const {
  for (std::size_t i = 0; i < variants_.size(); ++i) {
    if (variants_[i].id == id) return i;
  }
  throw Error("unknown-model", id);
}

std::vector<const ModelVariant*> Catalog::by_latency() const {
  std::vector<const ModelVariant*> out;
  for (const auto& v : variants_) out.push_back(&v);
  std::stable_sort(out.begin(), out.end(), [](auto* a, auto* b) {
    return single_latency(*a) < single_latency(*b);
  });
  return out;
}

const ModelVariant& Catalog::lightest() const {
  if (variants_.empty()) throw Error("empty-catalog", "no variants");
  return *by_latency().front();
}

const ModelVariant& Catalog::heaviest() const {
  if (variants_.empty()) throw Error("empty-catalog", "no variants");
  return *by_latency().back();
}

Catalog default_catalog() {
  const std::vector<int> batches = {1, 2, 4, 8, 16};
  // Acceptance curves: at tau = 0.5 the noiseless acceptance over uniform
  // hardness is a/s, i.e. 0.5 for the lightest and 0.9 for the heaviest.
  std::vector<ModelVariant> v = {
      make_variant("SDXL-Lightning", 0.5, batches, kDefaultBatchScaling, 36.0,
                   20.0, 4.0, 8.0),
      make_variant("SD3.5-Turbo", 1.3, batches, kDefaultBatchScaling, 31.0,
                   14.0, 4.8, 8.0),
      make_variant("SD3.5-Medium", 13.0, batches, kDefaultBatchScaling, 26.0,
                   8.0, 6.0, 8.0),
      make_variant("SD3.5-Large", 27.0, batches, kDefaultBatchScaling, 23.0,
                   5.0, 7.2, 8.0),
  };
  return Catalog(std::move(v), batches, true);
}

nlohmann::json catalog_to_json(const Catalog& catalog) {
  nlohmann::json j;
  j["batch_set"] = catalog.batch_set();
  j["paper_calibrated"] = catalog.paper_calibrated();
  j["variants"] = nlohmann::json::array();
  for (const auto& v : catalog.variants()) {
    nlohmann::json lat = nlohmann::json::object();
    for (const auto& [b, l] : v.latency_s) lat[std::to_string(b)] = l;
    j["variants"].push_back({{"id", v.id},
                             {"latency_table", lat},
                             {"base_quality_cost", v.base_quality_cost},
                             {"hardness_penalty", v.hardness_penalty},
                             {"accept", {v.accept_offset, v.accept_slope}}});
  }
  return j;
}

Catalog catalog_from_json(const nlohmann::json& j) {
  auto need = [](const nlohmann::json& obj, const char* key,
                 const std::string& path) -> const nlohmann::json& {
    if (!obj.is_object() || !obj.contains(key)) invalid(path + "." + key, "missing");
    return obj.at(key);
  };
  std::vector<int> batches = {1, 2, 4, 8, 16};
  try {
    if (j.contains("batch_set")) batches = j.at("batch_set").get<std::vector<int>>();
  } catch (const nlohmann::json::exception&) {
    invalid("batch_set", "must be a list of integers");
  }
  const double beta = j.value("batch_scaling", kDefaultBatchScaling);
  const bool calibrated = j.value("paper_calibrated", false);
  const auto& arr = need(j, "variants", "catalog");
  if (!arr.is_array()) invalid("variants", "must be a list");
  std::vector<ModelVariant> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& e = arr[i];
    const std::string path = fmt::format("variants[{}]", i);
    try {
      const std::string id = need(e, "id", path).get<std::string>();
      const double c = need(e, "base_quality_cost", path).get<double>();
      const double g = e.value("hardness_penalty", 0.0);
      double a = 0.0, s = 0.0;
      if (e.contains("accept")) {
        auto ap = e.at("accept").get<std::vector<double>>();
        if (ap.size() != 2) invalid(path + ".accept", "expected [offset, slope]");
        a = ap[0];
        s = ap[1];
      }
      if (e.contains("latency_table")) {
        std::map<int, double> lat;
        for (const auto& [k, val] : e.at("latency_table").items()) {
          lat[std::stoi(k)] = val.get<double>();
        }
        out.push_back(make_variant_from_table(id, std::move(lat), c, g, a, s));
      } else {
        const double l1 = need(e, "latency_s", path).get<double>();
        if (!(l1 > 0.0)) invalid(path + ".latency_s", "must be positive");
        out.push_back(make_variant(id, l1, batches, beta, c, g, a, s));
      }
    } catch (const nlohmann::json::exception& ex) {
      invalid(path, ex.what());
    } catch (const std::invalid_argument&) {
      invalid(path + ".latency_table", "keys must be integers");
    }
  }
  return Catalog(std::move(out), std::move(batches), calibrated);
}

Catalog load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open catalog " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw Error("invalid-catalog", path + ": " + ex.what());
  }
  return catalog_from_json(j);
}

std::uint64_t catalog_hash(const Catalog& catalog) {
  return fnv1a(catalog_to_json(catalog).dump());
}

Catalog select_candidates(const Catalog& pool, double eps_lat, double eps_q) {
  if (pool.empty()) throw Error("empty-pool", "nothing to select from");
  if (!(eps_lat > 0.0 && eps_lat < 0.5) || !(eps_q > 0.0 && eps_q < 0.5)) {
    throw Error("bad-tolerance", "tolerances must lie in (0, 0.5)");
  }
  const auto& vs = pool.variants();
  const std::size_t n = vs.size();
  auto lat = [&](std::size_t i) { return single_latency(vs[i]); };
  auto cost = [&](std::size_t i) { return vs[i].base_quality_cost; };

  // Unique extremes are never pruned.
  std::vector<bool> prot(n, false);
  auto mark_unique_min = [&](auto key) {
    std::size_t best = 0;
    int ties = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (key(i) < key(best)) {
        best = i;
        ties = 0;
      } else if (i != best && key(i) == key(best)) {
        ++ties;
      }
    }
    if (ties == 0) prot[best] = true;
  };
  mark_unique_min(lat);
  mark_unique_min(cost);

  // 1. Adjacency: representatives visited protected-first, then by id.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) {
    if (prot[a] != prot[b]) return static_cast<bool>(prot[a]);
    return vs[a].id < vs[b].id;
  });
  std::vector<std::size_t> kept;
  for (std::size_t i : order) {
    bool similar = false;
    for (std::size_t k : kept) {
      if (rel_close(lat(i), lat(k), eps_lat) &&
          rel_close(cost(i), cost(k), eps_q)) {
        similar = true;
        break;
      }
    }
    if (!similar || prot[i]) kept.push_back(i);
  }

  // 2. Dominance.
  std::vector<std::size_t> chain;
  for (std::size_t i : kept) {
    bool dominated = false;
    for (std::size_t u : kept) {
      if (u == i) continue;
      if ((lat(u) <= lat(i) && cost(u) < cost(i)) ||
          (lat(u) < lat(i) && cost(u) <= cost(i))) {
        dominated = true;
        break;
      }
    }
    if (!dominated) chain.push_back(i);
  }

  // 3. Intermediate redundancy, removing the closest-to-segment point first.
  std::stable_sort(chain.begin(), chain.end(),
                   [&](auto a, auto b) { return lat(a) < lat(b); });
  while (chain.size() >= 3) {
    double best_dev = std::numeric_limits<double>::infinity();
    std::size_t best_pos = 0;
    for (std::size_t p = 1; p + 1 < chain.size(); ++p) {
      const std::size_t l = chain[p - 1], m = chain[p], r = chain[p + 1];
      if (prot[m]) continue;
      const double span_l = lat(r) - lat(l);
      if (span_l <= 0.0) continue;
      const double t = (lat(m) - lat(l)) / span_l;
      const double interp = cost(l) + t * (cost(r) - cost(l));
      const double span_q = std::abs(cost(l) - cost(r));
      const double gap = std::abs(cost(m) - interp);
      const double dev = span_q > 0.0 ? gap / span_q
                                      : (gap == 0.0 ? 0.0 : gap / 0.0);
      if (dev < best_dev) {
        best_dev = dev;
        best_pos = p;
      }
    }
    if (best_pos == 0 || best_dev > eps_q) break;
    chain.erase(chain.begin() + static_cast<std::ptrdiff_t>(best_pos));
  }

  std::sort(chain.begin(), chain.end());
  std::vector<ModelVariant> out;
  for (std::size_t i : chain) out.push_back(vs[i]);
  return Catalog(std::move(out), pool.batch_set(), pool.paper_calibrated());
}

std::vector<std::size_t> pareto_prune(std::span<const ParetoPoint> points) {
  std::vector<std::size_t> idx(points.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (points[a].latency != points[b].latency) {
      return points[a].latency < points[b].latency;
    }
    return points[a].quality < points[b].quality;
  });
  std::vector<std::size_t> out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i : idx) {
    if (points[i].quality < best) {
      out.push_back(i);
      best = points[i].quality;
    }
  }
  return out;
}

}  // namespace hadis

#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace hadis {

// A servable model with its profiled per-batch latency and the parameters of
// the simulated quality surrogate.
struct ModelVariant {
  std::string id;
  std::map<int, double> latency_s;       // batch size -> seconds per batch
  std::map<int, double> throughput_qps;  // batch size -> queries/s per worker
  double base_quality_cost = 0.0;        // standalone FID proxy, lower is better
  double hardness_penalty = 0.0;         // extra cost per unit of hardness
  double accept_offset = 0.0;            // discriminator curve sigmoid(a - s*h)
  double accept_slope = 0.0;
};

inline constexpr double kDefaultBatchScaling = 0.25;

// Builds a variant whose batch latencies follow L(b) = L(1) * (1 + beta*(b-1)).
ModelVariant make_variant(std::string id, double latency_b1,
                          std::span<const int> batch_set, double beta,
                          double base_quality_cost, double hardness_penalty,
                          double accept_offset, double accept_slope);

// Builds a variant from an explicit latency table; throughput is derived.
ModelVariant make_variant_from_table(std::string id,
                                     std::map<int, double> latency_s,
                                     double base_quality_cost,
                                     double hardness_penalty,
                                     double accept_offset, double accept_slope);

// Exact profile lookup. Throws Error("batch-not-profiled") for unknown b.
double batch_latency(const ModelVariant& v, int b);
double batch_throughput(const ModelVariant& v, int b);

// Latency of a partial batch of `count` queries: the profiled point at the
// smallest profiled batch size >= count.
double partial_batch_latency(const ModelVariant& v, int count);

// Latency at the smallest profiled batch size.
double single_latency(const ModelVariant& v);

class Catalog {
 public:
  Catalog() = default;
  // Validates all invariants; throws Error("invalid-catalog") naming the
  // first violation by path (e.g. "variants[1].latency_s[4]").
  Catalog(std::vector<ModelVariant> variants, std::vector<int> batch_set,
          bool paper_calibrated = false);

  const std::vector<ModelVariant>& variants() const { return variants_; }
  const std::vector<int>& batch_set() const { return batch_set_; }
  bool paper_calibrated() const { return paper_calibrated_; }
  std::size_t size() const { return variants_.size(); }
  bool empty() const { return variants_.empty(); }

  const ModelVariant* find(const std::string& id) const;
  const ModelVariant& at(const std::string& id) const;  // Error("unknown-model")
  std::size_t index_of(const std::string& id) const;

  // Variants ordered by single-image latency, ties by catalog order.
  std::vector<const ModelVariant*> by_latency() const;
  const ModelVariant& lightest() const;
  const ModelVariant& heaviest() const;

 private:
  std::vector<ModelVariant> variants_;
  std::vector<int> batch_set_;
  bool paper_calibrated_ = false;
};

// Four-model catalog with the measured single-image latencies of
// SDXL-Lightning, SD3.5-Turbo, SD3.5-Medium and SD3.5-Large.
Catalog default_catalog();

nlohmann::json catalog_to_json(const Catalog& catalog);
Catalog catalog_from_json(const nlohmann::json& j);
Catalog load_catalog(const std::string& path);
std::uint64_t catalog_hash(const Catalog& catalog);

// Applies adjacency, dominance and intermediate-redundancy pruning in order.
Catalog select_candidates(const Catalog& pool, double eps_lat = 0.1,
                          double eps_q = 0.1);

struct ParetoPoint {
  double latency = 0.0;
  double quality = 0.0;  // lower is better
};

// Indices of non-dominated points sorted by latency ascending; exact ties keep
// the smaller index.
std::vector<std::size_t> pareto_prune(std::span<const ParetoPoint> points);

template <class Row, class Proj>
std::vector<Row> pareto_prune_rows(const std::vector<Row>& rows, Proj proj) {
  std::vector<ParetoPoint> pts;
  pts.reserve(rows.size());
  for (const auto& r : rows) pts.push_back(proj(r));
  std::vector<Row> out;
  for (std::size_t i : pareto_prune(pts)) out.push_back(rows[i]);
  return out;
}

}  // namespace hadis

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "hadis/catalog.hpp"
#include "hadis/prompt.hpp"
#include "json.hpp"

namespace hadis {

// One profiled cascade configuration. Single-model rows have light == heavy,
// route_light == 1 and route_heavy == 0.
struct ConfigRow {
  std::string light;
  std::string heavy;
  double theta = 1.0;
  double tau = 0.0;
  double bypass_fraction = 0.0;
  double rejected_fraction = 0.0;
  double route_light = 1.0;  // 1 - bypass
  double route_heavy = 0.0;  // bypass + rejected
  double fid = 0.0;
  double mean_latency = 0.0;  // b=1, empty queues

  bool single_model() const { return light == heavy; }
  // Models processing a positive share of queries, light first.
  std::vector<std::pair<std::string, double>> active_routes() const;
  bool operator==(const ConfigRow&) const = default;
};

struct ThresholdGrid {
  std::vector<double> theta;
  std::vector<double> tau;

  static ThresholdGrid uniform(int steps = 10);  // {0, 1/steps, ..., 1}
};

struct TableProvenance {
  std::uint64_t catalog_hash = 0;
  std::uint64_t population_hash = 0;
  ThresholdGrid grid;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
};

struct PairStats {
  std::string light;
  std::string heavy;
  std::size_t profiled = 0;
  std::size_t retained = 0;
};

struct LookupTable {
  std::vector<ConfigRow> rows;        // per-pair Pareto fronts, pair order
  std::vector<ConfigRow> standalone;  // one single-model row per variant
  TableProvenance provenance;
  std::vector<PairStats> pair_stats;
};

struct ProfileOptions {
  std::uint64_t seed = 0;
  double noise_sigma = 0.05;
};

// Tallies one configuration over the population. Throws Error("pair-order")
// when the light model is slower than the heavy one at b=1.
ConfigRow profile_config(const ModelVariant& light, const ModelVariant& heavy,
                         double theta, double tau,
                         const PromptPopulation& prompts,
                         const ProfileOptions& opt);

ConfigRow profile_single(const ModelVariant& v, const PromptPopulation& prompts);

// Every grid point for one pair, unpruned, in (theta, tau) order.
std::vector<ConfigRow> profile_pair(const ModelVariant& light,
                                    const ModelVariant& heavy,
                                    const ThresholdGrid& grid,
                                    const PromptPopulation& prompts,
                                    const ProfileOptions& opt);

LookupTable build_lookup_table(const Catalog& catalog, const ThresholdGrid& grid,
                               const PromptPopulation& prompts,
                               const ProfileOptions& opt);

// Unpruned table restricted to one pair and the given grid.
LookupTable build_pair_table(const Catalog& catalog, const std::string& light,
                             const std::string& heavy, const ThresholdGrid& grid,
                             const PromptPopulation& prompts,
                             const ProfileOptions& opt);

nlohmann::json config_row_to_json(const ConfigRow& row);
ConfigRow config_row_from_json(const nlohmann::json& j);
nlohmann::json table_to_json(const LookupTable& table);
LookupTable table_from_json(const nlohmann::json& j);
void save_table(const LookupTable& table, const std::string& path);
// Throws Error("provenance-mismatch") when the table was profiled against a
// different catalog, unless override_provenance is set.
LookupTable load_table(const std::string& path, const Catalog& catalog,
                       bool override_provenance = false);

struct FrontierPoint {
  double latency = 0.0;
  double fid = 0.0;
};

struct FrontierReport {
  std::vector<FrontierPoint> two_model;    // lower convex hull vertices
  std::vector<FrontierPoint> three_model;
  double max_quality_gap = 0.0;
  std::size_t two_model_configs = 0;
  std::size_t three_model_configs = 0;
};

// Lower convex hull of (latency, fid) from the fastest point to the
// best-quality point.
std::vector<FrontierPoint> lower_frontier(std::vector<FrontierPoint> points);

// Piecewise-linear interpolation along a frontier; clamps outside its range.
double frontier_value(const std::vector<FrontierPoint>& frontier, double latency);

// Compares two-model cascades against chains of up to three models.
// Throws Error("need-3-variants") for smaller catalogs.
FrontierReport frontier_compare(const Catalog& catalog, const ThresholdGrid& grid,
                                const PromptPopulation& prompts,
                                const ProfileOptions& opt);

}  // namespace hadis

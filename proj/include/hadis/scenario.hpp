#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hadis/catalog.hpp"
#include "hadis/profiler.hpp"
#include "hadis/prompt.hpp"
#include "hadis/router.hpp"
#include "hadis/sim.hpp"
#include "hadis/workload.hpp"
#include "json.hpp"

namespace hadis {

inline constexpr const char* kVersion = "0.1.0";

// Command-line overrides applied on top of a scenario file.
struct ScenarioOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> policy;
  std::optional<std::string> planner;
  std::optional<double> slo_multiplier;
  bool override_provenance = false;
};

// Everything a run needs, fully materialized.
struct Scenario {
  nlohmann::json config;  // effective config after overrides
  std::string base_dir;
  std::string config_hash;

  Catalog catalog;
  LexiconSet lexicon;
  RouterWeights weights;
  PromptPopulation prompts;
  LookupTable table;
  LookupTable diffserve_table;
  DemandTrace trace;
  double trace_scale = 1.0;
  std::vector<std::vector<std::size_t>> pools;
  std::vector<std::size_t> bucket_pool;
  std::vector<bool> phase_hard;  // only for hardness-phase traces

  SimConfig sim;  // pointers refer into this Scenario

  Scenario() = default;
  Scenario(const Scenario&) = delete;
  Scenario& operator=(const Scenario&) = delete;
};

// Built-in defaults for every config key.
nlohmann::json default_scenario_json();

// Throws Error("config") listing every validation problem at once.
std::unique_ptr<Scenario> build_scenario(nlohmann::json config,
                                         const std::string& base_dir,
                                         const ScenarioOverrides& ov = {});
std::unique_ptr<Scenario> load_scenario(const std::string& path,
                                        const ScenarioOverrides& ov = {});

// Rebinds sim pointers and regenerates arrivals after a field change.
void refresh_sim(Scenario& s);

std::string config_hash(const nlohmann::json& config);

}  // namespace hadis

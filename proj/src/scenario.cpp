#include "hadis/scenario.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <fstream>

#include "hadis/error.hpp"
#include "hadis/rng.hpp"

namespace hadis {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void deep_merge(json& base, const json& patch) {
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (it->is_object() && base.contains(it.key()) && base[it.key()].is_object()) {
      deep_merge(base[it.key()], *it);
    } else {
      base[it.key()] = *it;
    }
  }
}

std::string resolve(const std::string& base, const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute() || base.empty()) return p;
  return (fs::path(base) / p).lexically_normal().string();
}

class Checker {
 public:
  explicit Checker(const json& j) : j_(j) {}

  double number(const char* key, double lo, bool lo_open = false) {
    if (!j_.contains(key) || !j_[key].is_number()) {
      errs.push_back(fmt::format("'{}' must be a number", key));
      return lo;
    }
    const double v = j_[key].get<double>();
    if (lo_open ? !(v > lo) : !(v >= lo)) {
      errs.push_back(fmt::format("'{}' must be {} {}", key, lo_open ? ">" : ">=", lo));
    }
    return v;
  }

  std::vector<std::string> errs;

 private:
  const json& j_;
};

ArrivalMode parse_mode(const std::string& s) {
  if (s == "poisson") return ArrivalMode::kPoisson;
  if (s == "uniform") return ArrivalMode::kUniform;
  throw Error("config", "arrival_mode must be poisson or uniform");
}

double resolve_scale(const json& t, const DemandTrace& raw, const Catalog& cat,
                     int workers) {
  const auto& s = t.value("scale", json("auto"));
  if (s.is_string() && s.get<std::string>() == "auto") {
    return auto_scale(raw, cat, workers, t.value("peak_fraction", 0.8));
  }
  if (!s.is_number() || !(s.get<double>() > 0.0)) {
    throw Error("config", "trace.scale must be \"auto\" or a positive number");
  }
  return s.get<double>();
}

}  // namespace

json default_scenario_json() {
  return json{
      {"catalog", nullptr},
      {"lexicon", nullptr},
      {"router_weights", nullptr},
      {"prompts", {{"generate", 600}, {"seed", 7}}},
      {"table", nullptr},
      {"grid_steps", 10},
      {"profile_seed", 1},
      {"noise_sigma", 0.05},
      {"diffserve_pair", {"SD3.5-Turbo", "SD3.5-Large"}},
      {"planner", "hadis"},
      {"policy", "hybrid"},
      {"trace",
       {{"kind", "piecewise"},
        {"levels", {0.1, 0.4, 1.0, 0.4}},
        {"dwell_s", 300},
        {"scale", "auto"},
        {"peak_fraction", 0.8}}},
      {"arrival_mode", "poisson"},
      {"workers", 16},
      {"t_slo", 60.0},
      {"slo_multiplier", 1.0},
      {"seed", 1},
      {"alpha", 1.5},
      {"lambda_floor", 0.01},
      {"ewma_weight", 0.3},
      {"epoch_s", 5.0},
      {"solver_delay_s", 0.03},
      {"swap_delay_s", 2.0},
      {"router_s", 0.005},
      {"discriminator_s", 0.007},
      {"bucket_s", 10.0},
      {"cache_demand_bin", 10.0},
      {"cache_queue_bin", 50.0},
      {"spare_horizon_s", 30.0},
      {"initial_demand", nullptr},
  };
}

std::string config_hash(const json& config) { return hex64(fnv1a(config.dump())); }

std::unique_ptr<Scenario> build_scenario(json config, const std::string& base_dir,
                                         const ScenarioOverrides& ov) {
  json cfg = default_scenario_json();
  if (!config.is_object()) throw Error("config", "scenario must be a JSON object");
  deep_merge(cfg, config);
  if (ov.seed) cfg["seed"] = *ov.seed;
  if (ov.policy) cfg["policy"] = *ov.policy;
  if (ov.planner) cfg["planner"] = *ov.planner;
  if (ov.slo_multiplier) cfg["slo_multiplier"] = *ov.slo_multiplier;

  // Validate scalar fields and file references before doing any work.
  Checker c(cfg);
  c.number("workers", 1);
  c.number("t_slo", 0, true);
  c.number("slo_multiplier", 0, true);
  c.number("alpha", 1);
  c.number("lambda_floor", 0, true);
  c.number("ewma_weight", 0, true);
  c.number("epoch_s", 0, true);
  c.number("solver_delay_s", 0);
  c.number("swap_delay_s", 0);
  c.number("router_s", 0);
  c.number("discriminator_s", 0);
  c.number("bucket_s", 0, true);
  c.number("cache_demand_bin", 0, true);
  c.number("cache_queue_bin", 0, true);
  c.number("spare_horizon_s", 0, true);
  c.number("noise_sigma", 0);
  c.number("grid_steps", 1);
  auto errs = std::move(c.errs);
  if (cfg["ewma_weight"].is_number() && cfg["ewma_weight"].get<double>() > 1.0) {
    errs.push_back("'ewma_weight' must be <= 1");
  }
  if (!cfg["seed"].is_number_integer() || cfg["seed"].get<long long>() < 0) errs.push_back("'seed' must be a nonnegative integer");
  try {
    parse_policy(cfg["policy"].get<std::string>());
  } catch (const std::exception& e) {
    errs.push_back(e.what());
  }
  try {
    parse_planner(cfg["planner"].get<std::string>());
  } catch (const std::exception& e) {
    errs.push_back(e.what());
  }
  try {
    parse_mode(cfg["arrival_mode"].get<std::string>());
  } catch (const std::exception& e) {
    errs.push_back(e.what());
  }
  auto check_file = [&](const json& v, const char* what, bool dir = false) {
    if (v.is_null()) return;
    if (!v.is_string()) {
      errs.push_back(fmt::format("'{}' must be a path", what));
      return;
    }
    const auto p = resolve(base_dir, v.get<std::string>());
    if (dir ? !fs::is_directory(p) : !fs::is_regular_file(p)) {
      errs.push_back(fmt::format("{} not found: {}", what, p));
    }
  };
  check_file(cfg["catalog"], "catalog");
  check_file(cfg["lexicon"], "lexicon", true);
  check_file(cfg["table"], "table");
  if (cfg["prompts"].contains("file")) check_file(cfg["prompts"]["file"], "prompts");
  const auto& trace = cfg["trace"];
  const std::string kind = trace.value("kind", "");
  if (kind == "file") {
    check_file(trace.value("path", json()), "trace");
  } else if (kind != "piecewise" && kind != "azure_like" && kind != "hardness_phases") {
    errs.push_back("trace.kind must be piecewise, file, azure_like or hardness_phases");
  }
  if (!errs.empty()) {
    std::string all;
    for (const auto& e : errs) all += "\n  - " + e;
    throw Error("config", "invalid scenario:" + all);
  }

  auto s = std::make_unique<Scenario>();
  s->base_dir = base_dir;
  s->config = cfg;
  s->config_hash = config_hash(cfg);

  s->catalog = cfg["catalog"].is_null()
                   ? default_catalog()
                   : load_catalog(resolve(base_dir, cfg["catalog"].get<std::string>()));
  s->lexicon = cfg["lexicon"].is_null()
                   ? default_lexicon()
                   : load_lexicon(resolve(base_dir, cfg["lexicon"].get<std::string>()));
  s->weights = RouterWeights::uniform();
  if (!cfg["router_weights"].is_null()) {
    const auto w = cfg["router_weights"].get<std::vector<double>>();
    if (w.size() != kFeatureCount) throw Error("config", "router_weights needs 8 values");
    std::array<double, kFeatureCount> raw{};
    std::copy(w.begin(), w.end(), raw.begin());
    s->weights = RouterWeights::normalized(raw);
  }

  const auto& pc = cfg["prompts"];
  if (pc.contains("file")) {
    s->prompts = load_prompts(resolve(base_dir, pc["file"].get<std::string>()),
                              s->lexicon, s->weights);
  } else {
    s->prompts = build_population(
        gen_prompt_texts(pc.value("generate", 600), pc.value("seed", 7)), s->lexicon,
        s->weights);
  }

  const ThresholdGrid grid = ThresholdGrid::uniform(cfg["grid_steps"].get<int>());
  const ProfileOptions popt{cfg["profile_seed"].get<std::uint64_t>(),
                            cfg["noise_sigma"].get<double>()};
  if (cfg["table"].is_null()) {
    s->table = build_lookup_table(s->catalog, grid, s->prompts, popt);
  } else {
    s->table = load_table(resolve(base_dir, cfg["table"].get<std::string>()), s->catalog,
                          ov.override_provenance);
  }
  const auto pair = cfg["diffserve_pair"].get<std::vector<std::string>>();
  if (pair.size() == 2 && s->catalog.find(pair[0]) && s->catalog.find(pair[1])) {
    ThresholdGrid ds_grid = grid;
    ds_grid.theta = {1.0};
    s->diffserve_table =
        build_pair_table(s->catalog, pair[0], pair[1], ds_grid, s->prompts, popt);
  }

  const int workers = cfg["workers"].get<int>();
  if (kind == "piecewise") {
    const auto raw = gen_piecewise(trace.at("levels").get<std::vector<double>>(),
                                   trace.value("dwell_s", 300.0));
    s->trace_scale = resolve_scale(trace, raw, s->catalog, workers);
    s->trace = scale_trace(raw, s->trace_scale);
  } else if (kind == "file") {
    const auto raw = load_trace(resolve(base_dir, trace.at("path").get<std::string>()));
    s->trace_scale = resolve_scale(trace, raw, s->catalog, workers);
    s->trace = scale_trace(raw, s->trace_scale);
  } else if (kind == "azure_like") {
    const auto raw = gen_azure_like(trace.value("duration_s", 1800.0),
                                    trace.value("bucket_s", 60.0),
                                    trace.value("seed", std::uint64_t{11}));
    s->trace_scale = resolve_scale(trace, raw, s->catalog, workers);
    s->trace = scale_trace(raw, s->trace_scale);
  }
  if (kind == "hardness_phases") {
    PromptPopulation easy, hard;
    for (const auto& p : s->prompts) {
      if (p.hard && *p.hard) hard.push_back(p);
      if (p.hard && !*p.hard) easy.push_back(p);
    }
    const auto raw_trace = gen_piecewise({1.0}, 1.0);
    double qps = 0.0;
    if (trace.value("qps", json("auto")).is_number()) {
      qps = trace["qps"].get<double>();
    } else {
      qps = auto_scale(raw_trace, s->catalog, workers, trace.value("peak_fraction", 0.5));
    }
    auto phases = gen_hardness_phases(easy, hard, trace.value("phase_s", 300.0), qps);
    s->prompts = std::move(phases.prompts);
    s->trace = std::move(phases.trace);
    s->pools = std::move(phases.pools);
    s->bucket_pool = std::move(phases.bucket_pool);
    s->phase_hard = std::move(phases.phase_hard);
  } else {
    s->pools.assign(1, {});
    for (std::size_t i = 0; i < s->prompts.size(); ++i) s->pools[0].push_back(i);
    s->bucket_pool.assign(s->trace.buckets.size(), 0);
  }
  refresh_sim(*s);
  return s;
}

void refresh_sim(Scenario& s) {
  const json& cfg = s.config;
  SimConfig& sim = s.sim;
  sim = SimConfig{};
  sim.catalog = &s.catalog;
  sim.table = &s.table;
  sim.diffserve_table = s.diffserve_table.rows.empty() ? nullptr : &s.diffserve_table;
  sim.prompts = &s.prompts;
  sim.policy = parse_policy(cfg["policy"].get<std::string>());
  sim.planner = parse_planner(cfg["planner"].get<std::string>());
  sim.workers = cfg["workers"].get<int>();
  sim.t_slo = cfg["t_slo"].get<double>() * cfg["slo_multiplier"].get<double>();
  sim.alpha = cfg["alpha"].get<double>();
  sim.lambda_floor = cfg["lambda_floor"].get<double>();
  sim.ewma_weight = cfg["ewma_weight"].get<double>();
  sim.epoch_s = cfg["epoch_s"].get<double>();
  sim.solver_delay_s = cfg["solver_delay_s"].get<double>();
  sim.swap_delay_s = cfg["swap_delay_s"].get<double>();
  sim.router_s = cfg["router_s"].get<double>();
  sim.discriminator_s = cfg["discriminator_s"].get<double>();
  sim.noise_sigma = cfg["noise_sigma"].get<double>();
  sim.bucket_s = cfg["bucket_s"].get<double>();
  sim.cache_demand_bin = cfg["cache_demand_bin"].get<double>();
  sim.cache_queue_bin = cfg["cache_queue_bin"].get<double>();
  sim.spare_horizon_s = cfg["spare_horizon_s"].get<double>();
  sim.seed = cfg["seed"].get<std::uint64_t>();
  sim.duration_s = s.trace.duration_s;
  sim.initial_demand = cfg["initial_demand"].is_number()
                           ? cfg["initial_demand"].get<double>()
                           : (s.trace.buckets.empty() ? 0.0 : s.trace.buckets[0].qps);
  sim.arrivals = arrivals(s.trace, s.pools, s.bucket_pool, sim.seed,
                          parse_mode(cfg["arrival_mode"].get<std::string>()));
}

std::unique_ptr<Scenario> load_scenario(const std::string& path,
                                        const ScenarioOverrides& ov) {
  std::ifstream in(path);
  if (!in) throw Error("config", "cannot open scenario " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error("config", fmt::format("{}: {}", path, e.what()));
  }
  return build_scenario(std::move(j), fs::path(path).parent_path().string(), ov);
}

}  // namespace hadis

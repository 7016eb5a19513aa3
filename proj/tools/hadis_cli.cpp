// hadis: profile, plan and simulate cascade serving scenarios.
#include <fmt/format.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "hadis/error.hpp"
#include "hadis/planner.hpp"
#include "hadis/report.hpp"
#include "hadis/router.hpp"
#include "hadis/scenario.hpp"

using namespace hadis;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool override_provenance = false;
  std::optional<std::string> policy;
  std::optional<std::string> planner;
  std::optional<double> slo_multiplier;
  bool quiet = false;

  ScenarioOverrides overrides() const {
    return {seed, policy, planner, slo_multiplier, override_provenance};
  }
};

std::string default_out() {
  const char* env = std::getenv("HADIS_OUT_DIR");
  return env && *env ? env : "out";
}

void add_common(CLI::App* app, Common& c, bool scenario_flags = true) {
  app->add_option("--config", c.config, "scenario JSON")->check(CLI::ExistingFile);
  app->add_option("--out", c.out, "output directory (default $HADIS_OUT_DIR or ./out)");
  app->add_flag("--quiet", c.quiet, "suppress progress output");
  if (!scenario_flags) return;
  app->add_option("--seed", c.seed, "run seed");
  app->add_flag("--override-provenance", c.override_provenance,
                "accept a table profiled against another catalog");
  app->add_option("--policy", c.policy, "hybrid|router-only|discriminator-only|random");
  app->add_option("--planner", c.planner,
                  "hadis|cache-d|cache-dq|clipper-light|clipper-heavy|proteus|diffserve");
  app->add_option("--slo-multiplier", c.slo_multiplier, "scales t_slo")
      ->check(CLI::PositiveNumber);
}

std::unique_ptr<Scenario> scenario_from(const std::string& path, const ScenarioOverrides& ov) {
  if (path.empty()) return build_scenario(json::object(), "", ov);
  return load_scenario(path, ov);
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("config", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config", fmt::format("{}: {}", path, e.what()));
  }
}

std::string out_dir(const Common& c) { return c.out.empty() ? default_out() : c.out; }

int cmd_profile(const Common& c) {
  auto s = scenario_from(c.config, c.overrides());
  const fs::path dir = out_dir(c);
  fs::create_directories(dir);
  const auto path = (dir / "table.json").string();
  save_table(s->table, path);
  if (!c.quiet) {
    for (const auto& p : s->table.pair_stats) {
      fmt::print("{} -> {}: {} profiled, {} retained\n", p.light, p.heavy, p.profiled,
                 p.retained);
    }
    fmt::print("{} rows, {} standalone -> {}\n", s->table.rows.size(),
               s->table.standalone.size(), path);
  }
  return 0;
}

int cmd_plan(const Common& c, std::optional<double> lambda,
             const std::vector<std::string>& queue_specs) {
  auto s = scenario_from(c.config, c.overrides());
  const auto kind = s->sim.planner;
  const auto rows = planner_rows(kind, s->catalog, s->table, s->sim.diffserve_table);
  PlannerInput in;
  in.rows = rows;
  in.catalog = &s->catalog;
  in.lambda = lambda.value_or(s->trace.peak());
  in.workers = s->sim.workers;
  in.t_slo = s->sim.t_slo;
  in.alpha = s->sim.alpha;
  in.lambda_floor = s->sim.lambda_floor;
  for (const auto& q : queue_specs) {
    const auto eq = q.find('=');
    if (eq == std::string::npos) throw Error("config", "--queue expects MODEL=N: " + q);
    const auto id = q.substr(0, eq);
    s->catalog.at(id);
    in.queues[id] = std::stol(q.substr(eq + 1));
  }
  Plan p;
  if (kind == PlannerKind::kClipperLight || kind == PlannerKind::kClipperHeavy) {
    p = clipper_plan(rows.front(), in);
  } else {
    p = solve(in);
  }
  json j = plan_to_json(p);
  j["lambda"] = in.lambda;
  j["validation_errors"] = p.feasible ? validate_plan(p, in) : std::vector<std::string>{};
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_simulate(const Common& c) {
  auto s = scenario_from(c.config, c.overrides());
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = run_simulation(s->sim);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto files = write_run_outputs(*s, r, wall, out_dir(c));
  if (!c.quiet) {
    const auto& m = r.summary;
    fmt::print("{} / {}: admitted {} avg_fid {:.4f} violation {:.5f} plan changes {}\n",
               planner_name(s->sim.planner), policy_name(s->sim.policy), m.admitted,
               m.avg_fid, m.slo_violation_ratio, m.plan_changes);
    fmt::print("wrote {} {} {} {}\n", files.metrics, files.summary, files.audit,
               files.timing);
  }
  return 0;
}

int cmd_compare(const Common& c, const std::vector<std::string>& configs) {
  std::vector<std::unique_ptr<Scenario>> runs;
  for (const auto& p : configs) runs.push_back(load_scenario(p, c.overrides()));
  std::vector<const Scenario*> ptrs;
  for (const auto& r : runs) ptrs.push_back(r.get());
  check_comparable(ptrs);
  std::vector<CompareEntry> entries;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto r = run_simulation(runs[i]->sim);
    entries.push_back({fs::path(configs[i]).stem().string(), r.summary});
  }
  const auto table = format_comparison(entries);
  std::cout << table;
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    std::ofstream(fs::path(c.out) / "compare.txt") << table;
  }
  return 0;
}

int cmd_sweep(const Common& c, const std::vector<double>& multipliers) {
  json cfg = c.config.empty() ? json::object() : read_json(c.config);
  const auto base = c.config.empty() ? std::string() : fs::path(c.config).parent_path().string();
  const auto rows = run_sweep(cfg, base, c.overrides(), multipliers);
  const auto table = format_sweep(rows);
  std::cout << table;
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    std::ofstream(fs::path(c.out) / "sweep.csv") << table;
  }
  return 0;
}

int cmd_recompute(const std::string& audit_path, const std::string& summary_path,
                  bool quiet) {
  std::ifstream in(audit_path);
  if (!in) throw Error("config", "cannot open " + audit_path);
  const auto log = read_audit_log(in);
  const auto s = summarize(log.queries, log.plans);
  if (summary_path.empty()) {
    std::cout << summary_to_json(s).dump(2) << '\n';
    return 0;
  }
  const auto stored = summary_from_json(read_json(summary_path));
  const auto diff = summary_diff(s, stored);
  if (!diff.empty()) {
    std::string fields;
    for (const auto& d : diff) fields += " " + d;
    throw Error("summary-mismatch", "fields differ:" + fields);
  }
  if (!quiet) fmt::print("summary matches audit log ({} queries)\n", log.queries.size());
  return 0;
}

int cmd_frontier(const Common& c, double sigma) {
  auto s = scenario_from(c.config, c.overrides());
  const int steps = s->config["grid_steps"].get<int>();
  const auto rep = frontier_compare(s->catalog, ThresholdGrid::uniform(steps), s->prompts,
                                    {s->config["profile_seed"].get<std::uint64_t>(), sigma});
  json j;
  auto pts = [](const std::vector<FrontierPoint>& v) {
    json a = json::array();
    for (const auto& p : v) a.push_back({p.latency, p.fid});
    return a;
  };
  j["two_model"] = pts(rep.two_model);
  j["three_model"] = pts(rep.three_model);
  j["max_quality_gap"] = rep.max_quality_gap;
  j["two_model_configs"] = rep.two_model_configs;
  j["three_model_configs"] = rep.three_model_configs;
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_gen_trace(const std::string& kind, const std::vector<double>& levels, double dwell,
                  double duration, double bucket, std::uint64_t seed, double scale,
                  const std::string& out) {
  DemandTrace t;
  if (kind == "piecewise") {
    t = gen_piecewise(levels, dwell);
  } else if (kind == "azure_like") {
    t = gen_azure_like(duration, bucket, seed);
  } else {
    throw Error("config", "--kind must be piecewise or azure_like");
  }
  t = scale_trace(t, scale);
  if (out.empty()) {
    write_trace(t, std::cout);
  } else {
    save_trace(t, out);
  }
  return 0;
}

int cmd_gen_prompts(std::size_t n, std::uint64_t seed, const std::string& out) {
  const auto pop = build_population(gen_prompt_texts(n, seed), default_lexicon(),
                                    RouterWeights::uniform());
  save_prompts(pop, out);
  return 0;
}

int cmd_tune_router(const std::string& prompts_path, const std::vector<double>& values,
                    const std::string& lexicon_dir, bool quiet) {
  const auto lex = lexicon_dir.empty() ? default_lexicon() : load_lexicon(lexicon_dir);
  const auto pop = load_prompts(prompts_path, lex, RouterWeights::uniform());
  std::vector<LabeledPrompt> corpus;
  for (const auto& p : pop) {
    if (p.hard) corpus.push_back({p.text, *p.hard});
  }
  const auto r = tune_weights(corpus, uniform_weight_grid(values), lex);
  json j{{"weights", r.weights.w},
         {"threshold", r.threshold},
         {"balanced_accuracy", r.balanced_accuracy},
         {"evaluated", r.evaluated}};
  std::cout << j.dump(2) << '\n';
  if (!quiet) fmt::print(stderr, "{} labeled prompts\n", corpus.size());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hadis - hybrid cascade serving simulator"};
  app.require_subcommand(1);
  Common c;

  auto* profile = app.add_subcommand("profile", "profile the lookup table");
  add_common(profile, c);

  auto* plan = app.add_subcommand("plan", "solve one planning instance");
  add_common(plan, c);
  std::optional<double> lambda;
  std::vector<std::string> queues;
  plan->add_option("--lambda", lambda, "demand in qps (default: trace peak)");
  plan->add_option("--queue", queues, "MODEL=N queued queries");

  auto* simulate = app.add_subcommand("simulate", "run one scenario");
  add_common(simulate, c);

  auto* compare = app.add_subcommand("compare", "run several scenarios on one trace");
  add_common(compare, c);
  std::vector<std::string> configs;
  compare->add_option("configs", configs, "scenario files")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "sweep the SLO multiplier");
  add_common(sweep, c);
  std::vector<double> multipliers{0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75};
  sweep->add_option("--multipliers", multipliers, "SLO multipliers")->delimiter(',');

  auto* recompute = app.add_subcommand("recompute", "rebuild a summary from an audit log");
  std::string audit_path, summary_path;
  bool rq = false;
  recompute->add_option("audit", audit_path, "audit.jsonl")->required()->check(CLI::ExistingFile);
  recompute->add_option("--summary", summary_path, "summary.json to check against");
  recompute->add_flag("--quiet", rq);

  auto* frontier = app.add_subcommand("frontier", "two- vs three-model frontiers");
  add_common(frontier, c);
  double sigma = 0.0;
  frontier->add_option("--noise", sigma, "discriminator noise sigma");

  auto* gen_trace = app.add_subcommand("gen-trace", "write a synthetic demand trace");
  std::string kind = "piecewise", trace_out;
  std::vector<double> levels{0.1, 0.4, 1.0, 0.4};
  double dwell = 300.0, duration = 1800.0, bucket = 60.0, scale = 1.0;
  std::uint64_t trace_seed = 11;
  gen_trace->add_option("--kind", kind, "piecewise|azure_like");
  gen_trace->add_option("--levels", levels)->delimiter(',');
  gen_trace->add_option("--dwell", dwell);
  gen_trace->add_option("--duration", duration);
  gen_trace->add_option("--bucket", bucket);
  gen_trace->add_option("--seed", trace_seed);
  gen_trace->add_option("--scale", scale)->check(CLI::PositiveNumber);
  gen_trace->add_option("--out", trace_out, "file (default stdout)");

  auto* gen_prompts = app.add_subcommand("gen-prompts", "write a labeled prompt file");
  std::size_t n_prompts = 600;
  std::uint64_t prompt_seed = 7;
  std::string prompts_out;
  gen_prompts->add_option("--count", n_prompts);
  gen_prompts->add_option("--seed", prompt_seed);
  gen_prompts->add_option("--out", prompts_out)->required();

  auto* tune = app.add_subcommand("tune-router", "grid-search router weights");
  std::string tune_prompts, tune_lexicon;
  std::vector<double> grid_values{0.0, 1.0, 2.0};
  bool tq = false;
  tune->add_option("--prompts", tune_prompts, "labeled prompt file")
      ->required()
      ->check(CLI::ExistingFile);
  tune->add_option("--lexicon", tune_lexicon)->check(CLI::ExistingDirectory);
  tune->add_option("--grid", grid_values, "per-feature weight values")->delimiter(',');
  tune->add_flag("--quiet", tq);

  auto* export_lex = app.add_subcommand("export-lexicon", "write the built-in lexicon");
  std::string lex_out;
  export_lex->add_option("--out", lex_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*profile) return cmd_profile(c);
    if (*plan) return cmd_plan(c, lambda, queues);
    if (*simulate) return cmd_simulate(c);
    if (*compare) return cmd_compare(c, configs);
    if (*sweep) return cmd_sweep(c, multipliers);
    if (*recompute) return cmd_recompute(audit_path, summary_path, rq);
    if (*frontier) return cmd_frontier(c, sigma);
    if (*gen_trace) {
      return cmd_gen_trace(kind, levels, dwell, duration, bucket, trace_seed, scale, trace_out);
    }
    if (*gen_prompts) return cmd_gen_prompts(n_prompts, prompt_seed, prompts_out);
    if (*tune) return cmd_tune_router(tune_prompts, grid_values, tune_lexicon, tq);
    if (*export_lex) {
      save_lexicon(default_lexicon(), lex_out);
      return 0;
    }
  } catch (const Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    static const std::set<std::string> config_codes{
        "config",          "provenance-mismatch", "invalid-scenario", "invalid-catalog",
        "empty-catalog",   "invalid-policy",      "invalid-planner",  "invalid-trace",
        "invalid-workload", "invalid-lexicon",    "invalid-prompts",  "invalid-table",
        "invalid-weights", "unknown-model",       "mismatched-traces", "need-2-variants",
        "need-3-variants", "invalid-grid"};
    const bool config = config_codes.count(e.code()) > 0;
    return config ? 1 : 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 2;
  }
  return 0;
}

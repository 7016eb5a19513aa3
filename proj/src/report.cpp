#include "hadis/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>

#include "hadis/error.hpp"

namespace hadis {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error("io", "cannot write " + p.string());
  out << body;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto i = static_cast<std::size_t>(q * static_cast<double>(v.size() - 1) + 0.5);
  return v[std::min(i, v.size() - 1)];
}

double ratio(double a, double b) {
  if (b == 0.0) return a == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return a / b;
}

}  // namespace

OutputHeader header_for(const Scenario& s) {
  return {s.config_hash, s.sim.seed, kVersion};
}

json header_json(const OutputHeader& h) {
  return {{"config_hash", h.config_hash}, {"seed", h.seed}, {"version", h.version}};
}

json summary_document(const RunSummary& s, const OutputHeader& h) {
  return {{"header", header_json(h)}, {"summary", summary_to_json(s)}};
}

json timing_document(const SimResult& r, double wall_s, const OutputHeader& h) {
  double max = 0.0;
  for (double v : r.solve_ms) max = std::max(max, v);
  return {{"header", header_json(h)},
          {"wall_s", wall_s},
          {"solve_calls", r.solve_ms.size()},
          {"solve_ms_median", quantile(r.solve_ms, 0.5)},
          {"solve_ms_p95", quantile(r.solve_ms, 0.95)},
          {"solve_ms_max", max}};
}

RunFiles write_run_outputs(const Scenario& s, const SimResult& r, double wall_s,
                           const std::string& dir) {
  fs::create_directories(dir);
  const auto h = header_for(s);
  const fs::path d(dir);
  RunFiles f{(d / "metrics.csv").string(), (d / "summary.json").string(),
             (d / "audit.jsonl").string(), (d / "timing.json").string()};
  {
    std::ofstream out(f.metrics, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + f.metrics);
    write_metrics_csv(r.metrics, h, out);
  }
  {
    std::ofstream out(f.audit, std::ios::binary);
    if (!out) throw Error("io", "cannot write " + f.audit);
    write_audit_log(r.queries, r.plans, h, out);
  }
  write_file(f.summary, summary_document(r.summary, h).dump(2) + "\n");
  write_file(f.timing, timing_document(r, wall_s, h).dump(2) + "\n");
  return f;
}

void check_comparable(const std::vector<const Scenario*>& runs) {
  if (runs.size() < 2) throw Error("config", "compare needs at least 2 configs");
  const Scenario& a = *runs.front();
  for (std::size_t i = 1; i < runs.size(); ++i) {
    const Scenario& b = *runs[i];
    bool same = a.sim.seed == b.sim.seed &&
                a.trace.buckets.size() == b.trace.buckets.size() &&
                a.trace.duration_s == b.trace.duration_s;
    for (std::size_t k = 0; same && k < a.trace.buckets.size(); ++k) {
      same = a.trace.buckets[k].start_s == b.trace.buckets[k].start_s &&
             a.trace.buckets[k].qps == b.trace.buckets[k].qps;
    }
    if (!same) {
      throw Error("mismatched-traces",
                  fmt::format("config {} differs from config 0 in trace or seed", i));
    }
  }
}

std::string format_comparison(const std::vector<CompareEntry>& entries) {
  std::size_t w = 6;
  for (const auto& e : entries) w = std::max(w, e.label.size());
  std::string out = fmt::format("{:<{}}  {:>10}  {:>10}  {:>9}  {:>8}  {:>9}  {:>9}\n",
                                "config", w, "avg_fid", "violation", "admitted",
                                "changes", "fid/ref", "viol/ref");
  const auto& ref = entries.front().summary;
  for (const auto& e : entries) {
    const auto& s = e.summary;
    out += fmt::format("{:<{}}  {:>10.4f}  {:>10.5f}  {:>9}  {:>8}  {:>9.4f}  {:>9.4f}\n",
                       e.label, w, s.avg_fid, s.slo_violation_ratio, s.admitted,
                       s.plan_changes, ratio(s.avg_fid, ref.avg_fid),
                       ratio(s.slo_violation_ratio, ref.slo_violation_ratio));
  }
  return out;
}

std::vector<SweepRow> run_sweep(const json& config, const std::string& base_dir,
                                const ScenarioOverrides& ov,
                                const std::vector<double>& multipliers) {
  if (multipliers.empty()) throw Error("config", "sweep needs at least one multiplier");
  for (double m : multipliers) {
    if (!(m > 0.0)) throw Error("config", fmt::format("multiplier {} must be > 0", m));
  }
  std::vector<SweepRow> rows;
  for (double m : multipliers) {
    ScenarioOverrides o = ov;
    o.slo_multiplier = m;
    auto s = build_scenario(config, base_dir, o);
    const auto r = run_simulation(s->sim);
    rows.push_back({m, r.summary.avg_fid, r.summary.slo_violation_ratio});
  }
  return rows;
}

std::string format_sweep(const std::vector<SweepRow>& rows) {
  std::string out = "multiplier,avg_fid,slo_violation_ratio\n";
  for (const auto& r : rows) out += fmt::format("{},{:.6f},{:.6f}\n", r.multiplier, r.fid, r.violation);
  return out;
}

std::vector<std::string> summary_diff(const RunSummary& a, const RunSummary& b) {
  std::vector<std::string> d;
  auto cmp = [&](const char* name, const auto& x, const auto& y) {
    if (!(x == y)) d.push_back(name);
  };
  cmp("admitted", a.admitted, b.admitted);
  cmp("served", a.served, b.served);
  cmp("dropped", a.dropped, b.dropped);
  cmp("timed_out", a.timed_out, b.timed_out);
  cmp("avg_fid", a.avg_fid, b.avg_fid);
  cmp("slo_violation_ratio", a.slo_violation_ratio, b.slo_violation_ratio);
  cmp("served_by_model", a.served_by_model, b.served_by_model);
  cmp("plan_changes", a.plan_changes, b.plan_changes);
  cmp("plans_computed", a.plans_computed, b.plans_computed);
  cmp("infeasible_plans", a.infeasible_plans, b.infeasible_plans);
  cmp("invalid_plans", a.invalid_plans, b.invalid_plans);
  cmp("role_starved", a.role_starved, b.role_starved);
  cmp("swaps", a.swaps, b.swaps);
  cmp("cache_hits", a.cache_hits, b.cache_hits);
  cmp("cache_misses", a.cache_misses, b.cache_misses);
  return d;
}

RunSummary summary_from_json(const json& j) {
  const json& s = j.contains("summary") ? j.at("summary") : j;
  RunSummary r;
  r.admitted = s.at("admitted").get<std::size_t>();
  r.served = s.at("served").get<std::size_t>();
  r.dropped = s.at("dropped").get<std::size_t>();
  r.timed_out = s.at("timed_out").get<std::size_t>();
  r.avg_fid = s.at("avg_fid").get<double>();
  r.slo_violation_ratio = s.at("slo_violation_ratio").get<double>();
  r.served_by_model = s.at("served_by_model").get<std::map<std::string, std::size_t>>();
  r.plan_changes = s.at("plan_changes").get<std::size_t>();
  r.plans_computed = s.at("plans_computed").get<std::size_t>();
  r.infeasible_plans = s.at("infeasible_plans").get<std::size_t>();
  r.invalid_plans = s.at("invalid_plans").get<std::size_t>();
  r.role_starved = s.at("role_starved").get<std::size_t>();
  r.swaps = s.at("swaps").get<std::size_t>();
  r.cache_hits = s.at("cache_hits").get<std::size_t>();
  r.cache_misses = s.at("cache_misses").get<std::size_t>();
  return r;
}

}  // namespace hadis

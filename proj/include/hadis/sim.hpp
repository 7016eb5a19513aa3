#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hadis/catalog.hpp"
#include "hadis/planner.hpp"
#include "hadis/profiler.hpp"
#include "hadis/prompt.hpp"
#include "hadis/workload.hpp"
#include "json.hpp"

namespace hadis {

enum class RoutingPolicy { kHybrid, kRouterOnly, kDiscriminatorOnly, kRandom };

enum class PlannerKind {
  kHadis,
  kCacheD,
  kCacheDQ,
  kClipperLight,
  kClipperHeavy,
  kProteus,
  kDiffServe,
  kFixed,
};

const char* policy_name(RoutingPolicy p);
const char* planner_name(PlannerKind k);
RoutingPolicy parse_policy(const std::string& s);  // Error("invalid-policy")
PlannerKind parse_planner(const std::string& s);   // Error("invalid-planner")

struct SimConfig {
  const Catalog* catalog = nullptr;
  const LookupTable* table = nullptr;
  const LookupTable* diffserve_table = nullptr;  // required for kDiffServe
  const PromptPopulation* prompts = nullptr;
  std::vector<Arrival> arrivals;

  RoutingPolicy policy = RoutingPolicy::kHybrid;
  PlannerKind planner = PlannerKind::kHadis;
  std::optional<Plan> fixed_plan;  // for kFixed

  int workers = 16;
  double t_slo = 60.0;
  double alpha = 1.5;
  double lambda_floor = 0.01;
  double ewma_weight = 0.3;
  double initial_demand = 0.0;
  double epoch_s = 5.0;
  double solver_delay_s = 0.03;
  double swap_delay_s = 2.0;
  double router_s = 0.005;
  double discriminator_s = 0.007;
  double noise_sigma = 0.05;
  double bucket_s = 10.0;
  double cache_demand_bin = 10.0;
  double cache_queue_bin = 50.0;
  double spare_horizon_s = 30.0;
  double duration_s = 0.0;  // metrics cover at least this long
  std::uint64_t seed = 0;
};

// Admission-time drop rule: the queue ahead plus one batch overruns the
// deadline. lambda_i is the per-worker arrival rate.
bool predict_miss(double now, long queue_ahead, double lambda_i, double alpha,
                  double floor, double service_s, double deadline_t);

// Throws Error("invalid-scenario") listing every problem.
void validate_sim_config(const SimConfig& cfg);

// Rows a planner kind searches over.
std::vector<ConfigRow> planner_rows(PlannerKind kind, const Catalog& catalog,
                                    const LookupTable& table,
                                    const LookupTable* diffserve_table);

enum class Outcome { kPending, kServed, kDropped, kTimedOut };
const char* outcome_name(Outcome o);

struct PathStep {
  std::string model;
  int worker = -1;
  double enqueue_t = 0.0;
  double start_t = 0.0;
  double finish_t = 0.0;
};

struct QueryRecord {
  std::size_t id = 0;
  std::size_t prompt = 0;
  double hardness = 0.0;
  double arrival_t = 0.0;
  double deadline_t = 0.0;
  std::vector<PathStep> path;
  Outcome outcome = Outcome::kPending;
  std::string served_model;
  double quality_cost = 0.0;
  double completion_t = 0.0;
  bool bypassed = false;
  bool rerouted = false;
  bool heavy_routed = false;
  bool role_starved = false;
};

struct MetricsBucket {
  double start_s = 0.0;
  double demand_qps = 0.0;
  std::vector<double> processed_qps;  // per catalog model
  std::optional<double> fid;          // none when nothing was served
  double slo_violation_ratio = 0.0;
  std::vector<double> workers;        // time-weighted, per catalog model
  double heavy_workers = 0.0;         // time-weighted heavy-role count
  double heavy_route_ratio = 0.0;
  std::vector<double> queues;         // heartbeat mean, per catalog model
  std::size_t arrivals = 0;
  std::size_t violations = 0;
};

struct MetricsSeries {
  std::vector<std::string> models;
  double bucket_s = 10.0;
  std::vector<MetricsBucket> buckets;
};

struct PlanEvent {
  double computed_t = 0.0;
  double applied_t = 0.0;
  double lambda = 0.0;
  std::map<std::string, long> queues;  // planner input snapshot
  Plan plan;
  std::map<std::string, int> allocation;  // after spare distribution
  int swaps = 0;
  std::optional<bool> cache_hit;  // cache planners only
  std::vector<std::string> validation_errors;
};

struct RunSummary {
  std::size_t admitted = 0;
  std::size_t served = 0;
  std::size_t dropped = 0;
  std::size_t timed_out = 0;
  double avg_fid = 0.0;  // over served queries
  double slo_violation_ratio = 0.0;
  std::map<std::string, std::size_t> served_by_model;
  std::size_t plan_changes = 0;
  std::size_t plans_computed = 0;
  std::size_t infeasible_plans = 0;
  std::size_t invalid_plans = 0;  // feasible plans failing validation
  std::size_t role_starved = 0;
  std::size_t swaps = 0;
  std::size_t cache_hits = 0;
  std::size_t cache_misses = 0;
};

struct SimResult {
  std::vector<QueryRecord> queries;
  MetricsSeries metrics;
  std::vector<PlanEvent> plans;
  RunSummary summary;
  std::vector<double> solve_ms;  // wall time per planner call
  double end_t = 0.0;
};

SimResult run_simulation(const SimConfig& cfg);

// Recomputes the summary from the query log and plan history alone.
RunSummary summarize(const std::vector<QueryRecord>& queries,
                     const std::vector<PlanEvent>& plans);

nlohmann::json summary_to_json(const RunSummary& s);
nlohmann::json query_to_json(const QueryRecord& q);
QueryRecord query_from_json(const nlohmann::json& j);

struct OutputHeader {
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version;
};

void write_metrics_csv(const MetricsSeries& m, const OutputHeader& h,
                       std::ostream& out);
// Plan records omit wall-clock solve times so logs stay reproducible.
nlohmann::json plan_event_to_json(const PlanEvent& e);
PlanEvent plan_event_from_json(const nlohmann::json& j);

struct AuditLog {
  std::optional<OutputHeader> header;
  std::vector<QueryRecord> queries;
  std::vector<PlanEvent> plans;
};

// JSONL: one header record, then plan and query records.
void write_audit_log(const std::vector<QueryRecord>& queries,
                     const std::vector<PlanEvent>& plans, const OutputHeader& h,
                     std::ostream& out);
AuditLog read_audit_log(std::istream& in);

}  // namespace hadis

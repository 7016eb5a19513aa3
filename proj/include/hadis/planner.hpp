#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hadis/catalog.hpp"
#include "hadis/profiler.hpp"
#include "json.hpp"

namespace hadis {

inline constexpr double kPlanSlack = 1e-9;

struct PlannerInput {
  std::span<const ConfigRow> rows;
  const Catalog* catalog = nullptr;
  double lambda = 0.0;     // queries/s
  int workers = 1;         // budget S
  double t_slo = 1.0;      // seconds
  std::map<std::string, long> queues;  // model id -> queued queries
  double alpha = 1.5;
  double lambda_floor = 0.01;
};

struct Plan {
  std::size_t row_index = 0;
  ConfigRow row;
  std::map<std::string, int> workers;  // model id -> x_i
  std::map<std::string, int> batch;    // model id -> b
  double objective = 0.0;              // fid of the chosen row
  double path_latency = 0.0;           // sum of batch latency + queue delay
  int total_workers = 0;
  bool feasible = true;
  double solve_ms = 0.0;  // wall time, informational only

  // (F, total workers, path latency, row index, batches in route order).
  struct Key {
    double objective;
    int total_workers;
    double path_latency;
    std::size_t row_index;
    std::vector<int> batches;
    auto operator<=>(const Key&) const = default;
  };
  Key key() const;
  bool same_allocation(const Plan& other) const;
};

// alpha * Q / max(lambda_i, floor); zero for an empty queue.
double queue_delay(long queue, double lambda_i, double alpha, double floor);

// Exact search over rows x batch combinations with minimal worker counts.
// Throws Error("empty-table") when there are no rows.
Plan solve(const PlannerInput& in);

// Enumerates every worker split as well. Throws Error("oracle-too-large")
// beyond 200 rows, S > 16 or more than 5 batch sizes.
Plan brute_force_solve(const PlannerInput& in);

// Highest-capacity plan at full budget, used when nothing is feasible.
Plan infeasible_fallback(const PlannerInput& in);

// Independent check of budget, capacity and latency constraints. Returns the
// list of violations; empty means the plan is valid.
std::vector<std::string> validate_plan(const Plan& plan, const PlannerInput& in);

struct DemandEstimator {
  double weight = 0.3;
  double estimate = 0.0;

  double update(double observed_qps);
};

enum class CacheMode { kDemand, kDemandQueue };

class PlanCache {
 public:
  PlanCache(CacheMode mode, double demand_bin, double queue_bin);

  using Solver = std::function<Plan(const PlannerInput&)>;
  Plan get(const PlannerInput& in, const Solver& solver);

  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }
  std::pair<long, long> key_for(const PlannerInput& in) const;

 private:
  CacheMode mode_;
  double demand_bin_;
  double queue_bin_;
  std::map<std::pair<long, long>, Plan> plans_;
  std::size_t hits_ = 0;
  std::size_t misses_ = 0;
};

enum class BaselineKind { kClipperLight, kClipperHeavy, kProteus, kDiffServe };

// All workers on one model, with the smallest latency-feasible batch that
// covers demand.
Plan clipper_plan(const ConfigRow& single_row, const PlannerInput& in);

// Proteus solves over single-model rows; DiffServe over the fixed pair's
// theta = 1 rows. `in.rows` is ignored.
Plan baseline_plan(BaselineKind kind, const PlannerInput& in,
                   const LookupTable& table, const LookupTable* diffserve_table);

nlohmann::json plan_to_json(const Plan& plan);

}  // namespace hadis

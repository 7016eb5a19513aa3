#include "hadis/planner.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "hadis/error.hpp"

namespace hadis {

namespace {

struct Route {
  const ModelVariant* model;
  double share;  // r_{k,i}
};

std::vector<Route> routes_of(const ConfigRow& row, const Catalog& catalog) {
  std::vector<Route> out;
  for (const auto& [id, r] : row.active_routes()) out.push_back({&catalog.at(id), r});
  return out;
}

long queue_of(const PlannerInput& in, const std::string& id) {
  auto it = in.queues.find(id);
  return it == in.queues.end() ? 0 : it->second;
}

double path_latency(const PlannerInput& in, const std::vector<Route>& routes,
                    const std::vector<int>& batches) {
  double total = 0.0;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    total += batch_latency(*routes[i].model, batches[i]) +
             queue_delay(queue_of(in, routes[i].model->id),
                         in.lambda * routes[i].share, in.alpha, in.lambda_floor);
  }
  return total;
}

// Smallest x >= 1 with x * mu >= demand (within slack).
int min_workers(double demand, double mu) {
  double x = std::max(1.0, std::ceil(demand / mu));
  while (x > 1.0 && (x - 1.0) * mu >= demand - kPlanSlack) x -= 1.0;
  while (x * mu < demand - kPlanSlack) x += 1.0;
  return x > 1e9 ? std::numeric_limits<int>::max() : static_cast<int>(x);
}

Plan make_plan(const PlannerInput& in, std::size_t row_index,
               const std::vector<Route>& routes, const std::vector<int>& batches,
               const std::vector<int>& xs, double latency) {
  Plan p;
  p.row_index = row_index;
  p.row = in.rows[row_index];
  p.objective = p.row.fid;
  p.path_latency = latency;
  for (std::size_t i = 0; i < routes.size(); ++i) {
    p.workers[routes[i].model->id] = xs[i];
    p.batch[routes[i].model->id] = batches[i];
    p.total_workers += xs[i];
  }
  return p;
}

// Calls fn(batches) for every batch assignment, last route varying fastest.
template <class Fn>
void for_each_batch_combo(const std::vector<int>& batch_set, std::size_t n, Fn fn) {
  std::vector<std::size_t> idx(n, 0);
  std::vector<int> batches(n);
  while (true) {
    for (std::size_t i = 0; i < n; ++i) batches[i] = batch_set[idx[i]];
    fn(batches);
    std::size_t d = n;
    while (d > 0) {
      --d;
      if (++idx[d] < batch_set.size()) break;
      idx[d] = 0;
      if (d == 0) return;
    }
    if (n == 0) return;
  }
}

void check_input(const PlannerInput& in) {
  if (in.rows.empty()) throw Error("empty-table", "planner needs at least one row");
  if (!in.catalog) throw Error("invalid-input", "planner needs a catalog");
  if (!(in.lambda >= 0.0) || in.workers < 1 || !(in.t_slo > 0.0) || in.alpha < 1.0) {
    throw Error("invalid-input", "need lambda >= 0, S >= 1, T_slo > 0, alpha >= 1");
  }
}

template <class Fn>
Plan timed(Fn fn) {
  const auto t0 = std::chrono::steady_clock::now();
  Plan p = fn();
  p.solve_ms = std::chrono::duration<double, std::milli>(
                   std::chrono::steady_clock::now() - t0)
                   .count();
  return p;
}

}  // namespace

Plan::Key Plan::key() const {
  Key k{objective, total_workers, path_latency, row_index, {}};
  for (const auto& [id, r] : row.active_routes()) {
    auto it = batch.find(id);
    k.batches.push_back(it == batch.end() ? 0 : it->second);
  }
  return k;
}

bool Plan::same_allocation(const Plan& o) const {
  return row == o.row && workers == o.workers && batch == o.batch;
}

double queue_delay(long queue, double lambda_i, double alpha, double floor) {
  if (queue <= 0) return 0.0;
  return alpha * static_cast<double>(queue) / std::max(lambda_i, floor);
}

Plan solve(const PlannerInput& in) {
  return timed([&] {
    check_input(in);
    const auto& batch_set = in.catalog->batch_set();
    std::optional<Plan> best;
    for (std::size_t k = 0; k < in.rows.size(); ++k) {
      const auto routes = routes_of(in.rows[k], *in.catalog);
      if (routes.size() > static_cast<std::size_t>(in.workers)) continue;
      for_each_batch_combo(batch_set, routes.size(), [&](const std::vector<int>& b) {
        std::vector<int> xs;
        long total = 0;
        for (std::size_t i = 0; i < routes.size(); ++i) {
          xs.push_back(min_workers(in.lambda * routes[i].share,
                                   batch_throughput(*routes[i].model, b[i])));
          total += xs.back();
        }
        if (total > in.workers) return;
        const double lat = path_latency(in, routes, b);
        if (lat > in.t_slo + kPlanSlack) return;
        Plan p = make_plan(in, k, routes, b, xs, lat);
        if (!best || p.key() < best->key()) best = std::move(p);
      });
    }
    return best ? *best : infeasible_fallback(in);
  });
}

Plan brute_force_solve(const PlannerInput& in) {
  check_input(in);
  const auto& batch_set = in.catalog->batch_set();
  if (in.rows.size() > 200 || in.workers > 16 || batch_set.size() > 5) {
    throw Error("oracle-too-large",
                fmt::format("{} rows, S={}, {} batch sizes", in.rows.size(),
                            in.workers, batch_set.size()));
  }
  return timed([&] {
    std::optional<Plan> best;
    for (std::size_t k = 0; k < in.rows.size(); ++k) {
      const auto routes = routes_of(in.rows[k], *in.catalog);
      const std::size_t n = routes.size();
      for_each_batch_combo(batch_set, n, [&](const std::vector<int>& b) {
        const double lat = path_latency(in, routes, b);
        if (lat > in.t_slo + kPlanSlack) return;
        // Odometer over x_i in [0, S].
        std::vector<int> xs(n, 0);
        while (true) {
          int total = 0;
          bool ok = true;
          for (std::size_t i = 0; i < n; ++i) {
            total += xs[i];
            if (xs[i] < 1) ok = false;
            if (xs[i] * batch_throughput(*routes[i].model, b[i]) <
                in.lambda * routes[i].share - kPlanSlack) {
              ok = false;
            }
          }
          if (ok && total <= in.workers) {
            Plan p = make_plan(in, k, routes, b, xs, lat);
            if (!best || p.key() < best->key()) best = std::move(p);
          }
          std::size_t d = n;
          bool done = true;
          while (d > 0) {
            --d;
            if (++xs[d] <= in.workers) {
              done = false;
              break;
            }
            xs[d] = 0;
          }
          if (done) break;
        }
      });
    }
    return best ? *best : infeasible_fallback(in);
  });
}

Plan infeasible_fallback(const PlannerInput& in) {
  check_input(in);
  std::optional<Plan> best;
  double best_ratio = -1.0;
  double best_weight = 0.0;
  for (std::size_t k = 0; k < in.rows.size(); ++k) {
    const auto routes = routes_of(in.rows[k], *in.catalog);
    const std::size_t n = routes.size();
    if (n == 0 || n > static_cast<std::size_t>(in.workers)) continue;
    std::vector<int> b(n);
    std::vector<double> mu(n);
    double weight = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      b[i] = in.catalog->batch_set().front();
      for (int cand : in.catalog->batch_set()) {
        if (batch_throughput(*routes[i].model, cand) >
            batch_throughput(*routes[i].model, b[i])) {
          b[i] = cand;
        }
      }
      mu[i] = batch_throughput(*routes[i].model, b[i]);
      weight += single_latency(*routes[i].model);
    }
    auto ratio = [&](std::size_t i, int x) {
      const double demand = in.lambda * routes[i].share;
      return demand > 0.0 ? x * mu[i] / demand
                          : std::numeric_limits<double>::infinity();
    };
    std::vector<int> xs(n, 1);
    for (int spare = in.workers - static_cast<int>(n); spare > 0; --spare) {
      std::size_t low = 0;
      for (std::size_t i = 1; i < n; ++i) {
        if (ratio(i, xs[i]) < ratio(low, xs[low])) low = i;
      }
      ++xs[low];
    }
    double r = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) r = std::min(r, ratio(i, xs[i]));
    const auto& row = in.rows[k];
    bool better = !best || r > best_ratio;
    if (best && r == best_ratio) {
      better = weight < best_weight ||
               (weight == best_weight && row.fid < best->objective);
    }
    if (better) {
      best = make_plan(in, k, routes, b, xs, path_latency(in, routes, b));
      best_ratio = r;
      best_weight = weight;
    }
  }
  if (!best) {
    // Budget smaller than every route set: put everything on the first model.
    const auto routes = routes_of(in.rows[0], *in.catalog);
    std::vector<Route> first(routes.begin(), routes.begin() + 1);
    std::vector<int> b{in.catalog->batch_set().front()};
    best = make_plan(in, 0, first, b, {in.workers}, path_latency(in, first, b));
  }
  best->feasible = false;
  return *best;
}

std::vector<std::string> validate_plan(const Plan& plan, const PlannerInput& in) {
  std::vector<std::string> errs;
  if (!in.catalog) return {"no catalog"};
  if (plan.row_index >= in.rows.size() || !(in.rows[plan.row_index] == plan.row)) {
    errs.push_back("chosen row is not in the table");
  }
  if (plan.objective != plan.row.fid) errs.push_back("objective differs from row fid");
  long total = 0;
  for (const auto& [id, x] : plan.workers) {
    if (x < 0) errs.push_back(fmt::format("negative workers on {}", id));
    total += x;
  }
  if (total > in.workers) {
    errs.push_back(fmt::format("budget: {} workers > S={}", total, in.workers));
  }
  double latency = 0.0;
  for (const auto& [id, share] : plan.row.active_routes()) {
    const ModelVariant* v = in.catalog->find(id);
    if (!v) {
      errs.push_back("unknown model " + id);
      continue;
    }
    auto xit = plan.workers.find(id);
    auto bit = plan.batch.find(id);
    const int x = xit == plan.workers.end() ? 0 : xit->second;
    if (x < 1) errs.push_back(fmt::format("{} carries traffic but has no worker", id));
    if (bit == plan.batch.end() || !v->latency_s.count(bit->second)) {
      errs.push_back(fmt::format("{} has no profiled batch", id));
      continue;
    }
    const double mu = v->throughput_qps.at(bit->second);
    const double demand = in.lambda * share;
    if (x * mu < demand - kPlanSlack) {
      errs.push_back(fmt::format("capacity: {} x {} * {} < {}", id, x, mu, demand));
    }
    const auto qit = in.queues.find(id);
    const double q = qit == in.queues.end() ? 0.0 : static_cast<double>(qit->second);
    latency += v->latency_s.at(bit->second);
    if (q > 0.0) latency += in.alpha * q / std::max(demand, in.lambda_floor);
  }
  if (latency > in.t_slo + kPlanSlack) {
    errs.push_back(fmt::format("latency: path {} > T_slo {}", latency, in.t_slo));
  }
  return errs;
}

double DemandEstimator::update(double observed_qps) {
  estimate = weight * std::max(observed_qps, 0.0) + (1.0 - weight) * estimate;
  return estimate;
}

PlanCache::PlanCache(CacheMode mode, double demand_bin, double queue_bin)
    : mode_(mode), demand_bin_(demand_bin), queue_bin_(queue_bin) {
  if (!(demand_bin > 0.0) || (mode == CacheMode::kDemandQueue && !(queue_bin > 0.0))) {
    throw Error("invalid-cache", "bin widths must be positive");
  }
}

std::pair<long, long> PlanCache::key_for(const PlannerInput& in) const {
  const long d = static_cast<long>(std::floor(in.lambda / demand_bin_));
  if (mode_ == CacheMode::kDemand) return {d, 0};
  long total = 0;
  for (const auto& [id, q] : in.queues) total += q;
  return {d, static_cast<long>(std::floor(static_cast<double>(total) / queue_bin_))};
}

Plan PlanCache::get(const PlannerInput& in, const Solver& solver) {
  const auto key = key_for(in);
  if (auto it = plans_.find(key); it != plans_.end()) {
    ++hits_;
    Plan p = it->second;
    p.solve_ms = 0.0;
    return p;
  }
  ++misses_;
  Plan p = solver(in);
  plans_.emplace(key, p);
  return p;
}

Plan clipper_plan(const ConfigRow& single_row, const PlannerInput& in) {
  const ModelVariant& v = in.catalog->at(single_row.light);
  const std::vector<ConfigRow> rows{single_row};
  PlannerInput local = in;
  local.rows = rows;
  const std::vector<Route> routes{{&v, 1.0}};

  std::optional<int> fits, fastest;
  int best_mu = in.catalog->batch_set().front();
  for (int b : in.catalog->batch_set()) {
    if (batch_throughput(v, b) > batch_throughput(v, best_mu)) best_mu = b;
    if (path_latency(local, routes, {b}) > in.t_slo + kPlanSlack) continue;
    if (!fits && in.workers * batch_throughput(v, b) >= in.lambda - kPlanSlack) fits = b;
    if (!fastest || batch_throughput(v, b) > batch_throughput(v, *fastest)) fastest = b;
  }
  const int b = fits ? *fits : (fastest ? *fastest : best_mu);
  Plan p = make_plan(local, 0, routes, {b}, {in.workers}, path_latency(local, routes, {b}));
  p.feasible = fits.has_value();
  return p;
}

Plan baseline_plan(BaselineKind kind, const PlannerInput& in,
                   const LookupTable& table, const LookupTable* diffserve_table) {
  auto standalone = [&](const ModelVariant& v) -> const ConfigRow& {
    for (const auto& r : table.standalone) {
      if (r.light == v.id) return r;
    }
    throw Error("missing-variant", "no standalone row for " + v.id);
  };
  PlannerInput local = in;
  switch (kind) {
    case BaselineKind::kClipperLight:
      return clipper_plan(standalone(in.catalog->lightest()), in);
    case BaselineKind::kClipperHeavy:
      return clipper_plan(standalone(in.catalog->heaviest()), in);
    case BaselineKind::kProteus:
      local.rows = table.standalone;
      return solve(local);
    case BaselineKind::kDiffServe: {
      if (!diffserve_table) throw Error("missing-variant", "no DiffServe pair table");
      std::vector<ConfigRow> rows;
      for (const auto& r : diffserve_table->rows) {
        if (r.theta == 1.0) rows.push_back(r);
      }
      local.rows = rows;
      return solve(local);
    }
  }
  throw Error("invalid-input", "unknown baseline");
}

nlohmann::json plan_to_json(const Plan& p) {
  return {{"row_index", p.row_index},
          {"row", config_row_to_json(p.row)},
          {"workers", p.workers},
          {"batch", p.batch},
          {"objective", p.objective},
          {"path_latency", p.path_latency},
          {"feasible", p.feasible},
          {"solve_ms", p.solve_ms}};
}

}  // namespace hadis

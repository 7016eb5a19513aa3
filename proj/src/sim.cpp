#include "hadis/sim.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <deque>
#include <istream>
#include <limits>
#include <ostream>
#include <queue>
#include <random>

#include "hadis/error.hpp"
#include "hadis/quality.hpp"
#include "hadis/rng.hpp"

namespace hadis {

namespace {

enum class EventKind : int {
  kArrival = 0,
  kBatchComplete = 1,
  kPlanEpoch = 2,
  kPlanApply = 3,
  kSwapComplete = 4,
};

struct Event {
  double t;
  EventKind kind;
  std::uint64_t seq;
  std::size_t arg;

  bool operator>(const Event& o) const {
    if (t != o.t) return t > o.t;
    if (kind != o.kind) return kind > o.kind;
    return seq > o.seq;
  }
};

struct QueueItem {
  std::size_t qid;
  int stage;  // 0 = first stage, 1 = final stage
  double enqueue_t;
};

struct Batch {
  int model = -1;
  bool light_role = false;
  bool discriminate = false;
  double tau = 0.0;
  std::vector<QueueItem> items;
};

struct Worker {
  int id = 0;
  int model = -1;
  std::deque<QueueItem> queue;
  bool busy = false;
  double busy_until = 0.0;
  double swap_until = 0.0;
  Batch batch;

  std::size_t load() const { return queue.size() + batch.items.size(); }
};

bool uses_discriminator(RoutingPolicy p) { return p != RoutingPolicy::kRouterOnly; }
bool uses_router(RoutingPolicy p) {
  return p == RoutingPolicy::kHybrid || p == RoutingPolicy::kRouterOnly;
}

class Simulator {
 public:
  explicit Simulator(const SimConfig& cfg)
      : cfg_(cfg),
        cat_(*cfg.catalog),
        cache_(cfg.planner == PlannerKind::kCacheDQ ? CacheMode::kDemandQueue
                                                    : CacheMode::kDemand,
               cfg.cache_demand_bin, cfg.cache_queue_bin) {
    const std::size_t m = cat_.size();
    for (const auto& v : cat_.variants()) res_.metrics.models.push_back(v.id);
    res_.metrics.bucket_s = cfg.bucket_s;
    if (cfg.planner != PlannerKind::kFixed) {
      rows_ = planner_rows(cfg.planner, cat_, *cfg.table, cfg.diffserve_table);
    }
    workers_.resize(static_cast<std::size_t>(cfg.workers));
    for (int i = 0; i < cfg.workers; ++i) workers_[i].id = i;
    intake_.assign(m, 0);
    estimator_.weight = cfg.ewma_weight;
    estimator_.estimate = cfg.initial_demand;
    res_.queries.resize(cfg.arrivals.size());
  }

  SimResult run() {
    if (cfg_.arrivals.empty()) {
      finish_metrics(0.0);
      return std::move(res_);
    }
    // Initial plan, applied instantly.
    PlanEvent initial = compute_plan(0.0, cfg_.initial_demand);
    initial.applied_t = 0.0;
    apply_plan(std::move(initial), 0.0, true);

    for (std::size_t i = 0; i < cfg_.arrivals.size(); ++i) {
      const double delay = uses_router(cfg_.policy) ? cfg_.router_s : 0.0;
      push(cfg_.arrivals[i].time + delay, EventKind::kArrival, i);
    }
    push(cfg_.epoch_s, EventKind::kPlanEpoch, 0);

    while (!events_.empty()) {
      const Event e = events_.top();
      events_.pop();
      now_ = e.t;
      switch (e.kind) {
        case EventKind::kArrival: on_arrival(e.arg); break;
        case EventKind::kBatchComplete: on_batch_complete(e.arg); break;
        case EventKind::kPlanEpoch: on_epoch(); break;
        case EventKind::kPlanApply: on_apply(e.arg); break;
        case EventKind::kSwapComplete: try_dispatch(workers_[e.arg]); break;
      }
    }
    finish_metrics(now_);
    res_.summary = summarize(res_.queries, res_.plans);
    return std::move(res_);
  }

 private:
  void push(double t, EventKind kind, std::size_t arg) {
    events_.push({t, kind, seq_++, arg});
  }

  // ---- control path ----

  PlannerInput make_input(double lambda, const std::vector<ConfigRow>& rows) const {
    PlannerInput in;
    in.rows = rows;
    in.catalog = &cat_;
    in.lambda = lambda;
    in.workers = cfg_.workers;
    in.t_slo = cfg_.t_slo;
    in.alpha = cfg_.alpha;
    in.lambda_floor = cfg_.lambda_floor;
    for (std::size_t m = 0; m < cat_.size(); ++m) {
      in.queues[cat_.variants()[m].id] = static_cast<long>(queued_on(static_cast<int>(m)));
    }
    return in;
  }

  PlanEvent compute_plan(double now, double lambda) {
    PlanEvent ev;
    ev.computed_t = now;
    ev.lambda = lambda;
    if (cfg_.planner == PlannerKind::kFixed) {
      ev.plan = *cfg_.fixed_plan;
      return ev;
    }
    const PlannerInput in = make_input(lambda, rows_);
    ev.queues = in.queues;
    switch (cfg_.planner) {
      case PlannerKind::kHadis:
      case PlannerKind::kProteus:
      case PlannerKind::kDiffServe:
        ev.plan = solve(in);
        break;
      case PlannerKind::kCacheD:
      case PlannerKind::kCacheDQ: {
        const std::size_t before = cache_.misses();
        ev.plan = cache_.get(in, [](const PlannerInput& x) { return solve(x); });
        ev.cache_hit = cache_.misses() == before;
        break;
      }
      case PlannerKind::kClipperLight:
      case PlannerKind::kClipperHeavy:
        ev.plan = clipper_plan(rows_.front(), in);
        break;
      case PlannerKind::kFixed:
        break;
    }
    res_.solve_ms.push_back(ev.plan.solve_ms);
    if (ev.plan.feasible && !ev.cache_hit.value_or(false)) ev.validation_errors = validate_plan(ev.plan, in);
    return ev;
  }

  void on_epoch() {
    const double observed =
        static_cast<double>(arrived_since_epoch_) / cfg_.epoch_s;
    arrived_since_epoch_ = 0;
    const double lambda = estimator_.update(observed);
    snapshot_queues();
    intake_rate_.assign(cat_.size(), 0.0);
    for (std::size_t m = 0; m < cat_.size(); ++m) {
      intake_rate_[m] = static_cast<double>(intake_[m]) / cfg_.epoch_s;
      intake_[m] = 0;
    }
    pending_.push_back(compute_plan(now_, lambda));
    push(now_ + cfg_.solver_delay_s, EventKind::kPlanApply, pending_.size() - 1);
    if (next_arrival_ < cfg_.arrivals.size() || finalized_ < admitted_) {
      push(now_ + cfg_.epoch_s, EventKind::kPlanEpoch, 0);
    }
  }

  void on_apply(std::size_t idx) {
    PlanEvent ev = std::move(pending_[idx]);
    ev.applied_t = now_;
    apply_plan(std::move(ev), now_, false);
  }

  int model_index(const std::string& id) const {
    return static_cast<int>(cat_.index_of(id));
  }

  std::map<std::string, int> allocate(const Plan& plan, double lambda) const {
    std::map<std::string, int> alloc = plan.workers;
    int used = 0;
    for (const auto& [id, x] : alloc) used += x;
    const auto routes = plan.row.active_routes();
    if (routes.empty()) return alloc;
    for (int spare = cfg_.workers - used; spare > 0; --spare) {
      std::size_t pick = 0;
      double best = -1.0;
      for (std::size_t i = 0; i < routes.size(); ++i) {
        const auto& [id, share] = routes[i];
        const int m = model_index(id);
        const double intake = m < static_cast<int>(intake_rate_.size())
                                  ? intake_rate_[m]
                                  : 0.0;
        const double need = std::max(lambda * share, intake) +
                            static_cast<double>(queued_on(m)) / cfg_.spare_horizon_s;
        const auto bit = plan.batch.find(id);
        const int b = bit == plan.batch.end() ? cat_.batch_set().front() : bit->second;
        const double cap = alloc[id] * batch_throughput(cat_.variants()[m], b);
        const double pressure = cap > 0.0 ? need / cap : std::numeric_limits<double>::infinity();
        if (pressure > best) {
          best = pressure;
          pick = i;
        }
      }
      ++alloc[routes[pick].first];
    }
    return alloc;
  }

  void apply_plan(PlanEvent ev, double now, bool initial) {
    accumulate_workers(now);
    ev.allocation = allocate(ev.plan, ev.lambda);
    std::vector<int> target(cat_.size(), 0);
    for (const auto& [id, x] : ev.allocation) target[model_index(id)] += x;

    if (initial) {
      int w = 0;
      for (std::size_t m = 0; m < cat_.size(); ++m) {
        for (int k = 0; k < target[m]; ++k) workers_[w++].model = static_cast<int>(m);
      }
    } else {
      std::vector<int> current(cat_.size(), 0);
      for (const auto& w : workers_) {
        if (w.model >= 0) ++current[w.model];
      }
      // Least-loaded surplus workers move first.
      std::vector<Worker*> movers;
      for (std::size_t m = 0; m < cat_.size(); ++m) {
        int surplus = current[m] - target[m];
        if (surplus <= 0) continue;
        std::vector<Worker*> hosts;
        for (auto& w : workers_) {
          if (w.model == static_cast<int>(m)) hosts.push_back(&w);
        }
        std::stable_sort(hosts.begin(), hosts.end(), [](Worker* a, Worker* b) {
          return a->load() < b->load();
        });
        for (int k = 0; k < surplus; ++k) movers.push_back(hosts[k]);
      }
      for (auto& w : workers_) {
        if (w.model < 0) movers.push_back(&w);
      }
      std::sort(movers.begin(), movers.end(),
                [](Worker* a, Worker* b) { return a->id < b->id; });
      std::size_t next = 0;
      std::vector<QueueItem> displaced;
      for (std::size_t m = 0; m < cat_.size(); ++m) {
        for (int k = current[m]; k < target[m] && next < movers.size(); ++k) {
          Worker& w = *movers[next++];
          w.model = static_cast<int>(m);
          w.swap_until = std::max(now, w.busy ? w.busy_until : now) + cfg_.swap_delay_s;
          push(w.swap_until, EventKind::kSwapComplete, static_cast<std::size_t>(w.id));
          displaced.insert(displaced.end(), w.queue.begin(), w.queue.end());
          w.queue.clear();
          ++ev.swaps;
        }
      }
      plan_ = ev.plan;
      plan_lambda_ = ev.lambda;
      for (const auto& item : displaced) {
        if (item.stage == 0) {
          route_first_stage(item.qid, now);
        } else {
          enqueue(item.qid, model_index(plan_.row.heavy), 1, now);
        }
      }
    }
    plan_ = ev.plan;
    plan_lambda_ = ev.lambda;
    res_.plans.push_back(std::move(ev));
    for (auto& w : workers_) try_dispatch(w);
  }

  // ---- data path ----

  std::size_t queued_on(int model) const {
    std::size_t n = 0;
    for (const auto& w : workers_) {
      if (w.model == model) n += w.queue.size();
    }
    return n;
  }

  int hosts_of(int model) const {
    int n = 0;
    for (const auto& w : workers_) n += w.model == model ? 1 : 0;
    return n;
  }

  double route_share(int model) const {
    for (const auto& [id, share] : plan_.row.active_routes()) {
      if (model_index(id) == model) return share;
    }
    return 0.0;
  }

  int plan_batch(int model) const {
    auto it = plan_.batch.find(cat_.variants()[model].id);
    return it == plan_.batch.end() ? cat_.batch_set().front() : it->second;
  }

  Worker* least_loaded(int model) {
    Worker* best = nullptr;
    for (auto& w : workers_) {
      if (w.model != model) continue;
      if (!best) {
        best = &w;
        continue;
      }
      const bool ws = w.swap_until > now_, bs = best->swap_until > now_;
      if (ws != bs) {
        if (!ws) best = &w;
      } else if (w.load() < best->load()) {
        best = &w;
      }
    }
    return best;
  }

  void on_arrival(std::size_t i) {
    const auto& a = cfg_.arrivals[i];
    next_arrival_ = i + 1;
    ++admitted_;
    ++arrived_since_epoch_;
    QueryRecord& q = res_.queries[i];
    q.id = i;
    q.prompt = a.prompt;
    q.hardness = (*cfg_.prompts)[a.prompt].hardness;
    q.arrival_t = a.time;
    q.deadline_t = a.time + cfg_.t_slo;
    route_first_stage(i, now_);
  }

  void route_first_stage(std::size_t qid, double now) {
    QueryRecord& q = res_.queries[qid];
    const ConfigRow& row = plan_.row;
    const int light = model_index(row.light);
    if (row.single_model()) {
      enqueue(qid, light, 0, now);
      return;
    }
    bool bypass = false;
    switch (cfg_.policy) {
      case RoutingPolicy::kHybrid:
      case RoutingPolicy::kRouterOnly:
        bypass = route_decision(q.hardness, row.theta) == RouteDecision::kBypassToHeavy;
        break;
      case RoutingPolicy::kDiscriminatorOnly:
        bypass = false;
        break;
      case RoutingPolicy::kRandom: {
        auto rng = make_stream(cfg_.seed, qid, StreamTag::kRandomPolicy);
        bypass = std::uniform_real_distribution<double>(0.0, 1.0)(rng) <
                 row.bypass_fraction;
        break;
      }
    }
    if (bypass) {
      q.bypassed = true;
      q.heavy_routed = true;
      enqueue(qid, model_index(row.heavy), 1, now);
    } else {
      enqueue(qid, light, 0, now);
    }
  }

  void enqueue(std::size_t qid, int model, int stage, double now) {
    QueryRecord& q = res_.queries[qid];
    Worker* w = least_loaded(model);
    if (!w) {
      q.role_starved = true;
      const int other = model == model_index(plan_.row.light)
                            ? model_index(plan_.row.heavy)
                            : model_index(plan_.row.light);
      w = least_loaded(other);
      if (!w) {
        for (auto& cand : workers_) {
          if (!w || cand.load() < w->load()) w = &cand;
        }
      }
    }
    const int hosted = w->model;
    // Proactive drop when the queue ahead cannot clear before the deadline.
    const double share = route_share(hosted);
    const int hosts = std::max(hosts_of(hosted), 1);
    const double service = batch_latency(cat_.variants()[hosted], plan_batch(hosted));
    if (predict_miss(now, static_cast<long>(w->queue.size()), plan_lambda_ * share / hosts,
                     cfg_.alpha, cfg_.lambda_floor, service, q.deadline_t)) {
      finalize(qid, Outcome::kDropped, -1, now);
      return;
    }
    ++intake_[hosted];
    w->queue.push_back({qid, stage, now});
    try_dispatch(*w);
  }

  void try_dispatch(Worker& w) {
    if (w.busy || w.queue.empty() || now_ < w.swap_until) return;
    const int model = w.model;
    const auto& v = cat_.variants()[model];
    const int b = plan_batch(model);
    const std::size_t count = std::min(static_cast<std::size_t>(b), w.queue.size());
    Batch batch;
    batch.model = model;
    batch.light_role = !plan_.row.single_model() && model == model_index(plan_.row.light);
    batch.tau = plan_.row.tau;
    for (std::size_t k = 0; k < count; ++k) {
      batch.items.push_back(w.queue.front());
      w.queue.pop_front();
      if (batch.items.back().stage == 0) batch.discriminate = true;
    }
    batch.discriminate =
        batch.discriminate && batch.light_role && uses_discriminator(cfg_.policy);
    double latency = partial_batch_latency(v, static_cast<int>(count));
    if (batch.discriminate) latency += cfg_.discriminator_s;
    for (const auto& item : batch.items) {
      res_.queries[item.qid].path.push_back(
          {v.id, w.id, item.enqueue_t, now_, now_ + latency});
    }
    w.busy = true;
    w.busy_until = now_ + latency;
    w.batch = std::move(batch);
    push(w.busy_until, EventKind::kBatchComplete, static_cast<std::size_t>(w.id));
  }

  void on_batch_complete(std::size_t wid) {
    Worker& w = workers_[wid];
    Batch batch = std::move(w.batch);
    w.batch = {};
    w.busy = false;
    const auto& v = cat_.variants()[batch.model];
    for (const auto& item : batch.items) {
      processed_.push_back({now_, batch.model});
      QueryRecord& q = res_.queries[item.qid];
      if (item.stage == 0 && batch.discriminate) {
        double score = 0.0;
        if (cfg_.policy == RoutingPolicy::kRandom) {
          auto rng = make_stream(cfg_.seed, item.qid, StreamTag::kRandomPolicy);
          rng.discard(1);
          score = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
        } else {
          score = discriminator_score(v, q.hardness, cfg_.noise_sigma, cfg_.seed, item.qid);
        }
        const int heavy = model_index(plan_.row.heavy);
        if (!accept(score, batch.tau) && heavy != batch.model) {
          q.rerouted = true;
          q.heavy_routed = true;
          enqueue(item.qid, heavy, 1, now_);
          continue;
        }
      }
      finalize(item.qid, Outcome::kServed, batch.model, now_);
    }
    try_dispatch(w);
  }

  void finalize(std::size_t qid, Outcome outcome, int model, double now) {
    QueryRecord& q = res_.queries[qid];
    q.completion_t = now;
    if (outcome == Outcome::kServed && now > q.deadline_t) outcome = Outcome::kTimedOut;
    q.outcome = outcome;
    if (model >= 0) {
      const auto& v = cat_.variants()[model];
      q.served_model = v.id;
      q.quality_cost = query_quality_cost(v, q.hardness);
    }
    ++finalized_;
  }

  // ---- metrics ----

  std::size_t bucket_of(double t) const {
    return static_cast<std::size_t>(std::max(0.0, std::floor(t / cfg_.bucket_s)));
  }

  MetricsBucket& bucket(std::size_t i) {
    auto& b = res_.metrics.buckets;
    while (b.size() <= i) {
      MetricsBucket mb;
      mb.start_s = static_cast<double>(b.size()) * cfg_.bucket_s;
      mb.processed_qps.assign(cat_.size(), 0.0);
      mb.workers.assign(cat_.size(), 0.0);
      mb.queues.assign(cat_.size(), 0.0);
      b.push_back(std::move(mb));
    }
    return b[i];
  }

  void accumulate_workers(double until) {
    if (until <= worker_clock_) return;
    std::vector<int> count(cat_.size(), 0);
    int heavy = 0;
    const int heavy_model =
        plan_.row.single_model() || plan_.row.heavy.empty() ? -1 : model_index(plan_.row.heavy);
    for (const auto& w : workers_) {
      if (w.model >= 0) ++count[w.model];
      if (w.model >= 0 && w.model == heavy_model) ++heavy;
    }
    double t = worker_clock_;
    while (t < until) {
      const std::size_t bi = bucket_of(t);
      const double edge = std::min(until, static_cast<double>(bi + 1) * cfg_.bucket_s);
      auto& mb = bucket(bi);
      const double dt = edge - t;
      for (std::size_t m = 0; m < cat_.size(); ++m) mb.workers[m] += count[m] * dt;
      mb.heavy_workers += heavy * dt;
      if (edge <= t) break;
      t = edge;
    }
    worker_clock_ = until;
  }

  void snapshot_queues() {
    auto& mb = bucket(bucket_of(now_));
    for (std::size_t m = 0; m < cat_.size(); ++m) {
      mb.queues[m] += static_cast<double>(queued_on(static_cast<int>(m)));
    }
    ++heartbeats_[bucket_of(now_)];
  }

  void finish_metrics(double end) {
    res_.end_t = end;
    const double horizon = std::max(end, cfg_.duration_s);
    if (horizon <= 0.0) return;
    const std::size_t n = static_cast<std::size_t>(std::ceil(horizon / cfg_.bucket_s));
    if (n > 0) bucket(n - 1);
    accumulate_workers(static_cast<double>(n) * cfg_.bucket_s);
    auto& buckets = res_.metrics.buckets;
    std::vector<double> fid_sum(buckets.size(), 0.0);
    std::vector<std::size_t> served(buckets.size(), 0), heavy(buckets.size(), 0);
    for (const auto& q : res_.queries) {
      const std::size_t bi = bucket_of(q.arrival_t);
      if (bi >= buckets.size()) continue;
      auto& mb = buckets[bi];
      ++mb.arrivals;
      if (q.outcome == Outcome::kDropped || q.outcome == Outcome::kTimedOut) ++mb.violations;
      if (q.outcome == Outcome::kServed) {
        fid_sum[bi] += q.quality_cost;
        ++served[bi];
      }
      if (q.heavy_routed) ++heavy[bi];
    }
    for (const auto& [t, m] : processed_) {
      const std::size_t bi = bucket_of(t);
      if (bi < buckets.size()) buckets[bi].processed_qps[m] += 1.0;
    }
    for (std::size_t i = 0; i < buckets.size(); ++i) {
      auto& mb = buckets[i];
      const double span = cfg_.bucket_s;
      mb.demand_qps = static_cast<double>(mb.arrivals) / span;
      for (auto& p : mb.processed_qps) p /= span;
      for (auto& w : mb.workers) w /= span;
      mb.heavy_workers /= span;
      if (served[i] > 0) mb.fid = fid_sum[i] / static_cast<double>(served[i]);
      if (mb.arrivals > 0) {
        mb.slo_violation_ratio =
            static_cast<double>(mb.violations) / static_cast<double>(mb.arrivals);
        mb.heavy_route_ratio =
            static_cast<double>(heavy[i]) / static_cast<double>(mb.arrivals);
      }
      const auto hb = heartbeats_.find(i);
      if (hb != heartbeats_.end()) {
        for (auto& q : mb.queues) q /= static_cast<double>(hb->second);
      }
    }
  }

  const SimConfig& cfg_;
  const Catalog& cat_;
  std::vector<ConfigRow> rows_;
  PlanCache cache_;
  DemandEstimator estimator_;
  std::vector<Worker> workers_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  double now_ = 0.0;
  Plan plan_;
  double plan_lambda_ = 0.0;
  std::vector<PlanEvent> pending_;
  std::size_t next_arrival_ = 0;
  std::size_t admitted_ = 0;
  std::size_t finalized_ = 0;
  std::size_t arrived_since_epoch_ = 0;
  std::vector<std::size_t> intake_;
  std::vector<double> intake_rate_;
  std::vector<std::pair<double, int>> processed_;
  std::map<std::size_t, std::size_t> heartbeats_;
  double worker_clock_ = 0.0;
  SimResult res_;
};

}  // namespace

bool predict_miss(double now, long queue_ahead, double lambda_i, double alpha,
                  double floor, double service_s, double deadline_t) {
  return now + queue_delay(queue_ahead, lambda_i, alpha, floor) + service_s > deadline_t;
}

const char* policy_name(RoutingPolicy p) {
  switch (p) {
    case RoutingPolicy::kHybrid: return "hybrid";
    case RoutingPolicy::kRouterOnly: return "router-only";
    case RoutingPolicy::kDiscriminatorOnly: return "discriminator-only";
    case RoutingPolicy::kRandom: return "random";
  }
  return "?";
}

const char* planner_name(PlannerKind k) {
  switch (k) {
    case PlannerKind::kHadis: return "hadis";
    case PlannerKind::kCacheD: return "cache-d";
    case PlannerKind::kCacheDQ: return "cache-dq";
    case PlannerKind::kClipperLight: return "clipper-light";
    case PlannerKind::kClipperHeavy: return "clipper-heavy";
    case PlannerKind::kProteus: return "proteus";
    case PlannerKind::kDiffServe: return "diffserve";
    case PlannerKind::kFixed: return "fixed";
  }
  return "?";
}

RoutingPolicy parse_policy(const std::string& s) {
  for (auto p : {RoutingPolicy::kHybrid, RoutingPolicy::kRouterOnly,
                 RoutingPolicy::kDiscriminatorOnly, RoutingPolicy::kRandom}) {
    if (s == policy_name(p)) return p;
  }
  throw Error("invalid-policy",
              fmt::format("'{}' (expected hybrid, router-only, discriminator-only, random)", s));
}

PlannerKind parse_planner(const std::string& s) {
  for (auto k : {PlannerKind::kHadis, PlannerKind::kCacheD, PlannerKind::kCacheDQ,
                 PlannerKind::kClipperLight, PlannerKind::kClipperHeavy,
                 PlannerKind::kProteus, PlannerKind::kDiffServe}) {
    if (s == planner_name(k)) return k;
  }
  throw Error("invalid-planner",
              fmt::format("'{}' (expected hadis, cache-d, cache-dq, clipper-light, "
                          "clipper-heavy, proteus, diffserve)",
                          s));
}

const char* outcome_name(Outcome o) {
  switch (o) {
    case Outcome::kPending: return "pending";
    case Outcome::kServed: return "served";
    case Outcome::kDropped: return "dropped";
    case Outcome::kTimedOut: return "timed_out";
  }
  return "?";
}

std::vector<ConfigRow> planner_rows(PlannerKind kind, const Catalog& catalog,
                                    const LookupTable& table,
                                    const LookupTable* diffserve_table) {
  auto standalone = [&](const ModelVariant& v) {
    for (const auto& r : table.standalone) {
      if (r.light == v.id) return std::vector<ConfigRow>{r};
    }
    throw Error("missing-variant", "no standalone row for " + v.id);
  };
  switch (kind) {
    case PlannerKind::kHadis:
    case PlannerKind::kCacheD:
    case PlannerKind::kCacheDQ:
      return table.rows;
    case PlannerKind::kProteus:
      return table.standalone;
    case PlannerKind::kClipperLight:
      return standalone(catalog.lightest());
    case PlannerKind::kClipperHeavy:
      return standalone(catalog.heaviest());
    case PlannerKind::kDiffServe: {
      if (!diffserve_table) throw Error("missing-variant", "no DiffServe pair table");
      std::vector<ConfigRow> rows;
      for (const auto& r : diffserve_table->rows) {
        if (r.theta == 1.0) rows.push_back(r);
      }
      return rows;
    }
    case PlannerKind::kFixed:
      return {};
  }
  return {};
}

void validate_sim_config(const SimConfig& c) {
  std::vector<std::string> errs;
  if (!c.catalog || c.catalog->empty()) errs.push_back("catalog missing or empty");
  if (!c.prompts || c.prompts->empty()) errs.push_back("prompt population missing or empty");
  if (c.planner != PlannerKind::kFixed && !c.table) errs.push_back("lookup table missing");
  if (c.planner == PlannerKind::kFixed && !c.fixed_plan) errs.push_back("fixed plan missing");
  if (c.planner == PlannerKind::kDiffServe && !c.diffserve_table) {
    errs.push_back("DiffServe planner needs the fixed-pair table");
  }
  if (c.table && c.table->rows.empty() && c.planner != PlannerKind::kFixed) {
    errs.push_back("lookup table has no rows");
  }
  if (c.workers < 1) errs.push_back("workers must be >= 1");
  if (!(c.t_slo > 0.0)) errs.push_back("t_slo must be > 0");
  if (c.alpha < 1.0) errs.push_back("alpha must be >= 1");
  if (!(c.lambda_floor > 0.0)) errs.push_back("lambda_floor must be > 0");
  if (!(c.ewma_weight > 0.0 && c.ewma_weight <= 1.0)) errs.push_back("ewma_weight must be in (0,1]");
  if (!(c.epoch_s > 0.0)) errs.push_back("epoch_s must be > 0");
  if (c.solver_delay_s < 0.0 || c.swap_delay_s < 0.0) errs.push_back("delays must be >= 0");
  if (!(c.bucket_s > 0.0)) errs.push_back("bucket_s must be > 0");
  if (!(c.spare_horizon_s > 0.0)) errs.push_back("spare_horizon_s must be > 0");
  if (!(c.noise_sigma >= 0.0)) errs.push_back("noise_sigma must be >= 0");
  if (!(c.initial_demand >= 0.0)) errs.push_back("initial_demand must be >= 0");
  if (c.prompts) {
    double prev = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c.arrivals.size(); ++i) {
      if (c.arrivals[i].prompt >= c.prompts->size()) {
        errs.push_back(fmt::format("arrival {} references prompt {}", i, c.arrivals[i].prompt));
        break;
      }
      if (!(c.arrivals[i].time > prev) || c.arrivals[i].time < 0.0) {
        errs.push_back(fmt::format("arrival {} is not strictly increasing", i));
        break;
      }
      prev = c.arrivals[i].time;
    }
  }
  if (c.catalog && c.table && !c.catalog->empty()) {
    for (const auto* rows : {&c.table->rows, &c.table->standalone}) {
      for (const auto& r : *rows) {
        if (!c.catalog->find(r.light) || !c.catalog->find(r.heavy)) {
          errs.push_back("table references a model missing from the catalog");
          break;
        }
      }
    }
  }
  if (!errs.empty()) {
    std::string all;
    for (const auto& e : errs) all += (all.empty() ? "" : "; ") + e;
    throw Error("invalid-scenario", all);
  }
}

SimResult run_simulation(const SimConfig& cfg) {
  validate_sim_config(cfg);
  return Simulator(cfg).run();
}

RunSummary summarize(const std::vector<QueryRecord>& queries,
                     const std::vector<PlanEvent>& plans) {
  RunSummary s;
  double fid = 0.0;
  for (const auto& q : queries) {
    ++s.admitted;
    switch (q.outcome) {
      case Outcome::kServed:
        ++s.served;
        fid += q.quality_cost;
        ++s.served_by_model[q.served_model];
        break;
      case Outcome::kDropped: ++s.dropped; break;
      case Outcome::kTimedOut: ++s.timed_out; break;
      case Outcome::kPending: break;
    }
    if (q.role_starved) ++s.role_starved;
  }
  if (s.served > 0) s.avg_fid = fid / static_cast<double>(s.served);
  if (s.admitted > 0) {
    s.slo_violation_ratio =
        static_cast<double>(s.dropped + s.timed_out) / static_cast<double>(s.admitted);
  }
  for (std::size_t i = 0; i < plans.size(); ++i) {
    const auto& p = plans[i];
    ++s.plans_computed;
    if (!p.plan.feasible) ++s.infeasible_plans;
    if (!p.validation_errors.empty()) ++s.invalid_plans;
    s.swaps += static_cast<std::size_t>(p.swaps);
    if (p.cache_hit) ++(*p.cache_hit ? s.cache_hits : s.cache_misses);
    if (i > 0 && (!(p.plan.row == plans[i - 1].plan.row) ||
                  p.allocation != plans[i - 1].allocation ||
                  p.plan.batch != plans[i - 1].plan.batch)) {
      ++s.plan_changes;
    }
  }
  return s;
}

nlohmann::json summary_to_json(const RunSummary& s) {
  return {{"admitted", s.admitted},
          {"served", s.served},
          {"dropped", s.dropped},
          {"timed_out", s.timed_out},
          {"avg_fid", s.avg_fid},
          {"slo_violation_ratio", s.slo_violation_ratio},
          {"served_by_model", s.served_by_model},
          {"plan_changes", s.plan_changes},
          {"plans_computed", s.plans_computed},
          {"infeasible_plans", s.infeasible_plans},
          {"invalid_plans", s.invalid_plans},
          {"role_starved", s.role_starved},
          {"swaps", s.swaps},
          {"cache_hits", s.cache_hits},
          {"cache_misses", s.cache_misses}};
}

nlohmann::json query_to_json(const QueryRecord& q) {
  nlohmann::json path = nlohmann::json::array();
  for (const auto& p : q.path) {
    path.push_back({p.model, p.worker, p.enqueue_t, p.start_t, p.finish_t});
  }
  nlohmann::json j = {{"id", q.id},
                      {"prompt", q.prompt},
                      {"hardness", q.hardness},
                      {"arrival", q.arrival_t},
                      {"deadline", q.deadline_t},
                      {"path", path},
                      {"outcome", outcome_name(q.outcome)},
                      {"completion", q.completion_t},
                      {"bypassed", q.bypassed},
                      {"rerouted", q.rerouted},
                      {"role_starved", q.role_starved}};
  if (!q.served_model.empty()) {
    j["model"] = q.served_model;
    j["cost"] = q.quality_cost;
  }
  return j;
}

QueryRecord query_from_json(const nlohmann::json& j) {
  QueryRecord q;
  q.id = j.at("id").get<std::size_t>();
  q.prompt = j.at("prompt").get<std::size_t>();
  q.hardness = j.at("hardness").get<double>();
  q.arrival_t = j.at("arrival").get<double>();
  q.deadline_t = j.at("deadline").get<double>();
  for (const auto& p : j.at("path")) {
    q.path.push_back({p.at(0).get<std::string>(), p.at(1).get<int>(),
                      p.at(2).get<double>(), p.at(3).get<double>(),
                      p.at(4).get<double>()});
  }
  const auto outcome = j.at("outcome").get<std::string>();
  for (auto o : {Outcome::kPending, Outcome::kServed, Outcome::kDropped, Outcome::kTimedOut}) {
    if (outcome == outcome_name(o)) q.outcome = o;
  }
  q.completion_t = j.at("completion").get<double>();
  q.bypassed = j.at("bypassed").get<bool>();
  q.rerouted = j.at("rerouted").get<bool>();
  q.heavy_routed = q.bypassed || q.rerouted;
  q.role_starved = j.at("role_starved").get<bool>();
  if (j.contains("model")) {
    q.served_model = j.at("model").get<std::string>();
    q.quality_cost = j.at("cost").get<double>();
  }
  return q;
}

namespace {

std::string num(double v) { return fmt::format("{:.6g}", v); }

}  // namespace

void write_metrics_csv(const MetricsSeries& m, const OutputHeader& h,
                       std::ostream& out) {
  out << "# config_hash=" << h.config_hash << " seed=" << h.seed
      << " version=" << h.version << '\n';
  out << "start_s,demand_qps";
  for (const auto& id : m.models) out << ",processed_qps:" << id;
  out << ",fid,slo_violation_ratio";
  for (const auto& id : m.models) out << ",workers:" << id;
  out << ",heavy_workers,heavy_route_ratio";
  for (const auto& id : m.models) out << ",queue:" << id;
  out << '\n';
  for (const auto& b : m.buckets) {
    out << num(b.start_s) << ',' << num(b.demand_qps);
    for (double v : b.processed_qps) out << ',' << num(v);
    out << ',' << (b.fid ? num(*b.fid) : std::string()) << ','
        << num(b.slo_violation_ratio);
    for (double v : b.workers) out << ',' << num(v);
    out << ',' << num(b.heavy_workers) << ',' << num(b.heavy_route_ratio);
    for (double v : b.queues) out << ',' << num(v);
    out << '\n';
  }
}

nlohmann::json plan_event_to_json(const PlanEvent& e) {
  return {{"computed", e.computed_t},
          {"applied", e.applied_t},
          {"lambda", e.lambda},
          {"queues", e.queues},
          {"row_index", e.plan.row_index},
          {"row", config_row_to_json(e.plan.row)},
          {"workers", e.plan.workers},
          {"batch", e.plan.batch},
          {"objective", e.plan.objective},
          {"path_latency", e.plan.path_latency},
          {"feasible", e.plan.feasible},
          {"allocation", e.allocation},
          {"swaps", e.swaps},
          {"cache_hit", e.cache_hit ? nlohmann::json(*e.cache_hit) : nlohmann::json()},
          {"validation_errors", e.validation_errors}};
}

PlanEvent plan_event_from_json(const nlohmann::json& j) {
  PlanEvent e;
  e.computed_t = j.at("computed").get<double>();
  e.applied_t = j.at("applied").get<double>();
  e.lambda = j.at("lambda").get<double>();
  e.queues = j.at("queues").get<std::map<std::string, long>>();
  e.plan.row_index = j.at("row_index").get<std::size_t>();
  e.plan.row = config_row_from_json(j.at("row"));
  e.plan.workers = j.at("workers").get<std::map<std::string, int>>();
  e.plan.batch = j.at("batch").get<std::map<std::string, int>>();
  e.plan.objective = j.at("objective").get<double>();
  e.plan.path_latency = j.at("path_latency").get<double>();
  e.plan.feasible = j.at("feasible").get<bool>();
  for (const auto& [id, x] : e.plan.workers) e.plan.total_workers += x;
  e.allocation = j.at("allocation").get<std::map<std::string, int>>();
  e.swaps = j.at("swaps").get<int>();
  if (!j.at("cache_hit").is_null()) e.cache_hit = j["cache_hit"].get<bool>();
  e.validation_errors = j.at("validation_errors").get<std::vector<std::string>>();
  return e;
}

void write_audit_log(const std::vector<QueryRecord>& queries,
                     const std::vector<PlanEvent>& plans, const OutputHeader& h,
                     std::ostream& out) {
  out << nlohmann::json{{"header", {{"config_hash", h.config_hash},
                                    {"seed", h.seed},
                                    {"version", h.version}}}}
             .dump()
      << '\n';
  for (const auto& p : plans) out << nlohmann::json{{"plan", plan_event_to_json(p)}}.dump() << '\n';
  for (const auto& q : queries) out << query_to_json(q).dump() << '\n';
}

AuditLog read_audit_log(std::istream& in) {
  AuditLog out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      if (j.contains("header")) {
        const auto& h = j["header"];
        out.header = OutputHeader{h.at("config_hash").get<std::string>(),
                                  h.at("seed").get<std::uint64_t>(),
                                  h.at("version").get<std::string>()};
      } else if (j.contains("plan")) {
        out.plans.push_back(plan_event_from_json(j["plan"]));
      } else {
        out.queries.push_back(query_from_json(j));
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error("invalid-audit-log", fmt::format("line {}: {}", line_no, e.what()));
    }
  }
  return out;
}

}  // namespace hadis

#include "hadis/profiler.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "hadis/error.hpp"
#include "hadis/quality.hpp"
#include "hadis/rng.hpp"

namespace hadis {

namespace {

PromptPopulation canonical(const PromptPopulation& prompts) {
  PromptPopulation out = prompts;
  std::stable_sort(out.begin(), out.end(), [](const Prompt& a, const Prompt& b) {
    if (a.text != b.text) return a.text < b.text;
    return a.hardness < b.hardness;
  });
  return out;
}

std::vector<double> light_scores(const ModelVariant& v,
                                 const PromptPopulation& sorted,
                                 const ProfileOptions& opt) {
  std::vector<double> s;
  s.reserve(sorted.size());
  for (const auto& p : sorted) {
    s.push_back(discriminator_score(v, p.hardness, opt.noise_sigma, opt.seed,
                                    prompt_key(p)));
  }
  return s;
}

void check_pair(const ModelVariant& light, const ModelVariant& heavy) {
  if (single_latency(light) > single_latency(heavy)) {
    throw Error("pair-order", fmt::format("{} is slower than {}", light.id, heavy.id));
  }
}

ConfigRow tally(const ModelVariant& light, const ModelVariant& heavy,
                double theta, double tau, const PromptPopulation& sorted,
                const std::vector<double>& scores) {
  const double ll = single_latency(light);
  const double lh = single_latency(heavy);
  std::size_t bypass = 0, rejected = 0;
  double cost = 0.0, latency = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double h = sorted[i].hardness;
    if (h > theta) {
      ++bypass;
      cost += query_quality_cost(heavy, h);
      latency += lh;
    } else if (!accept(scores[i], tau)) {
      ++rejected;
      cost += query_quality_cost(heavy, h);
      latency += ll + lh;
    } else {
      cost += query_quality_cost(light, h);
      latency += ll;
    }
  }
  const double n = static_cast<double>(sorted.size());
  ConfigRow r;
  r.light = light.id;
  r.heavy = heavy.id;
  r.theta = theta;
  r.tau = tau;
  r.bypass_fraction = static_cast<double>(bypass) / n;
  r.rejected_fraction = static_cast<double>(rejected) / n;
  r.route_light = static_cast<double>(sorted.size() - bypass) / n;
  r.route_heavy = static_cast<double>(bypass + rejected) / n;
  r.fid = cost / n;
  r.mean_latency = latency / n;
  return r;
}

void require_population(const PromptPopulation& prompts) {
  if (prompts.empty()) throw Error("empty-population", "no prompts to profile");
}

std::vector<ConfigRow> pair_rows(const ModelVariant& light,
                                 const ModelVariant& heavy,
                                 const ThresholdGrid& grid,
                                 const PromptPopulation& sorted,
                                 const ProfileOptions& opt) {
  check_pair(light, heavy);
  const auto scores = light_scores(light, sorted, opt);
  std::vector<ConfigRow> rows;
  rows.reserve(grid.theta.size() * grid.tau.size());
  for (double theta : grid.theta) {
    for (double tau : grid.tau) {
      rows.push_back(tally(light, heavy, theta, tau, sorted, scores));
    }
  }
  return rows;
}

void validate_grid(const ThresholdGrid& grid) {
  if (grid.theta.empty() || grid.tau.empty()) {
    throw Error("invalid-grid", "threshold grid must be nonempty");
  }
  for (const auto* axis : {&grid.theta, &grid.tau}) {
    for (double v : *axis) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw Error("invalid-grid", fmt::format("threshold {} outside [0,1]", v));
      }
    }
  }
}

nlohmann::json grid_to_json(const ThresholdGrid& g) {
  return {{"theta", g.theta}, {"tau", g.tau}};
}

}  // namespace

std::vector<std::pair<std::string, double>> ConfigRow::active_routes() const {
  std::vector<std::pair<std::string, double>> out;
  if (single_model()) {
    out.emplace_back(light, 1.0);
    return out;
  }
  if (route_light > 0.0) out.emplace_back(light, route_light);
  if (route_heavy > 0.0) out.emplace_back(heavy, route_heavy);
  return out;
}

ThresholdGrid ThresholdGrid::uniform(int steps) {
  ThresholdGrid g;
  for (int i = 0; i <= steps; ++i) {
    g.theta.push_back(static_cast<double>(i) / steps);
  }
  g.tau = g.theta;
  return g;
}

ConfigRow profile_config(const ModelVariant& light, const ModelVariant& heavy,
                         double theta, double tau,
                         const PromptPopulation& prompts,
                         const ProfileOptions& opt) {
  check_pair(light, heavy);
  require_population(prompts);
  const auto sorted = canonical(prompts);
  return tally(light, heavy, theta, tau, sorted, light_scores(light, sorted, opt));
}

ConfigRow profile_single(const ModelVariant& v, const PromptPopulation& prompts) {
  require_population(prompts);
  const auto sorted = canonical(prompts);
  double cost = 0.0;
  for (const auto& p : sorted) cost += query_quality_cost(v, p.hardness);
  ConfigRow r;
  r.light = v.id;
  r.heavy = v.id;
  r.theta = 1.0;
  r.tau = 0.0;
  r.fid = cost / static_cast<double>(sorted.size());
  r.mean_latency = single_latency(v);
  return r;
}

std::vector<ConfigRow> profile_pair(const ModelVariant& light,
                                    const ModelVariant& heavy,
                                    const ThresholdGrid& grid,
                                    const PromptPopulation& prompts,
                                    const ProfileOptions& opt) {
  require_population(prompts);
  validate_grid(grid);
  return pair_rows(light, heavy, grid, canonical(prompts), opt);
}

LookupTable build_lookup_table(const Catalog& catalog, const ThresholdGrid& grid,
                               const PromptPopulation& prompts,
                               const ProfileOptions& opt) {
  if (catalog.size() < 2) {
    throw Error("need-2-variants", "profiling needs at least two variants");
  }
  require_population(prompts);
  validate_grid(grid);
  const auto sorted = canonical(prompts);
  const auto order = catalog.by_latency();

  LookupTable table;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      auto rows = pair_rows(*order[i], *order[j], grid, sorted, opt);
      auto kept = pareto_prune_rows(rows, [](const ConfigRow& r) {
        return ParetoPoint{r.mean_latency, r.fid};
      });
      table.pair_stats.push_back(
          {order[i]->id, order[j]->id, rows.size(), kept.size()});
      table.rows.insert(table.rows.end(), kept.begin(), kept.end());
    }
  }
  for (const auto* v : order) table.standalone.push_back(profile_single(*v, sorted));
  table.provenance = {catalog_hash(catalog), population_hash(prompts), grid,
                      opt.seed, opt.noise_sigma};
  return table;
}

LookupTable build_pair_table(const Catalog& catalog, const std::string& light,
                             const std::string& heavy, const ThresholdGrid& grid,
                             const PromptPopulation& prompts,
                             const ProfileOptions& opt) {
  require_population(prompts);
  validate_grid(grid);
  const auto sorted = canonical(prompts);
  LookupTable table;
  table.rows = pair_rows(catalog.at(light), catalog.at(heavy), grid, sorted, opt);
  table.pair_stats.push_back({light, heavy, table.rows.size(), table.rows.size()});
  table.standalone.push_back(profile_single(catalog.at(light), sorted));
  table.standalone.push_back(profile_single(catalog.at(heavy), sorted));
  table.provenance = {catalog_hash(catalog), population_hash(prompts), grid,
                      opt.seed, opt.noise_sigma};
  return table;
}

nlohmann::json config_row_to_json(const ConfigRow& r) {
  return {{"light", r.light},
          {"heavy", r.heavy},
          {"theta", r.theta},
          {"tau", r.tau},
          {"bypass_fraction", r.bypass_fraction},
          {"rejected_fraction", r.rejected_fraction},
          {"route_ratio", {{"light", r.route_light}, {"heavy", r.route_heavy}}},
          {"fid", r.fid},
          {"mean_latency", r.mean_latency}};
}

ConfigRow config_row_from_json(const nlohmann::json& j) {
  ConfigRow r;
  r.light = j.at("light").get<std::string>();
  r.heavy = j.at("heavy").get<std::string>();
  r.theta = j.at("theta").get<double>();
  r.tau = j.at("tau").get<double>();
  r.bypass_fraction = j.at("bypass_fraction").get<double>();
  r.rejected_fraction = j.at("rejected_fraction").get<double>();
  r.route_light = j.at("route_ratio").at("light").get<double>();
  r.route_heavy = j.at("route_ratio").at("heavy").get<double>();
  r.fid = j.at("fid").get<double>();
  r.mean_latency = j.at("mean_latency").get<double>();
  return r;
}

nlohmann::json table_to_json(const LookupTable& t) {
  nlohmann::json j;
  const auto& p = t.provenance;
  j["provenance"] = {{"catalog_hash", hex64(p.catalog_hash)},
                     {"population_hash", hex64(p.population_hash)},
                     {"grid", grid_to_json(p.grid)},
                     {"seed", p.seed},
                     {"noise_sigma", p.noise_sigma}};
  j["pairs"] = nlohmann::json::array();
  for (const auto& s : t.pair_stats) {
    j["pairs"].push_back({{"light", s.light},
                          {"heavy", s.heavy},
                          {"profiled", s.profiled},
                          {"retained", s.retained}});
  }
  j["rows"] = nlohmann::json::array();
  for (const auto& r : t.rows) j["rows"].push_back(config_row_to_json(r));
  j["standalone"] = nlohmann::json::array();
  for (const auto& r : t.standalone) j["standalone"].push_back(config_row_to_json(r));
  return j;
}

LookupTable table_from_json(const nlohmann::json& j) {
  LookupTable t;
  try {
    const auto& p = j.at("provenance");
    t.provenance.catalog_hash =
        std::stoull(p.at("catalog_hash").get<std::string>(), nullptr, 16);
    t.provenance.population_hash =
        std::stoull(p.at("population_hash").get<std::string>(), nullptr, 16);
    t.provenance.grid.theta = p.at("grid").at("theta").get<std::vector<double>>();
    t.provenance.grid.tau = p.at("grid").at("tau").get<std::vector<double>>();
    t.provenance.seed = p.at("seed").get<std::uint64_t>();
    t.provenance.noise_sigma = p.at("noise_sigma").get<double>();
    for (const auto& s : j.at("pairs")) {
      t.pair_stats.push_back({s.at("light").get<std::string>(),
                              s.at("heavy").get<std::string>(),
                              s.at("profiled").get<std::size_t>(),
                              s.at("retained").get<std::size_t>()});
    }
    for (const auto& r : j.at("rows")) t.rows.push_back(config_row_from_json(r));
    for (const auto& r : j.at("standalone")) {
      t.standalone.push_back(config_row_from_json(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid-table", e.what());
  } catch (const std::invalid_argument& e) {
    throw Error("invalid-table", "bad provenance hash");
  }
  return t;
}

void save_table(const LookupTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path);
  out << table_to_json(table).dump(2) << '\n';
}

LookupTable load_table(const std::string& path, const Catalog& catalog,
                       bool override_provenance) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open table " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error("invalid-table", e.what());
  }
  auto t = table_from_json(j);
  const auto expected = catalog_hash(catalog);
  if (t.provenance.catalog_hash != expected && !override_provenance) {
    throw Error("provenance-mismatch",
                fmt::format("table catalog hash {} != active catalog {}",
                            hex64(t.provenance.catalog_hash), hex64(expected)));
  }
  for (const auto* rows : {&t.rows, &t.standalone}) {
    for (const auto& r : *rows) {
      if (!catalog.find(r.light) || !catalog.find(r.heavy)) {
        throw Error("invalid-table",
                    fmt::format("row references unknown model {}/{}", r.light, r.heavy));
      }
    }
  }
  return t;
}

std::vector<FrontierPoint> lower_frontier(std::vector<FrontierPoint> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    if (a.latency != b.latency) return a.latency < b.latency;
    return a.fid < b.fid;
  });
  std::vector<FrontierPoint> hull;
  for (const auto& p : pts) {
    if (!hull.empty() && hull.back().latency == p.latency) continue;
    while (hull.size() >= 2) {
      const auto& a = hull[hull.size() - 2];
      const auto& b = hull.back();
      const double cross = (b.latency - a.latency) * (p.fid - a.fid) -
                           (b.fid - a.fid) * (p.latency - a.latency);
      if (cross <= 0.0) {
        hull.pop_back();
      } else {
        break;
      }
    }
    hull.push_back(p);
  }
  // Keep the decreasing part: past the best-quality vertex the hull only
  // trades latency for nothing.
  std::size_t best = 0;
  for (std::size_t i = 1; i < hull.size(); ++i) {
    if (hull[i].fid < hull[best].fid) best = i;
  }
  if (!hull.empty()) hull.resize(best + 1);
  return hull;
}

double frontier_value(const std::vector<FrontierPoint>& f, double latency) {
  if (f.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (latency <= f.front().latency) return f.front().fid;
  if (latency >= f.back().latency) return f.back().fid;
  auto it = std::lower_bound(f.begin(), f.end(), latency,
                             [](const auto& p, double l) { return p.latency < l; });
  const auto& b = *it;
  if (b.latency == latency) return b.fid;
  const auto& a = *(it - 1);
  const double t = (latency - a.latency) / (b.latency - a.latency);
  return a.fid + t * (b.fid - a.fid);
}

FrontierReport frontier_compare(const Catalog& catalog, const ThresholdGrid& grid,
                                const PromptPopulation& prompts,
                                const ProfileOptions& opt) {
  if (catalog.size() < 3) {
    throw Error("need-3-variants", "frontier comparison needs three variants");
  }
  require_population(prompts);
  validate_grid(grid);
  const auto sorted = canonical(prompts);
  const auto order = catalog.by_latency();
  const std::size_t n = order.size();

  std::vector<std::vector<double>> scores;
  for (const auto* v : order) scores.push_back(light_scores(*v, sorted, opt));

  std::vector<FrontierPoint> red;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (double theta : grid.theta) {
        for (double tau : grid.tau) {
          const auto r = tally(*order[i], *order[j], theta, tau, sorted, scores[i]);
          red.push_back({r.mean_latency, r.fid});
        }
      }
    }
  }

  std::vector<FrontierPoint> blue = red;
  const double count = static_cast<double>(sorted.size());
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      for (std::size_t c = b + 1; c < n; ++c) {
        const auto& vl = *order[a];
        const auto& vm = *order[b];
        const auto& vh = *order[c];
        const double ll = single_latency(vl), lm = single_latency(vm),
                     lh = single_latency(vh);
        for (double theta : grid.theta) {
          for (double tau1 : grid.tau) {
            for (double tau2 : grid.tau) {
              double cost = 0.0, latency = 0.0;
              for (std::size_t q = 0; q < sorted.size(); ++q) {
                const double h = sorted[q].hardness;
                if (h > theta) {
                  cost += query_quality_cost(vh, h);
                  latency += lh;
                } else if (accept(scores[a][q], tau1)) {
                  cost += query_quality_cost(vl, h);
                  latency += ll;
                } else if (accept(scores[b][q], tau2)) {
                  cost += query_quality_cost(vm, h);
                  latency += ll + lm;
                } else {
                  cost += query_quality_cost(vh, h);
                  latency += ll + lm + lh;
                }
              }
              blue.push_back({latency / count, cost / count});
            }
          }
        }
      }
    }
  }

  FrontierReport rep;
  rep.two_model_configs = red.size();
  rep.three_model_configs = blue.size() - red.size();
  rep.two_model = lower_frontier(std::move(red));
  rep.three_model = lower_frontier(std::move(blue));

  const double lo = std::max(rep.two_model.front().latency,
                             rep.three_model.front().latency);
  const double hi = std::min(rep.two_model.back().latency,
                             rep.three_model.back().latency);
  double gap = 0.0;
  for (const auto* f : {&rep.two_model, &rep.three_model}) {
    for (const auto& p : *f) {
      if (p.latency < lo || p.latency > hi) continue;
      gap = std::max(gap, std::abs(frontier_value(rep.two_model, p.latency) -
                                   frontier_value(rep.three_model, p.latency)));
    }
  }
  rep.max_quality_gap = gap;
  return rep;
}

}  // namespace hadis

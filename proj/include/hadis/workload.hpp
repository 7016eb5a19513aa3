#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "hadis/catalog.hpp"
#include "hadis/prompt.hpp"

namespace hadis {

struct TraceBucket {
  double start_s = 0.0;
  double qps = 0.0;
};

struct DemandTrace {
  std::vector<TraceBucket> buckets;
  double duration_s = 0.0;

  double peak() const;
  double end_of(std::size_t bucket) const;
  double mean_qps() const;
};

// CSV with an optional "# duration_s=<x>" comment, a "start_s,qps" header and
// one record per line. Errors name the offending line.
DemandTrace parse_trace(std::istream& in, double scale = 1.0,
                        const std::string& origin = "<stream>");
DemandTrace load_trace(const std::string& path, double scale = 1.0);
void write_trace(const DemandTrace& trace, std::ostream& out);
void save_trace(const DemandTrace& trace, const std::string& path);
DemandTrace scale_trace(const DemandTrace& trace, double scale);

DemandTrace gen_piecewise(const std::vector<double>& levels, double dwell_s);

// Diurnal load with seeded bursts, normalized to a peak of 1 qps.
DemandTrace gen_azure_like(double duration_s, double bucket_s,
                           std::uint64_t seed);

struct HardnessPhases {
  DemandTrace trace;            // one bucket per phase
  PromptPopulation prompts;     // easy pool followed by hard pool
  std::vector<std::vector<std::size_t>> pools;  // [0] easy, [1] hard
  std::vector<std::size_t> bucket_pool;         // pool index per bucket
  std::vector<bool> phase_hard;
};

// Four phases: Easy, Hard, Easy, Hard.
HardnessPhases gen_hardness_phases(const PromptPopulation& easy_pool,
                                   const PromptPopulation& hard_pool,
                                   double phase_s, double qps);

enum class ArrivalMode { kPoisson, kUniform };

struct Arrival {
  double time = 0.0;
  std::size_t prompt = 0;  // index into the prompt population
};

std::vector<Arrival> arrivals(const DemandTrace& trace,
                              const PromptPopulation& prompts,
                              std::uint64_t seed, ArrivalMode mode);

// Round-robin per pool; bucket_pool maps each bucket to a pool.
std::vector<Arrival> arrivals(const DemandTrace& trace,
                              const std::vector<std::vector<std::size_t>>& pools,
                              const std::vector<std::size_t>& bucket_pool,
                              std::uint64_t seed, ArrivalMode mode);

struct GeneratedPrompt {
  std::string text;
  double complexity = 0.0;  // generator's latent difficulty in [0, 1]
};

// Template prompts whose object count, modifiers, relations and rarity grow
// with a uniformly drawn complexity.
std::vector<GeneratedPrompt> gen_prompt_texts(std::size_t n, std::uint64_t seed);

// Scores every text and labels the bottom complexity tercile Easy and the
// top tercile Hard.
PromptPopulation build_population(const std::vector<GeneratedPrompt>& texts,
                                  const LexiconSet& lex,
                                  const RouterWeights& weights);

// One record per line: text, optionally followed by a tab and easy|hard.
PromptPopulation load_prompts(const std::string& path, const LexiconSet& lex,
                              const RouterWeights& weights);
void save_prompts(const PromptPopulation& prompts, const std::string& path);

// Peak demand equal to `fraction` of the all-workers lightest-model capacity.
double auto_scale(const DemandTrace& trace, const Catalog& catalog, int workers,
                  double fraction = 0.8);

}  // namespace hadis

#pragma once

#include <cstdint>
#include <span>
#include <utility>

#include "hadis/catalog.hpp"

namespace hadis {

inline constexpr double kDefaultNoiseSigma = 0.05;

struct QualityOutcome {
  double score = 0.0;
  bool accepted = false;
};

double sigmoid(double x);

// Noise-free acceptance curve sigmoid(a - s*h).
double discriminator_mean(const ModelVariant& v, double hardness);

// Score with Gaussian jitter drawn from the stream keyed by (seed, query_key).
double discriminator_score(const ModelVariant& v, double hardness,
                           double noise_sigma, std::uint64_t seed,
                           std::uint64_t query_key);

inline bool accept(double score, double tau) { return score >= tau; }

QualityOutcome evaluate_light_output(const ModelVariant& v, double hardness,
                                     double tau, double noise_sigma,
                                     std::uint64_t seed,
                                     std::uint64_t query_key);

inline double query_quality_cost(const ModelVariant& v, double hardness) {
  return v.base_quality_cost + v.hardness_penalty * hardness;
}

struct ServedQuery {
  const ModelVariant* model = nullptr;
  double hardness = 0.0;
};

// Mean cost over the final serving model of each query.
// Throws Error("no-served-queries") on empty input.
double population_quality(std::span<const ServedQuery> served);

}  // namespace hadis

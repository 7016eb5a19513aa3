#include "hadis/quality.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "hadis/error.hpp"
#include "hadis/rng.hpp"

namespace hadis {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double discriminator_mean(const ModelVariant& v, double hardness) {
  return sigmoid(v.accept_offset - v.accept_slope * hardness);
}

double discriminator_score(const ModelVariant& v, double hardness,
                           double noise_sigma, std::uint64_t seed,
                           std::uint64_t query_key) {
  double s = discriminator_mean(v, hardness);
  if (noise_sigma > 0.0) {
    auto rng = make_stream(seed, query_key ^ fnv1a(v.id),
                           StreamTag::kDiscriminator);
    std::normal_distribution<double> noise(0.0, noise_sigma);
    s += noise(rng);
  }
  return std::clamp(s, 0.0, 1.0);
}

QualityOutcome evaluate_light_output(const ModelVariant& v, double hardness,
                                     double tau, double noise_sigma,
                                     std::uint64_t seed,
                                     std::uint64_t query_key) {
  QualityOutcome q;
  q.score = discriminator_score(v, hardness, noise_sigma, seed, query_key);
  q.accepted = accept(q.score, tau);
  return q;
}

double population_quality(std::span<const ServedQuery> served) {
  if (served.empty()) throw Error("no-served-queries", "nothing was served");
  double sum = 0.0;
  for (const auto& q : served) sum += query_quality_cost(*q.model, q.hardness);
  return sum / static_cast<double>(served.size());
}

}  // namespace hadis

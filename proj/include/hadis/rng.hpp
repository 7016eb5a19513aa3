#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace hadis {

// Independent sub-streams derived from one run seed. Keying every random
// draw by (seed, key, tag) keeps results independent of evaluation order.
enum class StreamTag : std::uint64_t {
  kDiscriminator = 1,
  kRandomPolicy = 2,
  kArrivals = 3,
  kPromptGen = 4,
  kTraceGen = 5,
};

std::uint64_t splitmix64(std::uint64_t x);

std::uint64_t fnv1a(std::string_view bytes,
                    std::uint64_t h = 1469598103934665603ULL);

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t key,
                            StreamTag tag);

std::string hex64(std::uint64_t v);

}  // namespace hadis

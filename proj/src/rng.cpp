#include "hadis/rng.hpp"

#include <fmt/format.h>

namespace hadis {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t key,
                            StreamTag tag) {
  std::uint64_t s = splitmix64(seed);
  s = splitmix64(s ^ key);
  s = splitmix64(s ^ static_cast<std::uint64_t>(tag));
  return std::mt19937_64(s);
}

std::string hex64(std::uint64_t v) { return fmt::format("{:016x}", v); }

}  // namespace hadis

#include "hadis/prompt.hpp"

#include <algorithm>
#include <cstring>

#include "hadis/rng.hpp"

namespace hadis {

Prompt score_prompt(std::string text, const LexiconSet& lex,
                    const RouterWeights& weights,
                    const NormalizationCaps& caps) {
  Prompt p;
  p.hardness = hardness_score(extract_features(text, lex, caps), weights);
  p.text = std::move(text);
  return p;
}

std::uint64_t prompt_key(const Prompt& p) { return fnv1a(p.text); }

std::uint64_t population_hash(const PromptPopulation& prompts) {
  // Order-independent: hash the sorted per-prompt digests.
  std::vector<std::uint64_t> digests;
  digests.reserve(prompts.size());
  for (const auto& p : prompts) {
    std::uint64_t bits = 0;
    std::memcpy(&bits, &p.hardness, sizeof bits);
    digests.push_back(splitmix64(fnv1a(p.text) ^ splitmix64(bits)));
  }
  std::sort(digests.begin(), digests.end());
  std::uint64_t h = fnv1a("population");
  for (auto d : digests) h = splitmix64(h ^ d);
  return h;
}

}  // namespace hadis

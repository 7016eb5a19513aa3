#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hadis/router.hpp"

namespace hadis {

struct Prompt {
  std::string text;
  double hardness = 0.0;  // router score in [0, 1]
  std::optional<bool> hard;  // Easy/Hard label when known
};

using PromptPopulation = std::vector<Prompt>;

Prompt score_prompt(std::string text, const LexiconSet& lex,
                    const RouterWeights& weights,
                    const NormalizationCaps& caps = {});

std::uint64_t population_hash(const PromptPopulation& prompts);

// Stable noise key for a prompt, independent of its position.
std::uint64_t prompt_key(const Prompt& p);

}  // namespace hadis

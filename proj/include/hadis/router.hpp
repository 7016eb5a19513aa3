#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace hadis {

inline constexpr std::size_t kFeatureCount = 8;

enum class Feature : std::size_t {
  kPromptLength = 0,
  kTokenRarity,
  kNumObjects,
  kAbstractness,
  kAttributeDensity,
  kSpatialRelations,
  kActionVerbs,
  kNamedEntities,
};

const char* feature_name(Feature f);

// Normalized prompt features, each in [0, 1].
using FeatureVector = std::array<double, kFeatureCount>;

struct LexiconSet {
  std::unordered_map<std::string, double> word_frequency;  // in (0, 1]
  std::unordered_set<std::string> abstract_nouns;
  std::unordered_set<std::string> action_verbs;
  std::unordered_set<std::string> noun_markers;  // concrete object nouns
  std::unordered_set<std::string> adjectives;
  std::vector<std::vector<std::string>> spatial_phrases;  // tokenized phrases

  double min_frequency() const;
};

// Built-in English lexicon. Not derived from any reference corpus.
LexiconSet default_lexicon();

// Directory layout: frequency.tsv ("word<TAB>freq"), nouns.txt,
// abstract_nouns.txt, adjectives.txt, action_verbs.txt, spatial_phrases.txt
// (one term per line).
LexiconSet load_lexicon(const std::string& dir);
void save_lexicon(const LexiconSet& lex, const std::string& dir);

struct NormalizationCaps {
  double prompt_length = 40.0;  // tokens
  double counts = 5.0;          // objects, relations, verbs, entities
  double attribute_density = 2.0;  // adjectives per noun
};

struct Token {
  std::string lower;
  bool capitalized = false;
  bool sentence_initial = false;
};

// Splits on whitespace and punctuation; apostrophes stay inside words.
std::vector<Token> tokenize(std::string_view text);

// Raw (unnormalized) feature values.
FeatureVector extract_raw_features(std::string_view prompt,
                                   const LexiconSet& lex);

FeatureVector extract_features(std::string_view prompt, const LexiconSet& lex,
                               const NormalizationCaps& caps = {});

struct RouterWeights {
  std::array<double, kFeatureCount> w{};

  static RouterWeights uniform();
  // Normalizes nonnegative raw weights to sum to one. Throws
  // Error("invalid-weights") for negative or all-zero input.
  static RouterWeights normalized(const std::array<double, kFeatureCount>& raw);
  bool valid() const;
};

double hardness_score(const FeatureVector& f, const RouterWeights& w);

enum class RouteDecision { kToLight, kBypassToHeavy };

RouteDecision route_decision(double score, double theta);

struct LabeledPrompt {
  std::string text;
  bool hard = false;
};

using WeightGrid = std::array<std::vector<double>, kFeatureCount>;

WeightGrid uniform_weight_grid(const std::vector<double>& values);

struct TuneResult {
  RouterWeights weights;
  double threshold = 0.0;
  double balanced_accuracy = 0.0;
  std::size_t evaluated = 0;
};

// Exhaustive grid search maximizing balanced accuracy at the best threshold.
// Ties resolve to the earliest grid point (last feature varies fastest).
TuneResult tune_weights(std::span<const LabeledPrompt> corpus,
                        const WeightGrid& grid, const LexiconSet& lex,
                        const NormalizationCaps& caps = {});

}  // namespace hadis

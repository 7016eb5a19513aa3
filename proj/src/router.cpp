#include "hadis/router.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "hadis/error.hpp"

namespace hadis {

namespace {

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream in{std::string(s)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

// Frequency tiers for the built-in lexicon.
constexpr double kStopFreq = 2e-2;
constexpr double kCommonFreq = 3e-4;
constexpr double kModerateFreq = 3e-5;
constexpr double kRareFreq = 1e-6;
constexpr double kRarestFreq = 1e-7;

constexpr std::string_view kStopwords =
    "a an the of on in and with at to by for from is are its his her their "
    "this that two three four five some many several one near next front "
    "top left right under over behind above below into while as style";

constexpr std::string_view kCommonNouns =
    "cat dog banana plate apple table chair car house tree flower bird horse "
    "ball cup bottle book man woman child boy girl person city street "
    "mountain river lake beach ocean sky sun moon cloud forest field road "
    "bridge building window door boat train bicycle clock lamp bed sofa "
    "kitchen room garden park bowl fruit sandwich pizza cake computer phone "
    "hat shoe box bag desk wall floor grass snow rain water fire";

constexpr std::string_view kModerateNouns =
    "vase robot dragon castle tower cityscape landscape portrait astronaut "
    "knight wizard cube sphere pyramid cylinder fox owl elephant giraffe "
    "lion tiger bear rabbit whale butterfly guitar piano violin umbrella "
    "lighthouse skyscraper cathedral waterfall volcano glacier desert canyon "
    "spaceship submarine telescope lantern compass";

constexpr std::string_view kRareNouns =
    "chandelier zeppelin gondola samurai minotaur sphinx kaleidoscope "
    "hourglass gramophone origami";

constexpr std::string_view kRarestNouns = "axolotl pangolin narwhal quokka";

constexpr std::string_view kAbstractNouns =
    "freedom hope love time memory justice peace chaos harmony loneliness "
    "nostalgia dream eternity infinity despair joy sorrow wisdom truth beauty "
    "fear anger serenity melancholy identity consciousness existence destiny "
    "fate faith courage silence solitude ambition grief euphoria entropy";

constexpr std::string_view kCommonAdjectives =
    "red blue green yellow white black purple pink brown gray small large big "
    "tiny huge tall short old young new bright dark happy sad wooden";

constexpr std::string_view kModerateAdjectives =
    "golden silver ancient modern shiny metal glass soft colorful beautiful "
    "rusty fluffy smooth rough wet dry cozy majestic mysterious glowing "
    "vintage futuristic dramatic vibrant cinematic detailed";

constexpr std::string_view kRareAdjectives =
    "surreal translucent intricate ornate minimalist ethereal iridescent "
    "baroque bioluminescent";

constexpr std::string_view kActionVerbs =
    "running jumping holding dancing flying swimming riding throwing catching "
    "eating drinking climbing fighting playing reading painting singing "
    "walking chasing kicking carrying pushing pulling juggling skating "
    "surfing skiing cooking laughing crying falling spinning "
    "runs jumps holds dances flies swims rides throws eats climbs fights "
    "plays chases carries run jump hold dance fly swim ride throw eat climb "
    "fight play chase carry";

constexpr std::string_view kRelations[] = {
    "next to",     "in front of",  "behind",       "above",
    "below",       "under",        "on top of",    "beside",
    "between",     "left of",      "right of",     "inside",
    "near",        "on",           "across from",  "around",
    "over",        "underneath",   "beneath",      "among",
    "in the middle of", "surrounded by",
};

void add_words(std::unordered_set<std::string>& set, std::string_view words) {
  for (auto& w : split_words(words)) set.insert(w);
}

void add_freq(LexiconSet& lex, std::string_view words, double f) {
  for (auto& w : split_words(words)) lex.word_frequency.emplace(w, f);
}

bool in_set_with_plural(const std::unordered_set<std::string>& set,
                        const std::string& w) {
  if (set.count(w)) return true;
  if (w.size() > 3 && w.back() == 's') {
    if (set.count(w.substr(0, w.size() - 1))) return true;
    if (w.size() > 4 && w.compare(w.size() - 2, 2, "es") == 0 &&
        set.count(w.substr(0, w.size() - 2))) {
      return true;
    }
  }
  return false;
}

bool is_word_byte(unsigned char c) {
  return std::isalnum(c) || c == '\'' || c >= 0x80;
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("io", "cannot open lexicon file " + p.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    out.push_back(line);
  }
  return out;
}

}  // namespace

const char* feature_name(Feature f) {
  switch (f) {
    case Feature::kPromptLength: return "prompt_length";
    case Feature::kTokenRarity: return "token_rarity";
    case Feature::kNumObjects: return "num_objects";
    case Feature::kAbstractness: return "abstractness";
    case Feature::kAttributeDensity: return "attribute_density";
    case Feature::kSpatialRelations: return "spatial_relations";
    case Feature::kActionVerbs: return "action_verbs";
    case Feature::kNamedEntities: return "named_entities";
  }
  return "?";
}

double LexiconSet::min_frequency() const {
  double m = 1.0;
  for (const auto& [w, f] : word_frequency) m = std::min(m, f);
  return m;
}

LexiconSet default_lexicon() {
  LexiconSet lex;
  add_words(lex.noun_markers, kCommonNouns);
  add_words(lex.noun_markers, kModerateNouns);
  add_words(lex.noun_markers, kRareNouns);
  add_words(lex.noun_markers, kRarestNouns);
  add_words(lex.abstract_nouns, kAbstractNouns);
  add_words(lex.adjectives, kCommonAdjectives);
  add_words(lex.adjectives, kModerateAdjectives);
  add_words(lex.adjectives, kRareAdjectives);
  add_words(lex.action_verbs, kActionVerbs);
  for (auto phrase : kRelations) lex.spatial_phrases.push_back(split_words(phrase));

  add_freq(lex, kStopwords, kStopFreq);
  add_freq(lex, kCommonNouns, kCommonFreq);
  add_freq(lex, kCommonAdjectives, kCommonFreq);
  add_freq(lex, kAbstractNouns, kModerateFreq);
  add_freq(lex, kModerateNouns, kModerateFreq);
  add_freq(lex, kModerateAdjectives, kModerateFreq);
  add_freq(lex, kActionVerbs, kModerateFreq);
  add_freq(lex, kRareNouns, kRareFreq);
  add_freq(lex, kRareAdjectives, kRareFreq);
  add_freq(lex, kRarestNouns, kRarestFreq);
  return lex;
}

LexiconSet load_lexicon(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  LexiconSet lex;
  int line_no = 0;
  for (const auto& line : read_lines(root / "frequency.tsv")) {
    ++line_no;
    auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw Error("invalid-lexicon",
                  fmt::format("frequency.tsv line {}: expected word<TAB>freq", line_no));
    }
    double f = 0.0;
    try {
      f = std::stod(line.substr(tab + 1));
    } catch (const std::exception&) {
      f = -1.0;
    }
    if (!(f > 0.0 && f <= 1.0)) {
      throw Error("invalid-lexicon",
                  fmt::format("frequency.tsv line {}: frequency must be in (0,1]", line_no));
    }
    lex.word_frequency[line.substr(0, tab)] = f;
  }
  for (auto& w : read_lines(root / "nouns.txt")) lex.noun_markers.insert(w);
  for (auto& w : read_lines(root / "abstract_nouns.txt")) lex.abstract_nouns.insert(w);
  for (auto& w : read_lines(root / "adjectives.txt")) lex.adjectives.insert(w);
  for (auto& w : read_lines(root / "action_verbs.txt")) lex.action_verbs.insert(w);
  for (auto& p : read_lines(root / "spatial_phrases.txt")) {
    lex.spatial_phrases.push_back(split_words(p));
  }
  return lex;
}

void save_lexicon(const LexiconSet& lex, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto sorted = [](const auto& set) {
    std::vector<std::string> v(set.begin(), set.end());
    std::sort(v.begin(), v.end());
    return v;
  };
  auto write_set = [&](const char* name, const auto& set) {
    std::ofstream out(fs::path(dir) / name);
    for (const auto& w : sorted(set)) out << w << '\n';
  };
  {
    std::vector<std::pair<std::string, double>> f(lex.word_frequency.begin(),
                                                  lex.word_frequency.end());
    std::sort(f.begin(), f.end());
    std::ofstream out(fs::path(dir) / "frequency.tsv");
    for (const auto& [w, v] : f) out << w << '\t' << fmt::format("{}", v) << '\n';
  }
  write_set("nouns.txt", lex.noun_markers);
  write_set("abstract_nouns.txt", lex.abstract_nouns);
  write_set("adjectives.txt", lex.adjectives);
  write_set("action_verbs.txt", lex.action_verbs);
  std::ofstream out(fs::path(dir) / "spatial_phrases.txt");
  for (const auto& p : lex.spatial_phrases) {
    for (std::size_t i = 0; i < p.size(); ++i) out << (i ? " " : "") << p[i];
    out << '\n';
  }
}

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  bool sentence_start = true;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (!is_word_byte(c)) {
      if (c == '.' || c == '!' || c == '?') sentence_start = true;
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word_byte(static_cast<unsigned char>(text[j]))) ++j;
    Token t;
    t.capitalized = std::isupper(c) != 0;
    t.sentence_initial = sentence_start;
    t.lower.reserve(j - i);
    for (std::size_t k = i; k < j; ++k) {
      t.lower.push_back(static_cast<char>(
          std::tolower(static_cast<unsigned char>(text[k]))));
    }
    out.push_back(std::move(t));
    sentence_start = false;
    i = j;
  }
  return out;
}

FeatureVector extract_raw_features(std::string_view prompt,
                                   const LexiconSet& lex) {
  FeatureVector raw{};
  const auto tokens = tokenize(prompt);
  if (tokens.empty()) return raw;
  const double n = static_cast<double>(tokens.size());

  const double fmin = lex.min_frequency();
  const double denom = -std::log(fmin);
  double rarity = 0.0;
  int nouns = 0, abstract = 0, adjectives = 0, verbs = 0, entities = 0;
  for (const auto& t : tokens) {
    if (denom > 0.0) {
      auto it = lex.word_frequency.find(t.lower);
      const double f = it == lex.word_frequency.end() ? fmin : it->second;
      rarity += -std::log(f) / denom;
    }
    if (in_set_with_plural(lex.noun_markers, t.lower)) ++nouns;
    if (in_set_with_plural(lex.abstract_nouns, t.lower)) ++abstract;
    if (lex.adjectives.count(t.lower)) ++adjectives;
    if (lex.action_verbs.count(t.lower)) ++verbs;
    if (t.capitalized && !t.sentence_initial) ++entities;
  }

  // Longest-match, non-overlapping spatial phrase scan.
  int relations = 0;
  for (std::size_t i = 0; i < tokens.size();) {
    std::size_t best = 0;
    for (const auto& phrase : lex.spatial_phrases) {
      if (phrase.empty() || phrase.size() <= best ||
          i + phrase.size() > tokens.size()) {
        continue;
      }
      bool match = true;
      for (std::size_t k = 0; k < phrase.size(); ++k) {
        if (tokens[i + k].lower != phrase[k]) {
          match = false;
          break;
        }
      }
      if (match) best = phrase.size();
    }
    if (best > 0) {
      ++relations;
      i += best;
    } else {
      ++i;
    }
  }

  auto at = [&](Feature f) -> double& { return raw[static_cast<std::size_t>(f)]; };
  at(Feature::kPromptLength) = n;
  at(Feature::kTokenRarity) = rarity / n;
  at(Feature::kNumObjects) = nouns;
  at(Feature::kAbstractness) = abstract / n;
  at(Feature::kAttributeDensity) =
      static_cast<double>(adjectives) / std::max(nouns, 1);
  at(Feature::kSpatialRelations) = relations;
  at(Feature::kActionVerbs) = verbs;
  at(Feature::kNamedEntities) = entities;
  return raw;
}

FeatureVector extract_features(std::string_view prompt, const LexiconSet& lex,
                               const NormalizationCaps& caps) {
  if (!(caps.prompt_length > 0 && caps.counts > 0 && caps.attribute_density > 0)) {
    throw Error("invalid-caps", "normalization caps must be positive");
  }
  FeatureVector f = extract_raw_features(prompt, lex);
  const std::array<double, kFeatureCount> cap = {
      caps.prompt_length, 1.0, caps.counts, 1.0,
      caps.attribute_density, caps.counts, caps.counts, caps.counts};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    f[i] = std::clamp(f[i] / cap[i], 0.0, 1.0);
  }
  return f;
}

RouterWeights RouterWeights::uniform() {
  RouterWeights r;
  r.w.fill(1.0 / kFeatureCount);
  return r;
}

RouterWeights RouterWeights::normalized(
    const std::array<double, kFeatureCount>& raw) {
  double sum = 0.0;
  for (double v : raw) {
    if (!(v >= 0.0)) throw Error("invalid-weights", "weights must be nonnegative");
    sum += v;
  }
  if (!(sum > 0.0)) throw Error("invalid-weights", "weights must not all be zero");
  RouterWeights r;
  for (std::size_t i = 0; i < kFeatureCount; ++i) r.w[i] = raw[i] / sum;
  return r;
}

bool RouterWeights::valid() const {
  double sum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0)) return false;
    sum += v;
  }
  return std::abs(sum - 1.0) <= 1e-9;
}

double hardness_score(const FeatureVector& f, const RouterWeights& w) {
  double s = 0.0;
  for (std::size_t i = 0; i < kFeatureCount; ++i) s += w.w[i] * f[i];
  return std::clamp(s, 0.0, 1.0);
}

RouteDecision route_decision(double score, double theta) {
  return score > theta ? RouteDecision::kBypassToHeavy : RouteDecision::kToLight;
}

WeightGrid uniform_weight_grid(const std::vector<double>& values) {
  WeightGrid g;
  g.fill(values);
  return g;
}

TuneResult tune_weights(std::span<const LabeledPrompt> corpus,
                        const WeightGrid& grid, const LexiconSet& lex,
                        const NormalizationCaps& caps) {
  std::size_t positives = 0;
  for (const auto& p : corpus) positives += p.hard ? 1 : 0;
  if (corpus.empty() || positives == 0 || positives == corpus.size()) {
    throw Error("degenerate-corpus", "corpus needs both hard and easy prompts");
  }
  double combos = 1.0;
  for (const auto& axis : grid) {
    if (axis.empty()) throw Error("invalid-grid", "every weight axis needs values");
    for (double v : axis) {
      if (!(v >= 0.0)) throw Error("invalid-grid", "grid values must be nonnegative");
    }
    combos *= static_cast<double>(axis.size());
  }
  if (combos > 5e6) throw Error("grid-too-large", fmt::format("{} points", combos));

  std::vector<FeatureVector> feats;
  feats.reserve(corpus.size());
  for (const auto& p : corpus) feats.push_back(extract_features(p.text, lex, caps));
  const double pos = static_cast<double>(positives);
  const double neg = static_cast<double>(corpus.size() - positives);

  TuneResult best;
  best.balanced_accuracy = -1.0;
  std::array<std::size_t, kFeatureCount> odo{};
  std::vector<std::size_t> order(corpus.size());
  std::vector<double> scores(corpus.size());
  while (true) {
    std::array<double, kFeatureCount> raw{};
    double sum = 0.0;
    for (std::size_t i = 0; i < kFeatureCount; ++i) {
      raw[i] = grid[i][odo[i]];
      sum += raw[i];
    }
    if (sum > 0.0) {
      const RouterWeights w = RouterWeights::normalized(raw);
      for (std::size_t k = 0; k < feats.size(); ++k) scores[k] = hardness_score(feats[k], w);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](auto a, auto b) { return scores[a] < scores[b]; });
      // Threshold below every score: everything predicted hard.
      double tn = 0.0, fn = 0.0;
      double local_best = 0.5 * (pos / pos + 0.0);
      double local_t = -1.0;
      for (std::size_t k = 0; k < order.size();) {
        const double s = scores[order[k]];
        while (k < order.size() && scores[order[k]] == s) {
          (corpus[order[k]].hard ? fn : tn) += 1.0;
          ++k;
        }
        const double ba = 0.5 * ((pos - fn) / pos + tn / neg);
        if (ba > local_best) {
          local_best = ba;
          local_t = s;
        }
      }
      ++best.evaluated;
      if (local_best > best.balanced_accuracy) {
        best.balanced_accuracy = local_best;
        best.threshold = local_t;
        best.weights = w;
      }
    }
    std::size_t d = kFeatureCount;
    while (d > 0) {
      --d;
      if (++odo[d] < grid[d].size()) break;
      odo[d] = 0;
      if (d == 0) return best;
    }
  }
}

}  // namespace hadis

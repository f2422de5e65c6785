#include "denoise/synth.hpp"

#include <array>
#include <cmath>
#include <set>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "denoise/rng.hpp"

namespace denoise {

namespace {

struct Template {
  std::string_view fine;
  std::string_view text;
};

struct ClassSpec {
  std::string_view coarse;
  std::size_t weight;  // TREC train counts
  std::vector<Template> templates;
  std::vector<std::string_view> topics;
};

// Slots: {N} name, {A} acronym, {T} class topic, {S} shared noun,
// {V} verb, {P} past-tense verb, {J} adjective.
const std::vector<ClassSpec>& class_specs() {
  static const std::vector<ClassSpec> specs = {
      {"ABBR", 86,
       {{"exp", "What does {A} stand for ?"},
        {"exp", "What is the full form of {A} ?"},
        {"exp", "What does the abbreviation {A} mean ?"},
        {"exp", "{A} is an acronym for what ?"},
        {"abb", "What is the abbreviation for the {S} of {N} ?"},
        {"abb", "What is the short form of {N} {T} ?"}},
       {"acronym", "abbreviation", "initials", "letters", "stand", "short"}},
      {"DESC", 1162,
       {{"def", "What is {S} ?"},
        {"def", "What is a {T} {S} ?"},
        {"def", "What does {N} mean ?"},
        {"desc", "What is the {T} of the {N} {S} ?"},
        {"desc", "What are the {T} of {S} in {N} ?"},
        {"manner", "How did {N} {V} the {S} ?"},
        {"manner", "How do you {V} a {J} {S} ?"},
        {"manner", "How can I {V} {T} {S} ?"},
        {"reason", "Why did {N} {V} the {S} ?"},
        {"reason", "Why is the {S} {J} ?"},
        {"reason", "Why do {S} {V} in {N} ?"}},
       {"meaning", "definition", "origin", "purpose", "cause", "effect", "difference", "reason",
        "process", "history", "function", "nature", "theory", "way", "method", "idea"}},
      {"ENTY", 1250,
       {{"other", "What {T} did {N} {V} ?"},
        {"other", "What kind of {T} is {N} ?"},
        {"other", "What is the name of {N} 's {T} ?"},
        {"other", "What {T} is used in {S} ?"},
        {"other", "Name a {T} that {N} {P} ."},
        {"animal", "What {T} is the {J} {S} of {N} ?"},
        {"product", "What {T} was {P} by {N} ?"}},
       {"animal", "bird", "dog", "food", "drink", "sport", "game", "color", "instrument",
        "disease", "plant", "fruit", "language", "religion", "currency", "product", "car",
        "film", "novel", "award", "dish", "weapon", "vegetable", "flower", "fish"}},
      {"HUM", 1223,
       {{"ind", "Who {P} the {S} of {N} ?"},
        {"ind", "Who was the first {T} of {N} ?"},
        {"ind", "What {T} {P} the {J} {S} ?"},
        {"ind", "Who {P} {N} ?"},
        {"desc", "Who is {N} ?"},
        {"gr", "What {T} makes the {S} {N} ?"},
        {"title", "What was {N} 's {T} title ?"}},
       {"president", "king", "author", "inventor", "actor", "singer", "company", "team", "band",
        "painter", "scientist", "queen", "leader", "emperor", "player", "director", "poet",
        "composer", "astronaut", "founder", "coach", "explorer"}},
      {"LOC", 835,
       {{"other", "Where is {N} ?"},
        {"other", "Where did {N} {V} the {S} ?"},
        {"other", "What {T} is {N} in ?"},
        {"other", "In what {T} is the {S} of {N} ?"},
        {"city", "What is the capital of {N} ?"},
        {"country", "What {T} has the most {S} ?"},
        {"mount", "What is the highest {T} in {N} ?"}},
       {"city", "country", "state", "river", "mountain", "island", "continent", "lake", "ocean",
        "capital", "province", "region", "county", "desert", "port", "town", "valley"}},
      {"NUM", 896,
       {{"count", "How many {S} are in {N} ?"},
        {"date", "When did {N} {V} the {S} ?"},
        {"date", "What year was {N} {P} ?"},
        {"money", "How much does a {J} {S} cost ?"},
        {"dist", "How long is the {N} {S} ?"},
        {"dist", "How far is {N} from {N} ?"},
        {"count", "What is the {T} of {N} ?"},
        {"period", "How old is {N} ?"}},
       {"population", "number", "year", "date", "percentage", "temperature", "speed", "weight",
        "height", "length", "distance", "price", "size", "age", "depth", "area"}},
  };
  return specs;
}

constexpr std::array<std::string_view, 60> kSharedNouns = {
    "war", "water", "bridge", "tower", "ship", "moon", "sun", "star", "church", "school",
    "house", "road", "train", "book", "song", "painting", "computer", "machine", "money", "gold",
    "oil", "salt", "bread", "wine", "horse", "army", "ocean", "storm", "fire", "ice",
    "stone", "glass", "paper", "light", "sound", "heart", "blood", "brain", "tree", "forest",
    "rain", "snow", "wind", "festival", "treaty", "railroad", "canal", "museum", "temple", "castle",
    "market", "island", "flag", "law", "coin", "clock", "engine", "planet", "comet", "volcano"};

constexpr std::array<std::string_view, 24> kVerbs = {
    "develop", "invent",  "discover", "build",  "win",    "found",  "write",  "play",
    "cross",   "visit",   "create",   "design", "sign",   "leave",  "reach",  "open",
    "destroy", "explore", "measure",  "paint",  "defeat", "rule",   "name",   "sell"};

constexpr std::array<std::string_view, 24> kPastVerbs = {
    "developed", "invented", "discovered", "built",   "won",      "founded", "wrote",  "played",
    "crossed",   "visited",  "created",    "designed", "signed",  "left",    "reached", "opened",
    "destroyed", "explored", "measured",   "painted", "defeated", "ruled",   "named",  "sold"};

constexpr std::array<std::string_view, 20> kAdjectives = {
    "largest", "oldest", "famous", "first",   "best",    "red",    "ancient", "modern",
    "small",   "big",    "fastest", "longest", "tallest", "deepest", "new",   "great",
    "strange", "common", "rare",   "national"};

constexpr std::array<std::string_view, 14> kOnsets = {"b", "d", "f", "g", "k", "l", "m",
                                                      "n", "p", "r", "s", "t", "v", "z"};
constexpr std::array<std::string_view, 6> kVowels = {"a", "e", "i", "o", "u", "ar"};

std::vector<std::string> make_names(std::size_t count, Rng& rng) {
  std::set<std::string> seen;
  std::vector<std::string> names;
  while (names.size() < count) {
    const std::size_t syllables = 2 + rng.below(2);
    std::string w;
    for (std::size_t s = 0; s < syllables; ++s) {
      w += kOnsets[rng.below(kOnsets.size())];
      w += kVowels[rng.below(kVowels.size())];
    }
    if (rng.below(3) == 0) w += kOnsets[rng.below(kOnsets.size())];
    w[0] = static_cast<char>(w[0] - 'a' + 'A');
    if (seen.insert(w).second) names.push_back(std::move(w));
  }
  return names;
}

std::vector<std::string> make_acronyms(std::size_t count, Rng& rng) {
  std::set<std::string> seen;
  std::vector<std::string> out;
  while (out.size() < count) {
    const std::size_t len = 2 + rng.below(3);
    std::string a;
    for (std::size_t i = 0; i < len; ++i) a += static_cast<char>('A' + rng.below(26));
    if (seen.insert(a).second) out.push_back(std::move(a));
  }
  return out;
}

// Zipf(1) over [0, n) by inverse CDF on precomputed cumulative weights.
class Zipf {
 public:
  explicit Zipf(std::size_t n) : cdf_(n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      total += 1.0 / static_cast<double>(i + 1);
      cdf_[i] = total;
    }
    for (double& c : cdf_) c /= total;
  }
  std::size_t draw(Rng& rng) const {
    const double u = rng.uniform01();
    std::size_t lo = 0;
    std::size_t hi = cdf_.size() - 1;
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cdf_[mid] < u) lo = mid + 1; else hi = mid;
    }
    return lo;
  }

 private:
  std::vector<double> cdf_;
};

}  // namespace

std::string make_question_corpus(const SynthOptions& options) {
  if (options.name_pool < 10) throw std::invalid_argument("name pool too small");
  Rng pool_rng(options.pool_seed);
  const auto names = make_names(options.name_pool, pool_rng);
  const auto acronyms = make_acronyms(options.name_pool / 10, pool_rng);
  const Zipf name_dist(names.size());
  const Zipf acronym_dist(acronyms.size());

  const auto& specs = class_specs();
  std::size_t total_weight = 0;
  for (const auto& s : specs) total_weight += s.weight;

  Rng rng(options.seed);
  std::string out;
  for (std::size_t line = 0; line < options.count; ++line) {
    std::size_t pick = rng.below(total_weight);
    std::size_t cls = 0;
    while (pick >= specs[cls].weight) pick -= specs[cls++].weight;
    const ClassSpec& spec = specs[cls];
    const Template& tpl = spec.templates[rng.below(spec.templates.size())];

    // Occasionally borrow another class's topic word.
    const ClassSpec& topic_src = rng.uniform01() < 0.15 ? specs[rng.below(specs.size())] : spec;

    std::string text;
    const std::string_view t = tpl.text;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] == '{' && i + 2 < t.size() && t[i + 2] == '}') {
        switch (t[i + 1]) {
          case 'N': text += names[name_dist.draw(rng)]; break;
          case 'A': text += acronyms[acronym_dist.draw(rng)]; break;
          case 'T': text += topic_src.topics[rng.below(topic_src.topics.size())]; break;
          case 'S': text += kSharedNouns[rng.below(kSharedNouns.size())]; break;
          case 'V': text += kVerbs[rng.below(kVerbs.size())]; break;
          case 'P': text += kPastVerbs[rng.below(kPastVerbs.size())]; break;
          case 'J': text += kAdjectives[rng.below(kAdjectives.size())]; break;
          default: throw std::logic_error("bad template slot");
        }
        i += 2;
      } else {
        text += t[i];
      }
    }
    out += spec.coarse;
    out += ':';
    out += tpl.fine;
    out += ' ';
    out += text;
    out += '\n';
  }
  return out;
}

}  // namespace denoise

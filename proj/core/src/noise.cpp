#include "denoise/noise.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "denoise/rng.hpp"

namespace denoise {

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "random") return NoiseKind::kRandom;
  if (name == "token") return NoiseKind::kTokenConditional;
  if (name == "length") return NoiseKind::kLengthConditional;
  throw std::invalid_argument("unknown noise kind '" + std::string(name) +
                              "' (expected random, token or length)");
}

MatchMode parse_match_mode(std::string_view name) {
  if (name == "contains") return MatchMode::kContains;
  if (name == "starts_with") return MatchMode::kStartsWith;
  throw std::invalid_argument("unknown match mode '" + std::string(name) +
                              "' (expected contains or starts_with)");
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kRandom: return "random";
    case NoiseKind::kTokenConditional: return "token";
    case NoiseKind::kLengthConditional: return "length";
  }
  return "?";
}

std::string_view to_string(MatchMode mode) {
  return mode == MatchMode::kContains ? "contains" : "starts_with";
}

void NoiseSpec::validate() const {
  if (!(level >= 0.0 && level <= 1.0)) throw std::invalid_argument("noise level must lie in [0, 1]");
  if (kind == NoiseKind::kTokenConditional && trigger_tokens.empty()) {
    throw std::invalid_argument("token-conditional noise requires trigger tokens");
  }
  if (kind == NoiseKind::kLengthConditional && level <= 0.0) {
    throw std::invalid_argument("length-conditional noise requires a fraction in (0, 1]");
  }
}

std::string NoiseReport::to_json() const {
  nlohmann::ordered_json j;
  j["total_count"] = total_count;
  j["eligible_count"] = eligible_count;
  j["selected_count"] = selected_count;
  j["flipped_count"] = flipped_count;
  j["realized_noise_fraction"] = realized_noise_fraction;
  j["per_class_flip_matrix"] = flip_matrix;
  j["selected_ids"] = selected_ids;
  return j.dump(2) + "\n";
}

namespace {

std::size_t exact_count(double level, std::size_t n) {
  return static_cast<std::size_t>(std::llround(level * static_cast<double>(n)));
}

// Flips each selected example (positions into `dataset.examples`) to a
// uniformly drawn class other than its original one. Positions are processed
// in ascending order so the draw sequence is fixed.
NoiseResult flip_selected(const Dataset& dataset, std::vector<std::size_t> positions,
                          std::size_t eligible, Rng& rng) {
  const std::size_t classes = dataset.num_classes;
  if (classes < 2) throw std::invalid_argument("label noise needs at least 2 classes");

  NoiseResult out{dataset, {}};
  auto& report = out.report;
  report.total_count = dataset.size();
  report.eligible_count = eligible;
  report.flip_matrix.assign(classes, std::vector<std::size_t>(classes, 0));

  std::sort(positions.begin(), positions.end());
  for (std::size_t pos : positions) {
    Example& ex = out.dataset.examples[pos];
    const Label original = ex.clean_label;
    if (original < 0) throw std::invalid_argument("cannot inject noise into poisoned labels");
    auto draw = static_cast<Label>(rng.below(classes - 1));
    if (draw >= original) ++draw;
    ex.noisy_label = draw;
    if (draw != original) ++report.flipped_count;
    report.selected_ids.push_back(ex.id);
  }
  report.selected_count = positions.size();

  std::size_t mismatched = 0;
  for (const auto& ex : out.dataset.examples) {
    if (ex.clean_label < 0) continue;
    ++report.flip_matrix[static_cast<std::size_t>(ex.clean_label)]
                        [static_cast<std::size_t>(ex.noisy_label)];
    if (ex.noisy_label != ex.clean_label) ++mismatched;
  }
  report.realized_noise_fraction =
      dataset.empty() ? 0.0 : static_cast<double>(mismatched) / static_cast<double>(dataset.size());
  return out;
}

// Uniform choice of k positions out of `pool` without replacement.
std::vector<std::size_t> choose(std::vector<std::size_t> pool, std::size_t k, Rng& rng) {
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(pool.size() - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

void check_level(double level) {
  if (!(level >= 0.0 && level <= 1.0)) throw std::invalid_argument("noise level must lie in [0, 1]");
}

}  // namespace

NoiseResult inject_random(const Dataset& dataset, double level, std::uint64_t seed) {
  check_level(level);
  if (dataset.num_classes < 2) throw std::invalid_argument("label noise needs at least 2 classes");
  Rng rng(seed);
  std::vector<std::size_t> pool(dataset.size());
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  auto chosen = choose(std::move(pool), exact_count(level, dataset.size()), rng);
  return flip_selected(dataset, std::move(chosen), dataset.size(), rng);
}

bool matches_triggers(std::string_view text, const std::vector<std::string>& triggers,
                      MatchMode mode) {
  const auto tokens = raw_tokens(text);
  auto is_trigger = [&](const std::string& tok) {
    return std::find(triggers.begin(), triggers.end(), tok) != triggers.end();
  };
  if (mode == MatchMode::kStartsWith) return !tokens.empty() && is_trigger(tokens.front());
  return std::any_of(tokens.begin(), tokens.end(), is_trigger);
}

NoiseResult inject_token_conditional(const Dataset& dataset,
                                     const std::vector<std::string>& triggers,
                                     MatchMode mode, double level, std::uint64_t seed) {
  check_level(level);
  if (triggers.empty()) throw std::invalid_argument("token-conditional noise requires trigger tokens");
  if (dataset.num_classes < 2) throw std::invalid_argument("label noise needs at least 2 classes");
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (matches_triggers(dataset.examples[i].text, triggers, mode)) eligible.push_back(i);
  }
  if (eligible.empty()) throw std::invalid_argument("no samples match triggers");
  Rng rng(seed);
  const std::size_t n_eligible = eligible.size();
  auto chosen = choose(std::move(eligible), exact_count(level, n_eligible), rng);
  return flip_selected(dataset, std::move(chosen), n_eligible, rng);
}

NoiseResult inject_length_conditional(const Dataset& dataset, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("length-conditional fraction must lie in (0, 1]");
  }
  if (dataset.num_classes < 2) throw std::invalid_argument("label noise needs at least 2 classes");
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& ex = dataset.examples;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (ex[a].text_length != ex[b].text_length) return ex[a].text_length > ex[b].text_length;
    return ex[a].id < ex[b].id;
  });
  order.resize(exact_count(fraction, dataset.size()));
  Rng rng(seed);
  return flip_selected(dataset, std::move(order), dataset.size(), rng);
}

NoiseResult inject_noise(const Dataset& dataset, const NoiseSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case NoiseKind::kRandom: return inject_random(dataset, spec.level, spec.seed);
    case NoiseKind::kTokenConditional:
      return inject_token_conditional(dataset, spec.trigger_tokens, spec.match_mode, spec.level,
                                      spec.seed);
    case NoiseKind::kLengthConditional:
      return inject_length_conditional(dataset, spec.level, spec.seed);
  }
  throw std::invalid_argument("unknown noise kind");
}

std::string format_tsv(const Dataset& dataset) {
  std::string out = "id\tnoisy_label\tclean_label\ttext\n";
  for (const auto& ex : dataset.examples) {
    out += std::to_string(ex.id);
    out += '\t';
    out += std::to_string(ex.noisy_label);
    out += '\t';
    out += std::to_string(ex.clean_label);
    out += '\t';
    for (char c : ex.text) {
      switch (c) {
        case '\t': out += "\\t"; break;
        case '\n': out += "\\n"; break;
        case '\r': out += "\\r"; break;
        case '\\': out += "\\\\"; break;
        default: out += c;
      }
    }
    out += '\n';
  }
  return out;
}

void write_noisy_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const std::string body = format_tsv(dataset);
  out.write(body.data(), static_cast<std::streamsize>(body.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace denoise

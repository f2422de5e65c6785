// Seeded label corruption: random, token-conditional and length-conditional.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "denoise/data.hpp"

namespace denoise {

enum class NoiseKind { kRandom, kTokenConditional, kLengthConditional };
enum class MatchMode { kContains, kStartsWith };

NoiseKind parse_noise_kind(std::string_view name);  // random | token | length
MatchMode parse_match_mode(std::string_view name);  // contains | starts_with
std::string_view to_string(NoiseKind kind);
std::string_view to_string(MatchMode mode);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::kRandom;
  double level = 0.0;
  std::vector<std::string> trigger_tokens;
  MatchMode match_mode = MatchMode::kStartsWith;
  std::uint64_t seed = 0;

  /// Throws std::invalid_argument when the invariants do not hold.
  void validate() const;
};

struct NoiseReport {
  std::size_t total_count = 0;
  std::size_t eligible_count = 0;
  std::size_t selected_count = 0;
  std::size_t flipped_count = 0;
  double realized_noise_fraction = 0.0;
  /// rows: original (clean) class, cols: emitted noisy class
  std::vector<std::vector<std::size_t>> flip_matrix;
  std::vector<std::size_t> selected_ids;

  std::string to_json() const;
};

struct NoiseResult {
  Dataset dataset;
  NoiseReport report;
};

NoiseResult inject_random(const Dataset& dataset, double level, std::uint64_t seed);

NoiseResult inject_token_conditional(const Dataset& dataset,
                                     const std::vector<std::string>& triggers,
                                     MatchMode mode, double level, std::uint64_t seed);

NoiseResult inject_length_conditional(const Dataset& dataset, double fraction, std::uint64_t seed);

/// Dispatches on spec.kind.
NoiseResult inject_noise(const Dataset& dataset, const NoiseSpec& spec);

/// Raw-token eligibility test used by the token-conditional protocol.
bool matches_triggers(std::string_view text, const std::vector<std::string>& triggers,
                      MatchMode mode);

/// Internal TSV format: header, then `id \t noisy \t clean \t escaped-text`.
std::string format_tsv(const Dataset& dataset);
void write_noisy_dataset(const Dataset& dataset, const std::filesystem::path& path);

}  // namespace denoise

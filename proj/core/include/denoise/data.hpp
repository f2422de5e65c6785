// Dataset ingestion: TREC, AG-News and the internal noisy-label TSV.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "denoise/numerics.hpp"

namespace denoise {

using Label = int;

/// Written into clean_label by the no-peeking audit. Never a valid class.
inline constexpr Label kPoisonedLabel = -1;

enum class Split { kTrain, kValidation, kTest };
enum class DataFormat { kTrec, kAgNews, kTsv };

DataFormat parse_data_format(std::string_view name);
std::string_view to_string(DataFormat format);
std::string_view to_string(Split split);

inline constexpr std::string_view kUnkToken = "<unk>";
inline constexpr std::int32_t kUnkId = 0;

/// Whitespace split with leading/trailing punctuation stripped from each
/// token; tokens made only of punctuation are kept whole. Case is preserved.
std::vector<std::string> raw_tokens(std::string_view text);

/// raw_tokens, lowercased; an empty result becomes {"<unk>"}.
std::vector<std::string> tokenize(std::string_view text);

class Vocab {
 public:
  /// Frequency-ordered vocabulary over `texts` (ties lexicographic), id 0 is UNK.
  static Vocab build(const std::vector<std::string>& texts, std::size_t min_freq = 1);

  std::int32_t id(std::string_view token) const;
  const std::string& token(std::int32_t id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

struct Example {
  std::size_t id = 0;
  std::string text;                 // raw text as loaded
  std::vector<std::int32_t> tokens;  // filled by Dataset::encode
  Label noisy_label = 0;
  Label clean_label = 0;  // diagnostics only
  std::size_t text_length = 0;  // token count of tokenize(text)

  friend bool operator==(const Example&, const Example&) = default;
};

struct Dataset {
  std::vector<Example> examples;
  std::size_t num_classes = 0;
  std::vector<std::string> label_names;  // may be empty for tsv input
  Split split = Split::kTrain;
  std::shared_ptr<const Vocab> vocab;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }

  /// Maps every example's text to token ids under `v` (OOV -> UNK).
  void encode(std::shared_ptr<const Vocab> v);

  std::vector<std::string> texts() const;
};

struct LoadOptions {
  /// Forces the class count for tsv input; 0 infers max label + 1.
  std::size_t num_classes = 0;
  /// Accept kPoisonedLabel in the tsv clean_label column.
  bool allow_poisoned = false;
};

/// Coarse TREC classes in their canonical order.
const std::vector<std::string>& trec_labels();

Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     const LoadOptions& options = {});
Dataset parse_dataset(std::string_view content, DataFormat format,
                      const LoadOptions& options = {});

struct SplitResult {
  Dataset train;
  Dataset validation;
};

/// Seeded shuffle, then the first round(fraction * N) examples go to
/// validation. Ids are retained; each half is returned in ascending id order.
SplitResult split_validation(const Dataset& train, double fraction, std::uint64_t seed);

struct EmbeddingLoad {
  Matrix table;  // vocab.size() x dim
  std::size_t covered = 0;
};

/// Reads "token v1 ... vdim" lines. Rows for tokens missing from the file are
/// uniform in [-0.1, 0.1] drawn with `seed`.
EmbeddingLoad load_embeddings(const std::filesystem::path& path, const Vocab& vocab,
                              std::size_t dim, std::uint64_t seed);

std::string read_file(const std::filesystem::path& path);

}  // namespace denoise

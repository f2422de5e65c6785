#include "denoise/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "denoise/rng.hpp"

namespace denoise {

DataFormat parse_data_format(std::string_view name) {
  if (name == "trec") return DataFormat::kTrec;
  if (name == "agnews") return DataFormat::kAgNews;
  if (name == "tsv") return DataFormat::kTsv;
  throw std::invalid_argument("unknown data format '" + std::string(name) +
                              "' (expected trec, agnews or tsv)");
}

std::string_view to_string(DataFormat format) {
  switch (format) {
    case DataFormat::kTrec: return "trec";
    case DataFormat::kAgNews: return "agnews";
    case DataFormat::kTsv: return "tsv";
  }
  return "?";
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Tokenization

namespace {

bool is_ascii_punct(unsigned char c) {
  return (c >= 0x21 && c <= 0x2f) || (c >= 0x3a && c <= 0x40) || (c >= 0x5b && c <= 0x60) ||
         (c >= 0x7b && c <= 0x7e);
}

// Length in bytes of a whitespace code point starting at s[i], or 0.
std::size_t whitespace_len(std::string_view s, std::size_t i) {
  const auto c = static_cast<unsigned char>(s[i]);
  if (c == ' ' || (c >= 0x09 && c <= 0x0d)) return 1;
  if (c == 0xc2 && i + 1 < s.size()) {
    const auto d = static_cast<unsigned char>(s[i + 1]);
    if (d == 0x85 || d == 0xa0) return 2;  // NEL, NBSP
  }
  if (c == 0xe1 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x9a &&
      static_cast<unsigned char>(s[i + 2]) == 0x80) {
    return 3;  // U+1680
  }
  if (c == 0xe2 && i + 2 < s.size()) {
    const auto d = static_cast<unsigned char>(s[i + 1]);
    const auto e = static_cast<unsigned char>(s[i + 2]);
    if (d == 0x80 && ((e >= 0x80 && e <= 0x8a) || e == 0xa8 || e == 0xa9 || e == 0xaf)) return 3;
    if (d == 0x81 && e == 0x9f) return 3;  // U+205F
  }
  if (c == 0xe3 && i + 2 < s.size() && static_cast<unsigned char>(s[i + 1]) == 0x80 &&
      static_cast<unsigned char>(s[i + 2]) == 0x80) {
    return 3;  // U+3000
  }
  return 0;
}

std::string strip_punct(std::string_view word) {
  std::size_t lo = 0;
  std::size_t hi = word.size();
  while (lo < hi && is_ascii_punct(static_cast<unsigned char>(word[lo]))) ++lo;
  while (hi > lo && is_ascii_punct(static_cast<unsigned char>(word[hi - 1]))) --hi;
  if (lo == hi) return std::string(word);  // standalone punctuation is kept
  return std::string(word.substr(lo, hi - lo));
}

}  // namespace

std::vector<std::string> raw_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  std::size_t start = 0;
  bool in_word = false;
  while (i < text.size()) {
    const std::size_t ws = whitespace_len(text, i);
    if (ws > 0) {
      if (in_word) out.push_back(strip_punct(text.substr(start, i - start)));
      in_word = false;
      i += ws;
    } else {
      if (!in_word) start = i;
      in_word = true;
      ++i;
    }
  }
  if (in_word) out.push_back(strip_punct(text.substr(start)));
  return out;
}

std::vector<std::string> tokenize(std::string_view text) {
  auto tokens = raw_tokens(text);
  for (auto& t : tokens) {
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) {
      return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : static_cast<char>(c);
    });
  }
  if (tokens.empty()) tokens.emplace_back(kUnkToken);
  return tokens;
}

// ---------------------------------------------------------------------------
// Vocab

Vocab Vocab::build(const std::vector<std::string>& texts, std::size_t min_freq) {
  if (min_freq < 1) throw std::invalid_argument("min_freq must be >= 1");
  if (texts.empty()) throw std::invalid_argument("cannot build a vocabulary from an empty corpus");

  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto& tok : tokenize(text)) ++counts[std::move(tok)];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (auto& [tok, n] : counts) {
    if (n >= min_freq && tok != kUnkToken) ranked.emplace_back(tok, n);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  Vocab v;
  v.tokens_.emplace_back(kUnkToken);
  for (auto& [tok, n] : ranked) v.tokens_.push_back(tok);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    v.index_.emplace(v.tokens_[i], static_cast<std::int32_t>(i));
  }
  return v;
}

std::int32_t Vocab::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnkId : it->second;
}

void Dataset::encode(std::shared_ptr<const Vocab> v) {
  vocab = std::move(v);
  for (auto& ex : examples) {
    ex.tokens.clear();
    for (const auto& tok : tokenize(ex.text)) ex.tokens.push_back(vocab->id(tok));
  }
}

std::vector<std::string> Dataset::texts() const {
  std::vector<std::string> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) out.push_back(ex.text);
  return out;
}

// ---------------------------------------------------------------------------
// Loaders

const std::vector<std::string>& trec_labels() {
  static const std::vector<std::string> labels = {"ABBR", "DESC", "ENTY", "HUM", "LOC", "NUM"};
  return labels;
}

namespace {

const std::vector<std::string>& agnews_labels() {
  static const std::vector<std::string> labels = {"World", "Sports", "Business", "Sci/Tech"};
  return labels;
}

[[noreturn]] void fail_line(std::size_t line_no, const std::string& what) {
  throw std::runtime_error("line " + std::to_string(line_no) + ": " + what);
}

std::vector<std::string_view> split_lines(std::string_view content) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < content.size()) {
    std::size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  return lines;
}

Example make_example(std::size_t id, std::string text, Label label) {
  Example ex;
  ex.id = id;
  ex.text_length = tokenize(text).size();
  ex.text = std::move(text);
  ex.noisy_label = label;
  ex.clean_label = label;
  return ex;
}

Dataset parse_trec(std::string_view content) {
  Dataset ds;
  ds.label_names = trec_labels();
  ds.num_classes = ds.label_names.size();
  const auto lines = split_lines(content);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    std::string_view line = lines[n];
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    const std::size_t colon = line.find(':');
    const std::size_t space = line.find(' ');
    if (colon == std::string_view::npos || space == std::string_view::npos || colon > space) {
      fail_line(n + 1, "expected 'COARSE:fine text'");
    }
    const std::string coarse(line.substr(0, colon));
    const auto& names = ds.label_names;
    auto it = std::find(names.begin(), names.end(), coarse);
    if (it == names.end()) fail_line(n + 1, "unknown label '" + coarse + "'");
    std::string text(line.substr(space + 1));
    ds.examples.push_back(make_example(ds.examples.size(), std::move(text),
                                       static_cast<Label>(it - names.begin())));
  }
  return ds;
}

// RFC-4180 style fields on a single line.
std::vector<std::string> parse_csv_line(std::string_view line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  std::size_t i = 0;
  for (;;) {
    cur.clear();
    if (i < line.size() && line[i] == '"') {
      ++i;
      for (;;) {
        if (i >= line.size()) fail_line(line_no, "unterminated quoted field");
        if (line[i] == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            cur.push_back('"');
            i += 2;
          } else {
            ++i;
            break;
          }
        } else {
          cur.push_back(line[i++]);
        }
      }
      if (i < line.size() && line[i] != ',') fail_line(line_no, "garbage after quoted field");
    } else {
      while (i < line.size() && line[i] != ',') cur.push_back(line[i++]);
    }
    fields.push_back(cur);
    if (i >= line.size()) break;
    ++i;  // comma
  }
  return fields;
}

Dataset parse_agnews(std::string_view content) {
  Dataset ds;
  ds.label_names = agnews_labels();
  ds.num_classes = ds.label_names.size();
  const auto lines = split_lines(content);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    if (lines[n].empty()) continue;
    auto fields = parse_csv_line(lines[n], n + 1);
    if (fields.size() != 3) {
      fail_line(n + 1, "expected 3 columns, found " + std::to_string(fields.size()));
    }
    int cls = 0;
    const auto& f = fields[0];
    auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), cls);
    if (ec != std::errc() || ptr != f.data() + f.size() || cls < 1 ||
        cls > static_cast<int>(ds.num_classes)) {
      fail_line(n + 1, "unknown label '" + f + "'");
    }
    std::string text = fields[1] + " " + fields[2];
    ds.examples.push_back(make_example(ds.examples.size(), std::move(text), cls - 1));
  }
  return ds;
}

std::string unescape_tsv(std::string_view s, std::size_t line_no) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out.push_back(s[i]);
      continue;
    }
    if (++i >= s.size()) fail_line(line_no, "dangling escape");
    switch (s[i]) {
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'r': out.push_back('\r'); break;
      case '\\': out.push_back('\\'); break;
      default: fail_line(line_no, "bad escape sequence");
    }
  }
  return out;
}

template <typename T>
T parse_int(std::string_view s, std::size_t line_no, const char* what) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail_line(line_no, std::string("invalid ") + what + " '" + std::string(s) + "'");
  }
  return value;
}

Dataset parse_tsv(std::string_view content, const LoadOptions& options) {
  const auto lines = split_lines(content);
  if (lines.empty() || lines[0] != "id\tnoisy_label\tclean_label\ttext") {
    fail_line(1, "expected header 'id\\tnoisy_label\\tclean_label\\ttext'");
  }
  Dataset ds;
  std::unordered_set<std::size_t> seen;
  Label max_label = -1;
  for (std::size_t n = 1; n < lines.size(); ++n) {
    std::string_view line = lines[n];
    if (line.empty()) continue;
    std::string_view cols[4];
    std::size_t pos = 0;
    for (int c = 0; c < 3; ++c) {
      const std::size_t tab = line.find('\t', pos);
      if (tab == std::string_view::npos) fail_line(n + 1, "expected 4 tab-separated columns");
      cols[c] = line.substr(pos, tab - pos);
      pos = tab + 1;
    }
    cols[3] = line.substr(pos);
    if (cols[3].find('\t') != std::string_view::npos) fail_line(n + 1, "too many columns");

    Example ex;
    ex.id = parse_int<std::size_t>(cols[0], n + 1, "id");
    ex.noisy_label = parse_int<Label>(cols[1], n + 1, "noisy_label");
    ex.clean_label = parse_int<Label>(cols[2], n + 1, "clean_label");
    if (ex.noisy_label < 0) fail_line(n + 1, "negative noisy_label");
    if (ex.clean_label < 0 && !(options.allow_poisoned && ex.clean_label == kPoisonedLabel)) {
      fail_line(n + 1, "negative clean_label");
    }
    if (!seen.insert(ex.id).second) fail_line(n + 1, "duplicate id " + std::to_string(ex.id));
    ex.text = unescape_tsv(cols[3], n + 1);
    ex.text_length = tokenize(ex.text).size();
    max_label = std::max({max_label, ex.noisy_label, ex.clean_label});
    ds.examples.push_back(std::move(ex));
  }
  ds.num_classes = options.num_classes > 0 ? options.num_classes
                                           : static_cast<std::size_t>(max_label + 1);
  for (const auto& ex : ds.examples) {
    if (static_cast<std::size_t>(ex.noisy_label) >= ds.num_classes ||
        (ex.clean_label >= 0 && static_cast<std::size_t>(ex.clean_label) >= ds.num_classes)) {
      throw std::runtime_error("label out of range for " + std::to_string(ds.num_classes) +
                               " classes in example " + std::to_string(ex.id));
    }
  }
  return ds;
}

}  // namespace

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Dataset parse_dataset(std::string_view content, DataFormat format, const LoadOptions& options) {
  switch (format) {
    case DataFormat::kTrec: return parse_trec(content);
    case DataFormat::kAgNews: return parse_agnews(content);
    case DataFormat::kTsv: return parse_tsv(content, options);
  }
  throw std::invalid_argument("unknown format");
}

Dataset load_dataset(const std::filesystem::path& path, DataFormat format,
                     const LoadOptions& options) {
  const std::string content = read_file(path);
  try {
    return parse_dataset(content, format, options);
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

SplitResult split_validation(const Dataset& train, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw std::invalid_argument("validation fraction must lie in (0, 1)");
  }
  const std::size_t n = train.size();
  const auto n_valid = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (n_valid == 0 || n_valid >= n) {
    throw std::invalid_argument("validation fraction " + std::to_string(fraction) + " leaves an empty split for " +
                                std::to_string(n) + " examples");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::size_t> valid_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_valid));
  std::vector<std::size_t> train_idx(order.begin() + static_cast<std::ptrdiff_t>(n_valid), order.end());
  std::sort(valid_idx.begin(), valid_idx.end());
  std::sort(train_idx.begin(), train_idx.end());

  SplitResult out;
  auto fill = [&](Dataset& dst, const std::vector<std::size_t>& idx, Split split) {
    dst.num_classes = train.num_classes;
    dst.label_names = train.label_names;
    dst.vocab = train.vocab;
    dst.split = split;
    dst.examples.reserve(idx.size());
    for (std::size_t i : idx) dst.examples.push_back(train.examples[i]);
  };
  fill(out.train, train_idx, Split::kTrain);
  fill(out.validation, valid_idx, Split::kValidation);
  return out;
}

EmbeddingLoad load_embeddings(const std::filesystem::path& path, const Vocab& vocab,
                              std::size_t dim, std::uint64_t seed) {
  EmbeddingLoad out;
  out.table = Matrix(vocab.size(), dim);
  Rng rng(seed);
  for (double& w : out.table.values()) w = rng.uniform(-0.1, 0.1);

  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::vector<bool> seen(vocab.size(), false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    double x;
    while (fields >> x) values.push_back(x);
    if (!fields.eof()) throw std::runtime_error("non-numeric embedding value for token '" + token + "'");
    if (values.size() != dim) {
      throw std::runtime_error("embedding for token '" + token + "' has " +
                               std::to_string(values.size()) + " values, expected " +
                               std::to_string(dim));
    }
    const std::int32_t id = vocab.id(token);
    if (id == kUnkId) continue;
    const auto row = static_cast<std::size_t>(id);
    std::copy(values.begin(), values.end(), out.table.row(row).begin());
    if (!seen[row]) {
      seen[row] = true;
      ++out.covered;
    }
  }
  return out;
}

}  // namespace denoise

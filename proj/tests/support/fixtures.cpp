#include "fixtures.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "denoise/noise.hpp"
#include "denoise/rng.hpp"
#include "denoise/synth.hpp"

namespace fs = std::filesystem;

namespace denoise::testing {

TempDir::TempDir() {
  static std::uint64_t counter = 0;
  Rng rng(std::random_device{}());
  for (int attempt = 0; attempt < 100; ++attempt) {
    const auto name = "denoise-test-" + std::to_string(rng.next_u64() % 1000000000ULL) + "-" +
                      std::to_string(counter++);
    const auto p = fs::temp_directory_path() / name;
    if (fs::create_directory(p)) {
      path_ = p;
      return;
    }
  }
  throw std::runtime_error("cannot create temp dir");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

std::string slurp(const fs::path& path) { return read_file(path); }

void spit(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

Dataset make_dataset(const std::vector<std::pair<std::string, Label>>& rows, std::size_t num_classes) {
  Dataset ds;
  ds.num_classes = num_classes;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    Example ex;
    ex.id = i;
    ex.text = rows[i].first;
    ex.noisy_label = ex.clean_label = rows[i].second;
    ex.text_length = tokenize(ex.text).size();
    ds.examples.push_back(std::move(ex));
  }
  return ds;
}

Dataset random_dataset(std::size_t n, std::size_t num_classes, std::uint64_t seed) {
  static const char* words[] = {"alpha", "beta", "gamma", "delta", "How", "What", "AP", "Reuters",
                                "river", "stone", "moon", "seven", "blue", "went", "is", "the"};
  Rng rng(seed);
  std::vector<std::pair<std::string, Label>> rows;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t len = 1 + rng.below(12);
    std::string text;
    for (std::size_t k = 0; k < len; ++k) {
      if (k) text += ' ';
      text += words[rng.below(std::size(words))];
    }
    rows.emplace_back(text, static_cast<Label>(rng.below(num_classes)));
  }
  return make_dataset(rows, num_classes);
}

std::pair<std::string, std::string> real_trec_paths() {
  const char* train = std::getenv("DENOISE_TREC_TRAIN");
  const char* test = std::getenv("DENOISE_TREC_TEST");
  if (train && test && *train && *test) return {train, test};
  return {};
}

std::pair<std::string, std::string> question_corpus() {
  const auto [train_path, test_path] = real_trec_paths();
  if (!train_path.empty()) return {read_file(train_path), read_file(test_path)};
  SynthOptions train_opts;
  SynthOptions test_opts;
  test_opts.count = 500;
  test_opts.seed = 2;
  return {make_question_corpus(train_opts), make_question_corpus(test_opts)};
}

ExperimentData noisy_question_data(double level) {
  const auto [train_text, test_text] = question_corpus();
  Dataset raw = parse_dataset(train_text, DataFormat::kTrec);
  // 503 of 5452 goes to validation, leaving 4949 for training.
  auto parts = split_validation(raw, 503.0 / 5452.0, 7);
  auto train = inject_random(parts.train, level, 11).dataset;
  auto valid = inject_random(parts.validation, level, 12).dataset;
  Dataset test = parse_dataset(test_text, DataFormat::kTrec);
  test.split = Split::kTest;
  return prepare_data(std::move(train), std::move(valid), std::move(test));
}

TrainConfig gap_config(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.t0 = 9;
  c.epochs = 60;
  c.beta = 10.0;
  c.lr = 3e-4;
  c.seed = 1;
  return c;
}

}  // namespace denoise::testing

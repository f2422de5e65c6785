// Shared helpers for unit and acceptance tests.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "denoise/data.hpp"
#include "denoise/training.hpp"

namespace denoise::testing {

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::string slurp(const std::filesystem::path& path);
void spit(const std::filesystem::path& path, const std::string& text);

/// Dataset with one example per (text, label), ids 0..n-1, clean = noisy.
Dataset make_dataset(const std::vector<std::pair<std::string, Label>>& rows, std::size_t num_classes);

/// n examples over `num_classes` classes with random short texts.
Dataset random_dataset(std::size_t n, std::size_t num_classes, std::uint64_t seed);

/// Paths of the real TREC files when DENOISE_TREC_TRAIN and DENOISE_TREC_TEST
/// are both set; empty otherwise.
std::pair<std::string, std::string> real_trec_paths();

/// Raw TREC-format train (5452 lines) and test (500 lines) text: the real
/// files when available, the synthetic corpus otherwise.
std::pair<std::string, std::string> question_corpus();

/// Train/validation/test with random label noise at `level` on train and
/// validation (4949/503/500 examples), encoded and ready for training.
ExperimentData noisy_question_data(double level);

/// Settings used by the overfitting-gap runs.
TrainConfig gap_config(TrainMode mode);

}  // namespace denoise::testing

// Warmup -> beta-mixture fit -> de-noising phase, with Best/Last tracking.
#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "denoise/bmm.hpp"
#include "denoise/data.hpp"
#include "denoise/model.hpp"
#include "denoise/numerics.hpp"
#include "denoise/rng.hpp"

namespace denoise {

enum class TrainMode { kBaseline, kDnSoft, kDnHard };

TrainMode parse_train_mode(std::string_view name);  // baseline | dn-soft | dn-hard
std::string_view to_string(TrainMode mode);

struct TrainConfig {
  std::size_t t0 = 9;        // warmup epochs
  std::size_t epochs = 60;   // total epochs T
  double beta = 4.0;
  TrainMode mode = TrainMode::kDnHard;
  RepMode rep_mode = RepMode::kLogits;
  double lr = 1e-3;
  std::size_t batch_size = 32;
  double dropout = 0.3;
  std::size_t dim = 50;
  std::size_t hidden = 128;
  std::uint64_t seed = 1;
  std::size_t eval_every = 1;

  /// Throws std::invalid_argument naming the violated constraint.
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::string phase;  // warmup | denoise | baseline
  double train_loss = 0.0;
  bool evaluated = false;
  double valid_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Quality of the clean/noisy split implied by the posteriors, measured
/// against the clean_label column. Never used for training or selection.
struct BmmDiagnostics {
  bool fitted = false;
  bool fallback = false;
  std::string fallback_reason;
  /// Samples whose clean label is known; the fields below cover only these.
  std::size_t labelled_count = 0;
  std::optional<double> separation_accuracy;
  std::optional<double> auc;
  std::optional<double> clean_mean_loss;
  std::optional<double> noisy_mean_loss;
  std::size_t noisy_count = 0;
  std::size_t predicted_clean_count = 0;
};

struct MetricsReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_valid_accuracy = 0.0;
  double best_test_accuracy = 0.0;
  double last_test_accuracy = 0.0;
  double gap = 0.0;  // last - best
  BmmDiagnostics bmm_diagnostics;

  std::string to_json(const TrainConfig& config) const;
};

struct ExperimentData {
  Dataset train;       // noisy labels
  Dataset validation;  // noisy labels
  Dataset test;        // clean labels
};

/// Builds the vocabulary from `train` and encodes all three splits with it.
ExperimentData prepare_data(Dataset train, Dataset validation, Dataset test,
                            std::size_t min_freq = 1);

/// Replaces every clean_label in train and validation with kPoisonedLabel.
void poison_clean_labels(ExperimentData& data);

enum class LabelColumn { kNoisy, kClean };

/// Fraction of examples whose eval-mode argmax(logits_c) equals the chosen
/// label column.
double evaluate(const ClassifierParams& cls, const Dataset& split, LabelColumn column);

/// Per-sample CE of eval-mode M against the noisy labels; no parameter update.
std::vector<double> record_losses(const ClassifierParams& cls, const Dataset& train);

BmmDiagnostics diagnose_posteriors(const PosteriorTable& table, const Dataset& train,
                                   std::span<const double> raw_losses);

/// One run of the full procedure. Holds all mutable training state.
class Trainer {
 public:
  Trainer(TrainConfig config, const ExperimentData& data,
          std::optional<Matrix> initial_embeddings = std::nullopt);

  /// T0 epochs of CE on M, then a no-dropout loss recording pass.
  std::vector<double> run_warmup();

  /// Epochs T0+1..T with the configured objective.
  void run_denoise_phase(const PosteriorTable& posteriors);

  const ClassifierParams& classifier() const { return classifier_; }
  const std::optional<NoiseHeadParams>& noise_head() const { return noise_head_; }
  const MetricsReport& report() const { return report_; }
  MetricsReport& report() { return report_; }

  struct Snapshot {
    ClassifierParams classifier;
    std::optional<NoiseHeadParams> noise_head;
  };
  const Snapshot& best_snapshot() const { return best_; }

 private:
  double train_epoch_ce();
  double train_epoch_denoise(const PosteriorTable& posteriors, LossVariant variant);
  void end_epoch(std::size_t epoch, const std::string& phase, double loss);
  std::vector<std::size_t> epoch_order();

  TrainConfig config_;
  const ExperimentData& data_;
  ClassifierParams classifier_;
  std::optional<NoiseHeadParams> noise_head_;
  std::vector<AdamState> classifier_adam_;
  std::vector<AdamState> noise_adam_;
  Rng shuffle_rng_;
  Rng dropout_rng_;
  std::size_t epoch_ = 0;
  MetricsReport report_;
  Snapshot best_;
};

struct ExperimentResult {
  MetricsReport report;
  std::optional<BetaMixture> mixture;
  PosteriorTable posteriors;
  std::vector<double> raw_losses;
  NormalizedLosses normalized;
};

struct ExperimentOptions {
  std::optional<std::filesystem::path> embeddings_path;
  /// Hash of the effective configuration, stamped into checkpoints.
  std::uint64_t config_hash = 0;
};

/// Warmup, mixture fit, posterior table, then the configured phase. When
/// `out_dir` is set, writes metrics.json, bmm.json, losses_T0.csv,
/// best.ckpt, last.ckpt and vocab.txt there.
ExperimentResult run_experiment(const TrainConfig& config, const ExperimentData& data,
                                const std::optional<std::filesystem::path>& out_dir,
                                const ExperimentOptions& options = {});

/// Names of the files run_experiment writes.
const std::vector<std::string>& experiment_output_files();

std::string format_losses_csv(const Dataset& train, std::span<const double> raw,
                              std::span<const double> normalized, const PosteriorTable& table);

}  // namespace denoise

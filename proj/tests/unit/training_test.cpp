#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <gtest/gtest.h>
#include <json.hpp>

#include "denoise/checkpoint.hpp"
#include "denoise/noise.hpp"
#include "denoise/synth.hpp"
#include "denoise/training.hpp"
#include "fixtures.hpp"

namespace denoise {
namespace {

using testing::TempDir;

ExperimentData small_data(double level, std::size_t count = 800) {
  SynthOptions train_opts;
  train_opts.count = count;
  SynthOptions test_opts;
  test_opts.count = 200;
  test_opts.seed = 2;
  const auto raw = parse_dataset(make_question_corpus(train_opts), DataFormat::kTrec);
  auto parts = split_validation(raw, 0.1, 3);
  auto train = inject_random(parts.train, level, 4).dataset;
  auto valid = inject_random(parts.validation, level, 5).dataset;
  return prepare_data(std::move(train), std::move(valid), parse_dataset(make_question_corpus(test_opts), DataFormat::kTrec));
}

TrainConfig small_config(TrainMode mode) {
  TrainConfig c;
  c.mode = mode;
  c.t0 = 3;
  c.epochs = 6;
  c.dim = 16;
  c.hidden = 24;
  c.beta = 4.0;
  return c;
}

TEST(TrainConfig, Validation) {
  TrainConfig c;
  EXPECT_NO_THROW(c.validate());
  c.t0 = 0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.t0 = 20;
  c.epochs = 10;
  try {
    c.validate();
    FAIL();
  } catch (const std::invalid_argument& e) {
    EXPECT_STREQ(e.what(), "t0 (20) must be smaller than epochs (10)");
  }
  c = TrainConfig{};
  c.beta = 0.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  c.mode = TrainMode::kBaseline;
  EXPECT_NO_THROW(c.validate());
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), std::invalid_argument);
}

TEST(TrainMode, Names) {
  for (auto m : {TrainMode::kBaseline, TrainMode::kDnSoft, TrainMode::kDnHard}) {
    EXPECT_EQ(parse_train_mode(to_string(m)), m);
  }
  EXPECT_EQ(parse_train_mode("dn_soft"), TrainMode::kDnSoft);
  EXPECT_THROW(parse_train_mode("soft"), std::invalid_argument);
}

TEST(PrepareData, VocabularyFromTrainOnly) {
  auto train = testing::make_dataset({{"alpha beta", 0}, {"beta gamma", 1}}, 2);
  auto valid = testing::make_dataset({{"delta", 0}}, 2);
  auto test = testing::make_dataset({{"alpha epsilon", 1}}, 3);
  const auto d = prepare_data(train, valid, test);
  EXPECT_EQ(d.train.vocab->size(), 4u);
  EXPECT_EQ(d.validation.examples[0].tokens, (std::vector<std::int32_t>{kUnkId}));
  EXPECT_EQ(d.test.examples[0].tokens[1], kUnkId);
  EXPECT_EQ(d.train.num_classes, 3u);
  EXPECT_EQ(d.test.split, Split::kTest);
}

TEST(Evaluate, ZeroParametersPredictClassZero) {
  std::vector<std::pair<std::string, Label>> rows;
  for (int i = 0; i < 103; ++i) rows.emplace_back("t" + std::to_string(i), i % 4);
  auto ds = testing::make_dataset(rows, 4);
  ds.encode(std::make_shared<const Vocab>(Vocab::build(ds.texts())));
  const auto cls = ClassifierParams::zeros(ds.vocab->size(), 3, 5, 4);
  EXPECT_DOUBLE_EQ(evaluate(cls, ds, LabelColumn::kNoisy), 26.0 / 103.0);
}

TEST(Evaluate, PerfectMemorizer) {
  std::vector<std::pair<std::string, Label>> rows;
  for (int i = 0; i < 30; ++i) rows.emplace_back("w" + std::to_string(i), i % 3);
  auto ds = testing::make_dataset(rows, 3);
  auto vocab = std::make_shared<const Vocab>(Vocab::build(ds.texts()));
  ds.encode(vocab);
  auto cls = ClassifierParams::zeros(vocab->size(), 3, 3, 3);
  for (const auto& ex : ds.examples) {
    cls.embedding(static_cast<std::size_t>(ex.tokens[0]), static_cast<std::size_t>(ex.noisy_label)) = 1.0;
  }
  for (std::size_t k = 0; k < 3; ++k) cls.w1(k, k) = cls.w2(k, k) = 1.0;
  EXPECT_DOUBLE_EQ(evaluate(cls, ds, LabelColumn::kNoisy), 1.0);
  ds.examples.clear();
  EXPECT_THROW(evaluate(cls, ds, LabelColumn::kNoisy), std::invalid_argument);
}

TEST(Trainer, LossRecordingDoesNotTouchParameters) {
  const auto data = small_data(0.4);
  Trainer t(small_config(TrainMode::kDnHard), data);
  const auto losses = t.run_warmup();
  ASSERT_EQ(losses.size(), data.train.size());
  const auto before = t.classifier();
  const auto again = record_losses(t.classifier(), data.train);
  EXPECT_EQ(t.classifier(), before);
  EXPECT_EQ(again, losses);
  EXPECT_EQ(t.report().epochs.size(), 3u);
  for (const auto& e : t.report().epochs) EXPECT_EQ(e.phase, "warmup");
}

TEST(Trainer, DenoiseBeforeWarmupIsAnError) {
  const auto data = small_data(0.2);
  Trainer t(small_config(TrainMode::kDnHard), data);
  std::vector<std::size_t> ids(data.train.size());
  EXPECT_THROW(t.run_denoise_phase(uniform_posterior_table(ids)), std::logic_error);
}

TEST(Trainer, BaselineNeverBuildsNoiseHead) {
  const auto data = small_data(0.2);
  Trainer t(small_config(TrainMode::kBaseline), data);
  t.run_warmup();
  std::vector<std::size_t> ids(data.train.size());
  t.run_denoise_phase(uniform_posterior_table(ids));
  EXPECT_FALSE(t.noise_head().has_value());
  EXPECT_EQ(t.report().epochs.back().phase, "baseline");
}

TEST(Trainer, WrongEmbeddingShapeRejected) {
  const auto data = small_data(0.2);
  EXPECT_THROW(Trainer(small_config(TrainMode::kDnHard), data, Matrix(2, 2)), std::invalid_argument);
}

TEST(Experiment, WarmupSharedAcrossModes) {
  const auto data = small_data(0.4);
  const auto base = run_experiment(small_config(TrainMode::kBaseline), data, std::nullopt);
  const auto hard = run_experiment(small_config(TrainMode::kDnHard), data, std::nullopt);
  const auto soft = run_experiment(small_config(TrainMode::kDnSoft), data, std::nullopt);
  EXPECT_EQ(base.raw_losses, hard.raw_losses);
  EXPECT_EQ(base.raw_losses, soft.raw_losses);
  for (std::size_t e = 0; e < 3; ++e) {
    EXPECT_EQ(base.report.epochs[e].valid_accuracy, hard.report.epochs[e].valid_accuracy);
    EXPECT_EQ(base.report.epochs[e].train_loss, soft.report.epochs[e].train_loss);
  }
}

TEST(Experiment, BestLastBookkeeping) {
  const auto data = small_data(0.4);
  auto cfg = small_config(TrainMode::kDnSoft);
  cfg.epochs = 10;
  const auto r = run_experiment(cfg, data, std::nullopt).report;
  ASSERT_EQ(r.epochs.size(), 10u);
  const auto& best = r.epochs[r.best_epoch - 1];
  EXPECT_EQ(best.epoch, r.best_epoch);
  EXPECT_EQ(best.valid_accuracy, r.best_valid_accuracy);
  EXPECT_EQ(best.test_accuracy, r.best_test_accuracy);
  for (const auto& e : r.epochs) {
    EXPECT_TRUE(e.evaluated);
    EXPECT_LE(e.valid_accuracy, r.best_valid_accuracy);
    if (e.epoch < r.best_epoch) {
      EXPECT_LT(e.valid_accuracy, r.best_valid_accuracy);
    }
  }
  EXPECT_EQ(r.last_test_accuracy, r.epochs.back().test_accuracy);
  EXPECT_EQ(r.gap, r.last_test_accuracy - r.best_test_accuracy);
}

TEST(Experiment, EvalEveryStillEvaluatesLastEpoch) {
  const auto data = small_data(0.2);
  auto cfg = small_config(TrainMode::kDnHard);
  cfg.eval_every = 4;
  const auto r = run_experiment(cfg, data, std::nullopt).report;
  for (const auto& e : r.epochs) EXPECT_EQ(e.evaluated, e.epoch % 4 == 0 || e.epoch == cfg.epochs);
  EXPECT_EQ(r.best_epoch % 4 == 0 || r.best_epoch == cfg.epochs, true);
}

TEST(Experiment, DegenerateLossesFallBackToUniformPosteriors) {
  std::vector<std::pair<std::string, Label>> rows(40, {"same text here", 1});
  auto train = testing::make_dataset(rows, 3);
  auto valid = testing::make_dataset({{"same text here", 1}}, 3);
  auto test = testing::make_dataset({{"same text", 1}}, 3);
  const auto data = prepare_data(train, valid, test);
  auto cfg = small_config(TrainMode::kDnSoft);
  cfg.dropout = 0.0;
  TempDir dir;
  ::testing::internal::CaptureStderr();
  const auto r = run_experiment(cfg, data, dir.path());
  const auto warning = ::testing::internal::GetCapturedStderr();
  EXPECT_FALSE(warning.empty());
  EXPECT_FALSE(r.mixture.has_value());
  EXPECT_TRUE(r.posteriors.fallback);
  for (double v : r.posteriors.values) EXPECT_EQ(v, 1.0);
  EXPECT_TRUE(r.report.bmm_diagnostics.fallback);
  EXPECT_FALSE(r.report.bmm_diagnostics.fallback_reason.empty());
  const auto bmm = nlohmann::json::parse(testing::slurp(dir / "bmm.json"));
  EXPECT_EQ(bmm["fitted"], false);
}

TEST(Experiment, OutputsAndDeterminism) {
  const auto data = small_data(0.4);
  const auto cfg = small_config(TrainMode::kDnHard);
  TempDir a, b;
  ExperimentOptions opts;
  opts.config_hash = 42;
  const auto ra = run_experiment(cfg, data, a.path(), opts);
  run_experiment(cfg, data, b.path(), opts);
  for (const auto& f : experiment_output_files()) {
    ASSERT_TRUE(std::filesystem::exists(a / f)) << f;
    EXPECT_EQ(testing::slurp(a / f), testing::slurp(b / f)) << f;
  }
  const auto metrics = nlohmann::json::parse(testing::slurp(a / "metrics.json"));
  for (auto key : {"mode", "rep_mode", "t0", "epochs", "beta", "seed", "per_epoch", "best_epoch",
                   "best_valid_accuracy", "best_test_accuracy", "last_test_accuracy", "gap", "bmm_diagnostics"}) {
    EXPECT_TRUE(metrics.contains(key)) << key;
  }
  EXPECT_EQ(metrics["per_epoch"].size(), cfg.epochs);

  const auto csv = testing::slurp(a / "losses_T0.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "id,raw_loss,normalized_loss,posterior,is_noisy");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), data.train.size() + 1);

  const auto last = load_checkpoint(a / "last.ckpt");
  EXPECT_EQ(last.config_hash, 42u);
  EXPECT_TRUE(last.noise_head.has_value());
  const auto best = load_checkpoint(a / "best.ckpt");
  EXPECT_DOUBLE_EQ(evaluate(best.classifier, data.test, LabelColumn::kClean), ra.report.best_test_accuracy);
  EXPECT_DOUBLE_EQ(evaluate(last.classifier, data.test, LabelColumn::kClean), ra.report.last_test_accuracy);
  EXPECT_EQ(ra.posteriors.size(), data.train.size());
}

TEST(Experiment, DifferentSeedsDiffer) {
  const auto data = small_data(0.4);
  auto cfg = small_config(TrainMode::kDnHard);
  const auto a = run_experiment(cfg, data, std::nullopt);
  cfg.seed = 2;
  const auto b = run_experiment(cfg, data, std::nullopt);
  EXPECT_NE(a.raw_losses, b.raw_losses);
}

TEST(Audit, PoisonedCleanLabelsOnlyChangeDiagnostics) {
  auto data = small_data(0.4);
  auto poisoned = data;
  poison_clean_labels(poisoned);
  for (const auto& ex : poisoned.train.examples) EXPECT_EQ(ex.clean_label, kPoisonedLabel);
  EXPECT_NE(poisoned.test.examples[0].clean_label, kPoisonedLabel);
  const auto cfg = small_config(TrainMode::kDnSoft);
  TempDir a, b;
  run_experiment(cfg, data, a.path());
  run_experiment(cfg, poisoned, b.path());
  for (auto f : {"best.ckpt", "last.ckpt", "bmm.json", "vocab.txt"}) EXPECT_EQ(testing::slurp(a / f), testing::slurp(b / f)) << f;
  auto ma = nlohmann::json::parse(testing::slurp(a / "metrics.json"));
  auto mb = nlohmann::json::parse(testing::slurp(b / "metrics.json"));
  EXPECT_NE(ma["bmm_diagnostics"], mb["bmm_diagnostics"]);
  EXPECT_TRUE(mb["bmm_diagnostics"]["separation_accuracy"].is_null());
  ma.erase("bmm_diagnostics");
  mb.erase("bmm_diagnostics");
  EXPECT_EQ(ma.dump(), mb.dump());
}

// Brute-force oracle for the separation and AUC diagnostics.
TEST(Diagnostics, MatchBruteForce) {
  Rng rng(3);
  auto ds = testing::random_dataset(60, 3, 2);
  std::vector<double> raw(ds.size());
  PosteriorTable table;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (rng.uniform01() < 0.4) ds.examples[i].noisy_label = (ds.examples[i].clean_label + 1) % 3;
    raw[i] = rng.uniform(0.0, 3.0);
    table.values.push_back(rng.uniform01() < 0.1 ? 0.5 : rng.uniform01());
    table.ids.push_back(ds.examples[i].id);
  }
  ds.examples[7].clean_label = kPoisonedLabel;
  const auto d = diagnose_posteriors(table, ds, raw);

  std::size_t agree = 0, n = 0, clean_n = 0;
  double clean_sum = 0, noisy_sum = 0, wins = 0, pairs = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& ex = ds.examples[i];
    if (ex.clean_label == kPoisonedLabel) continue;
    const bool clean = ex.noisy_label == ex.clean_label;
    ++n;
    agree += (table.values[i] > 0.5) == clean;
    (clean ? clean_sum : noisy_sum) += raw[i];
    clean_n += clean;
    if (!clean) continue;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const auto& other = ds.examples[k];
      if (other.clean_label == kPoisonedLabel || other.noisy_label == other.clean_label) continue;
      pairs += 1;
      wins += table.values[i] > table.values[k] ? 1.0 : table.values[i] == table.values[k] ? 0.5 : 0.0;
    }
  }
  EXPECT_EQ(d.labelled_count, n);
  EXPECT_DOUBLE_EQ(*d.separation_accuracy, static_cast<double>(agree) / static_cast<double>(n));
  EXPECT_NEAR(*d.clean_mean_loss, clean_sum / static_cast<double>(clean_n), 1e-12);
  EXPECT_NEAR(*d.noisy_mean_loss, noisy_sum / static_cast<double>(n - clean_n), 1e-12);
  EXPECT_NEAR(*d.auc, wins / pairs, 1e-12);
}

TEST(Training, CleanDataSanity) {
  const auto data = testing::noisy_question_data(0.0);
  TrainConfig cfg;
  cfg.mode = TrainMode::kBaseline;
  cfg.epochs = 40;
  const auto r = run_experiment(cfg, data, std::nullopt).report;
  EXPECT_GE(r.last_test_accuracy, 0.80);
  EXPECT_GE(r.best_test_accuracy, 0.80);
}

}  // namespace
}  // namespace denoise

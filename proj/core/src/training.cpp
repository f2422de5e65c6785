#include "denoise/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "denoise/checkpoint.hpp"

namespace denoise {

TrainMode parse_train_mode(std::string_view name) {
  if (name == "baseline") return TrainMode::kBaseline;
  if (name == "dn-soft" || name == "dn_soft") return TrainMode::kDnSoft;
  if (name == "dn-hard" || name == "dn_hard") return TrainMode::kDnHard;
  throw std::invalid_argument("unknown mode '" + std::string(name) +
                              "' (expected baseline, dn-soft or dn-hard)");
}

std::string_view to_string(TrainMode mode) {
  switch (mode) {
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kDnSoft: return "dn-soft";
    case TrainMode::kDnHard: return "dn-hard";
  }
  return "?";
}

void TrainConfig::validate() const {
  if (t0 < 1) throw std::invalid_argument("t0 must be at least 1");
  if (t0 >= epochs) {
    throw std::invalid_argument("t0 (" + std::to_string(t0) + ") must be smaller than epochs (" +
                                std::to_string(epochs) + ")");
  }
  if (mode != TrainMode::kBaseline && !(beta > 0.0)) {
    throw std::invalid_argument("beta must be positive in de-noising modes");
  }
  if (!(lr >= 0.0)) throw std::invalid_argument("lr must be non-negative");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (dim < 1 || hidden < 1) throw std::invalid_argument("dim and hidden must be positive");
  if (eval_every < 1) throw std::invalid_argument("eval_every must be at least 1");
}

// ---------------------------------------------------------------------------

ExperimentData prepare_data(Dataset train, Dataset validation, Dataset test, std::size_t min_freq) {
  if (train.empty()) throw std::invalid_argument("training split is empty");
  const std::size_t classes =
      std::max({train.num_classes, validation.num_classes, test.num_classes});
  auto vocab = std::make_shared<const Vocab>(Vocab::build(train.texts(), min_freq));
  train.encode(vocab);
  validation.encode(vocab);
  test.encode(vocab);
  train.split = Split::kTrain;
  validation.split = Split::kValidation;
  test.split = Split::kTest;
  train.num_classes = validation.num_classes = test.num_classes = classes;
  return {std::move(train), std::move(validation), std::move(test)};
}

void poison_clean_labels(ExperimentData& data) {
  for (auto* ds : {&data.train, &data.validation}) {
    for (auto& ex : ds->examples) ex.clean_label = kPoisonedLabel;
  }
}

double evaluate(const ClassifierParams& cls, const Dataset& split, LabelColumn column) {
  if (split.empty()) throw std::invalid_argument("cannot evaluate on an empty split");
  std::size_t correct = 0;
  for (const auto& ex : split.examples) {
    const auto trace = forward(cls, nullptr, ex.tokens, ForwardMode::kEval, RepMode::kLogits, nullptr);
    const Label target = column == LabelColumn::kNoisy ? ex.noisy_label : ex.clean_label;
    if (static_cast<Label>(argmax(trace.logits_c)) == target) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(split.size());
}

std::vector<double> record_losses(const ClassifierParams& cls, const Dataset& train) {
  std::vector<double> losses;
  losses.reserve(train.size());
  for (const auto& ex : train.examples) {
    const auto trace = forward(cls, nullptr, ex.tokens, ForwardMode::kEval, RepMode::kLogits, nullptr);
    losses.push_back(cross_entropy(softmax(trace.logits_c), static_cast<std::size_t>(ex.noisy_label)));
  }
  return losses;
}

namespace {

// Mann-Whitney estimate of P(score_clean > score_noisy), ties counted half.
std::optional<double> auc(std::span<const double> scores, const std::vector<bool>& positive) {
  std::size_t n_pos = 0;
  for (bool p : positive) n_pos += p ? 1 : 0;
  const std::size_t n_neg = positive.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (positive[order[k]]) rank_sum += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

}  // namespace

BmmDiagnostics diagnose_posteriors(const PosteriorTable& table, const Dataset& train,
                                   std::span<const double> raw_losses) {
  BmmDiagnostics d;
  d.fallback = table.fallback;
  std::vector<double> scores;
  std::vector<bool> is_clean;
  double clean_sum = 0.0;
  double noisy_sum = 0.0;
  std::size_t clean_n = 0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& ex = train.examples[i];
    const bool predicted_clean = table.values[i] > 0.5;
    if (predicted_clean) ++d.predicted_clean_count;
    if (ex.clean_label == kPoisonedLabel) continue;
    const bool clean = ex.noisy_label == ex.clean_label;
    scores.push_back(table.values[i]);
    is_clean.push_back(clean);
    if (predicted_clean == clean) ++agree;
    if (clean) {
      clean_sum += raw_losses[i];
      ++clean_n;
    } else {
      noisy_sum += raw_losses[i];
    }
  }
  d.labelled_count = is_clean.size();
  d.noisy_count = d.labelled_count - clean_n;
  if (d.labelled_count > 0) {
    d.separation_accuracy = static_cast<double>(agree) / static_cast<double>(d.labelled_count);
  }
  if (clean_n > 0) d.clean_mean_loss = clean_sum / static_cast<double>(clean_n);
  if (d.noisy_count > 0) d.noisy_mean_loss = noisy_sum / static_cast<double>(d.noisy_count);
  d.auc = auc(scores, is_clean);
  return d;
}

// ---------------------------------------------------------------------------

namespace {

constexpr std::uint64_t kTagInit = 1;
constexpr std::uint64_t kTagShuffle = 2;
constexpr std::uint64_t kTagDropout = 3;
constexpr std::uint64_t kTagNoiseHead = 4;

template <std::size_t N>
std::vector<AdamState> make_adam(const std::array<Matrix*, N>& tensors, double lr) {
  std::vector<AdamState> states;
  for (const Matrix* m : tensors) states.emplace_back(m->size(), lr);
  return states;
}

template <std::size_t N>
void apply_adam(const std::array<Matrix*, N>& params, const std::array<Matrix*, N>& grads,
                double scale, std::vector<AdamState>& states) {
  for (std::size_t k = 0; k < N; ++k) {
    auto g = grads[k]->values();
    for (double& x : g) x *= scale;
    adam_step(params[k]->values(), g, states[k]);
  }
}

}  // namespace

Trainer::Trainer(TrainConfig config, const ExperimentData& data, std::optional<Matrix> initial_embeddings)
    : config_(std::move(config)),
      data_(data),
      shuffle_rng_(derive_seed(config_.seed, {kTagShuffle})),
      dropout_rng_(derive_seed(config_.seed, {kTagDropout})) {
  config_.validate();
  if (!data_.train.vocab) throw std::invalid_argument("training data is not encoded");
  Rng init(derive_seed(config_.seed, {kTagInit}));
  classifier_ = ClassifierParams::random(data_.train.vocab->size(), config_.dim, config_.hidden,
                                         data_.train.num_classes, config_.dropout, init);
  if (initial_embeddings) {
    if (initial_embeddings->rows() != classifier_.embedding.rows() ||
        initial_embeddings->cols() != classifier_.embedding.cols()) {
      throw std::invalid_argument("pretrained embedding table has the wrong shape");
    }
    classifier_.embedding = std::move(*initial_embeddings);
  }
  classifier_adam_ = make_adam(classifier_.tensors(), config_.lr);
}

std::vector<std::size_t> Trainer::epoch_order() {
  std::vector<std::size_t> order(data_.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  shuffle_rng_.shuffle(order);
  return order;
}

double Trainer::train_epoch_ce() {
  const auto order = epoch_order();
  auto grads = ClassifierGrads::zeros(classifier_.vocab_size(), classifier_.dim(),
                                      classifier_.hidden(), classifier_.classes());
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    zero(grads);
    for (std::size_t b = start; b < end; ++b) {
      const auto& ex = data_.train.examples[order[b]];
      const auto trace = forward(classifier_, nullptr, ex.tokens, ForwardMode::kTrain,
                                 config_.rep_mode, &dropout_rng_);
      total += warmup_loss_and_grad(classifier_, trace, static_cast<std::size_t>(ex.noisy_label), grads);
    }
    apply_adam(classifier_.tensors(), grads.tensors(), 1.0 / static_cast<double>(end - start),
               classifier_adam_);
  }
  return total / static_cast<double>(order.size());
}

double Trainer::train_epoch_denoise(const PosteriorTable& posteriors, LossVariant variant) {
  const auto order = epoch_order();
  auto gc = ClassifierGrads::zeros(classifier_.vocab_size(), classifier_.dim(),
                                   classifier_.hidden(), classifier_.classes());
  auto gn = NoiseHeadGrads::zeros(noise_head_->input_width(), noise_head_->classes());
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
    const std::size_t end = std::min(order.size(), start + config_.batch_size);
    zero(gc);
    zero(gn);
    for (std::size_t b = start; b < end; ++b) {
      const std::size_t pos = order[b];
      const auto& ex = data_.train.examples[pos];
      const auto trace = forward(classifier_, &*noise_head_, ex.tokens, ForwardMode::kTrain,
                                 config_.rep_mode, &dropout_rng_);
      total += backward(classifier_, *noise_head_, trace, static_cast<std::size_t>(ex.noisy_label),
                        config_.beta, posteriors.values[pos], variant, gc, gn);
    }
    const double scale = 1.0 / static_cast<double>(end - start);
    apply_adam(classifier_.tensors(), gc.tensors(), scale, classifier_adam_);
    apply_adam(noise_head_->tensors(), gn.tensors(), scale, noise_adam_);
  }
  return total / static_cast<double>(order.size());
}

void Trainer::end_epoch(std::size_t epoch, const std::string& phase, double loss) {
  EpochRecord rec;
  rec.epoch = epoch;
  rec.phase = phase;
  rec.train_loss = loss;
  if (epoch % config_.eval_every == 0 || epoch == config_.epochs) {
    rec.evaluated = true;
    rec.valid_accuracy = evaluate(classifier_, data_.validation, LabelColumn::kNoisy);
    rec.test_accuracy = evaluate(classifier_, data_.test, LabelColumn::kClean);
    // Selection by validation only; ties keep the earliest epoch.
    if (report_.best_epoch == 0 || rec.valid_accuracy > report_.best_valid_accuracy) {
      report_.best_epoch = epoch;
      report_.best_valid_accuracy = rec.valid_accuracy;
      report_.best_test_accuracy = rec.test_accuracy;
      best_.classifier = classifier_;
      best_.noise_head = noise_head_;
    }
    if (epoch == config_.epochs) {
      report_.last_test_accuracy = rec.test_accuracy;
      report_.gap = report_.last_test_accuracy - report_.best_test_accuracy;
    }
  }
  report_.epochs.push_back(std::move(rec));
}

std::vector<double> Trainer::run_warmup() {
  while (epoch_ < config_.t0) {
    const double loss = train_epoch_ce();
    ++epoch_;
    end_epoch(epoch_, "warmup", loss);
  }
  return record_losses(classifier_, data_.train);
}

void Trainer::run_denoise_phase(const PosteriorTable& posteriors) {
  if (epoch_ != config_.t0) throw std::logic_error("run_denoise_phase called before warmup finished");
  if (config_.mode == TrainMode::kBaseline) {
    while (epoch_ < config_.epochs) {
      const double loss = train_epoch_ce();
      ++epoch_;
      end_epoch(epoch_, "baseline", loss);
    }
    return;
  }
  if (posteriors.size() != data_.train.size()) {
    throw std::invalid_argument("posterior table does not cover the training split");
  }
  Rng head_rng(derive_seed(config_.seed, {kTagNoiseHead}));
  const std::size_t width = representation_width(config_.rep_mode, config_.hidden, data_.train.num_classes);
  noise_head_ = NoiseHeadParams::random(width, data_.train.num_classes, head_rng);
  noise_adam_ = make_adam(noise_head_->tensors(), config_.lr);
  const LossVariant variant = config_.mode == TrainMode::kDnSoft ? LossVariant::kSoft : LossVariant::kHard;
  while (epoch_ < config_.epochs) {
    const double loss = train_epoch_denoise(posteriors, variant);
    ++epoch_;
    end_epoch(epoch_, "denoise", loss);
  }
}

// ---------------------------------------------------------------------------

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string fmt_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

}  // namespace

std::string MetricsReport::to_json(const TrainConfig& config) const {
  nlohmann::ordered_json j;
  j["mode"] = std::string(to_string(config.mode));
  j["rep_mode"] = std::string(to_string(config.rep_mode));
  j["t0"] = config.t0;
  j["epochs"] = config.epochs;
  j["beta"] = config.beta;
  j["seed"] = config.seed;
  auto& arr = j["per_epoch"] = nlohmann::ordered_json::array();
  for (const auto& e : epochs) {
    nlohmann::ordered_json r;
    r["epoch"] = e.epoch;
    r["phase"] = e.phase;
    r["train_loss"] = e.train_loss;
    if (e.evaluated) {
      r["valid_accuracy"] = e.valid_accuracy;
      r["test_accuracy"] = e.test_accuracy;
    } else {
      r["valid_accuracy"] = nullptr;
      r["test_accuracy"] = nullptr;
    }
    arr.push_back(std::move(r));
  }
  j["best_epoch"] = best_epoch;
  j["best_valid_accuracy"] = best_valid_accuracy;
  j["best_test_accuracy"] = best_test_accuracy;
  j["last_test_accuracy"] = last_test_accuracy;
  j["gap"] = gap;
  auto& d = j["bmm_diagnostics"];
  d["fitted"] = bmm_diagnostics.fitted;
  d["fallback"] = bmm_diagnostics.fallback;
  d["fallback_reason"] = bmm_diagnostics.fallback_reason;
  d["labelled_count"] = bmm_diagnostics.labelled_count;
  d["separation_accuracy"] = optional_json(bmm_diagnostics.separation_accuracy);
  d["auc"] = optional_json(bmm_diagnostics.auc);
  d["clean_mean_loss"] = optional_json(bmm_diagnostics.clean_mean_loss);
  d["noisy_mean_loss"] = optional_json(bmm_diagnostics.noisy_mean_loss);
  d["noisy_count"] = bmm_diagnostics.noisy_count;
  d["predicted_clean_count"] = bmm_diagnostics.predicted_clean_count;
  return j.dump(2) + "\n";
}

std::string format_losses_csv(const Dataset& train, std::span<const double> raw,
                              std::span<const double> normalized, const PosteriorTable& table) {
  std::string out = "id,raw_loss,normalized_loss,posterior,is_noisy\n";
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& ex = train.examples[i];
    const char* noisy = ex.clean_label == kPoisonedLabel ? "" : ex.noisy_label != ex.clean_label ? "1" : "0";
    out += std::to_string(ex.id) + "," + fmt_double(raw[i]) + "," + fmt_double(normalized[i]) + "," +
           fmt_double(table.values[i]) + "," + noisy + "\n";
  }
  return out;
}

const std::vector<std::string>& experiment_output_files() {
  static const std::vector<std::string> files = {"metrics.json", "bmm.json",  "losses_T0.csv",
                                                 "best.ckpt",    "last.ckpt", "vocab.txt"};
  return files;
}

ExperimentResult run_experiment(const TrainConfig& config, const ExperimentData& data,
                                const std::optional<std::filesystem::path>& out_dir,
                                const ExperimentOptions& options) {
  config.validate();
  std::optional<Matrix> embeddings;
  if (options.embeddings_path) {
    auto loaded = load_embeddings(*options.embeddings_path, *data.train.vocab, config.dim,
                                  derive_seed(config.seed, {kTagInit, 99}));
    embeddings = std::move(loaded.table);
  }

  Trainer trainer(config, data, std::move(embeddings));
  ExperimentResult result;
  result.raw_losses = trainer.run_warmup();

  std::vector<std::size_t> ids;
  ids.reserve(data.train.size());
  for (const auto& ex : data.train.examples) ids.push_back(ex.id);

  result.normalized = normalize_losses(result.raw_losses);
  std::string fallback_reason;
  try {
    if (result.normalized.degenerate) throw DegenerateFitError("warmup losses are constant");
    result.mixture = fit_bmm(result.normalized.values);
    result.posteriors = build_posterior_table(*result.mixture, result.normalized.values, ids, config.t0);
  } catch (const DegenerateFitError& e) {
    fallback_reason = e.what();
    std::cerr << "WARNING: beta mixture fit failed (" << e.what()
              << "); using clean weight 1.0 for every sample\n";
    result.posteriors = uniform_posterior_table(ids, config.t0);
  }

  trainer.run_denoise_phase(result.posteriors);
  result.report = trainer.report();
  result.report.bmm_diagnostics = diagnose_posteriors(result.posteriors, data.train, result.raw_losses);
  result.report.bmm_diagnostics.fitted = result.mixture.has_value();
  result.report.bmm_diagnostics.fallback_reason = fallback_reason;

  if (out_dir) {
    std::filesystem::create_directories(*out_dir);
    write_text(*out_dir / "metrics.json", result.report.to_json(config));
    write_text(*out_dir / "bmm.json", result.mixture ? result.mixture->to_json()
                                                     : std::string("{\n  \"fitted\": false\n}\n"));
    write_text(*out_dir / "losses_T0.csv",
               format_losses_csv(data.train, result.raw_losses, result.normalized.values, result.posteriors));
    Checkpoint best{options.config_hash, config.rep_mode, trainer.best_snapshot().classifier,
                    trainer.best_snapshot().noise_head};
    save_checkpoint(best, *out_dir / "best.ckpt");
    Checkpoint last{options.config_hash, config.rep_mode, trainer.classifier(), trainer.noise_head()};
    save_checkpoint(last, *out_dir / "last.ckpt");
    std::string vocab;
    for (const auto& tok : data.train.vocab->tokens()) vocab += tok + "\n";
    write_text(*out_dir / "vocab.txt", vocab);
  }
  return result;
}

}  // namespace denoise

// Classifier M (mean-of-embeddings MLP), noise head N_M, and the de-noising
// loss with hand-written gradients.
//
//   tokens -> mean embedding (d) -> affine+ReLU (h) -> dropout -> affine -> logits_c (C)
//   representation = logits_c                  (RepMode::kLogits, r = C)
//                  | hidden_post ++ logits_c    (RepMode::kConcat, r = h + C)
//   representation -> affine+ReLU (4r) -> affine -> logits_n (C)
//
// Inference uses logits_c only.
#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "denoise/numerics.hpp"
#include "denoise/rng.hpp"

namespace denoise {

enum class RepMode { kLogits, kConcat };
enum class LossVariant { kSoft, kHard };
enum class ForwardMode { kTrain, kEval };

RepMode parse_rep_mode(std::string_view name);  // logits | concat
std::string_view to_string(RepMode mode);

struct ClassifierParams {
  Matrix embedding;  // vocab x d
  Matrix w1;         // d x h
  Matrix b1;         // 1 x h
  Matrix w2;         // h x C
  Matrix b2;         // 1 x C
  double dropout_rate = 0.0;

  std::size_t vocab_size() const { return embedding.rows(); }
  std::size_t dim() const { return embedding.cols(); }
  std::size_t hidden() const { return w1.cols(); }
  std::size_t classes() const { return w2.cols(); }

  std::array<Matrix*, 5> tensors() { return {&embedding, &w1, &b1, &w2, &b2}; }
  std::array<const Matrix*, 5> tensors() const { return {&embedding, &w1, &b1, &w2, &b2}; }

  static ClassifierParams zeros(std::size_t vocab, std::size_t dim, std::size_t hidden,
                                std::size_t classes, double dropout_rate = 0.0);
  /// Embeddings uniform in [-0.1, 0.1]; weights Glorot-uniform; biases zero.
  static ClassifierParams random(std::size_t vocab, std::size_t dim, std::size_t hidden,
                                 std::size_t classes, double dropout_rate, Rng& rng);

  friend bool operator==(const ClassifierParams&, const ClassifierParams&) = default;
};

struct NoiseHeadParams {
  Matrix v1;  // r x 4r
  Matrix c1;  // 1 x 4r
  Matrix v2;  // 4r x C
  Matrix c2;  // 1 x C

  std::size_t input_width() const { return v1.rows(); }
  std::size_t hidden() const { return v1.cols(); }
  std::size_t classes() const { return v2.cols(); }

  std::array<Matrix*, 4> tensors() { return {&v1, &c1, &v2, &c2}; }
  std::array<const Matrix*, 4> tensors() const { return {&v1, &c1, &v2, &c2}; }

  static NoiseHeadParams zeros(std::size_t input_width, std::size_t classes);
  static NoiseHeadParams random(std::size_t input_width, std::size_t classes, Rng& rng);

  friend bool operator==(const NoiseHeadParams&, const NoiseHeadParams&) = default;
};

using ClassifierGrads = ClassifierParams;
using NoiseHeadGrads = NoiseHeadParams;

/// Representation width r fed to the noise head.
std::size_t representation_width(RepMode mode, std::size_t hidden, std::size_t classes);

struct ForwardTrace {
  std::vector<std::int32_t> tokens;
  std::vector<double> mean_embedding;
  std::vector<double> hidden_pre;
  std::vector<double> hidden_post;
  std::vector<double> dropout_mask;  // 0 or 1/(1-p); all ones in eval mode
  std::vector<double> logits_c;
  RepMode rep_mode = RepMode::kLogits;
  bool has_noise_head = false;
  std::vector<double> representation;
  std::vector<double> noise_hidden_pre;
  std::vector<double> noise_hidden;
  std::vector<double> logits_n;
};

/// Runs M and, when `noise` is non-null, N_M on top of it. `rng` supplies the
/// dropout mask in train mode and may be null in eval mode.
ForwardTrace forward(const ClassifierParams& cls, const NoiseHeadParams* noise,
                     std::span<const std::int32_t> tokens, ForwardMode mode, RepMode rep_mode,
                     Rng* rng);

/// Per-sample weight on the classifier CE term.
/// soft: beta * posterior; hard: beta * 1[posterior > 0.5].
double denoise_weight(double beta, double posterior, LossVariant variant);

/// CE(softmax(logits_n), y) + denoise_weight(...) * CE(softmax(logits_c), y)
double loss_denoise(const ForwardTrace& trace, std::size_t label, double beta, double posterior,
                    LossVariant variant);

/// Accumulates (+=) the exact gradient of loss_denoise into `gc` and `gn`,
/// reusing the trace's dropout mask. Returns the loss.
double backward(const ClassifierParams& cls, const NoiseHeadParams& noise, const ForwardTrace& trace,
                std::size_t label, double beta, double posterior, LossVariant variant,
                ClassifierGrads& gc, NoiseHeadGrads& gn);

/// Plain CE on logits_c through M only; accumulates into `gc`, returns the loss.
double warmup_loss_and_grad(const ClassifierParams& cls, const ForwardTrace& trace,
                            std::size_t label, ClassifierGrads& gc);

void zero(ClassifierGrads& g);
void zero(NoiseHeadGrads& g);

}  // namespace denoise

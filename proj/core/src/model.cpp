#include "denoise/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace denoise {

RepMode parse_rep_mode(std::string_view name) {
  if (name == "logits") return RepMode::kLogits;
  if (name == "concat") return RepMode::kConcat;
  throw std::invalid_argument("unknown representation mode '" + std::string(name) +
                              "' (expected logits or concat)");
}

std::string_view to_string(RepMode mode) { return mode == RepMode::kLogits ? "logits" : "concat"; }

namespace {

void glorot(Matrix& w, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(w.rows() + w.cols()));
  for (double& x : w.values()) x = rng.uniform(-limit, limit);
}

}  // namespace

ClassifierParams ClassifierParams::zeros(std::size_t vocab, std::size_t dim, std::size_t hidden,
                                         std::size_t classes, double dropout_rate) {
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("dropout rate must lie in [0, 1)");
  }
  ClassifierParams p;
  p.embedding = Matrix(vocab, dim);
  p.w1 = Matrix(dim, hidden);
  p.b1 = Matrix(1, hidden);
  p.w2 = Matrix(hidden, classes);
  p.b2 = Matrix(1, classes);
  p.dropout_rate = dropout_rate;
  return p;
}

ClassifierParams ClassifierParams::random(std::size_t vocab, std::size_t dim, std::size_t hidden,
                                          std::size_t classes, double dropout_rate, Rng& rng) {
  auto p = zeros(vocab, dim, hidden, classes, dropout_rate);
  for (double& x : p.embedding.values()) x = rng.uniform(-0.1, 0.1);
  glorot(p.w1, rng);
  glorot(p.w2, rng);
  return p;
}

NoiseHeadParams NoiseHeadParams::zeros(std::size_t input_width, std::size_t classes) {
  NoiseHeadParams p;
  const std::size_t hidden = 4 * input_width;
  p.v1 = Matrix(input_width, hidden);
  p.c1 = Matrix(1, hidden);
  p.v2 = Matrix(hidden, classes);
  p.c2 = Matrix(1, classes);
  return p;
}

NoiseHeadParams NoiseHeadParams::random(std::size_t input_width, std::size_t classes, Rng& rng) {
  auto p = zeros(input_width, classes);
  glorot(p.v1, rng);
  glorot(p.v2, rng);
  return p;
}

std::size_t representation_width(RepMode mode, std::size_t hidden, std::size_t classes) {
  return mode == RepMode::kLogits ? classes : hidden + classes;
}

ForwardTrace forward(const ClassifierParams& cls, const NoiseHeadParams* noise,
                     std::span<const std::int32_t> tokens, ForwardMode mode, RepMode rep_mode,
                     Rng* rng) {
  if (tokens.empty()) throw std::invalid_argument("forward: empty token sequence");
  const std::size_t d = cls.dim();
  const std::size_t h = cls.hidden();
  const std::size_t c = cls.classes();

  ForwardTrace t;
  t.tokens.assign(tokens.begin(), tokens.end());
  t.rep_mode = rep_mode;

  t.mean_embedding.assign(d, 0.0);
  for (std::int32_t tok : tokens) {
    if (tok < 0 || static_cast<std::size_t>(tok) >= cls.vocab_size()) {
      throw std::out_of_range("token id " + std::to_string(tok) + " outside vocabulary of size " +
                              std::to_string(cls.vocab_size()));
    }
    auto row = cls.embedding.row(static_cast<std::size_t>(tok));
    for (std::size_t k = 0; k < d; ++k) t.mean_embedding[k] += row[k];
  }
  const double inv_n = 1.0 / static_cast<double>(tokens.size());
  for (double& x : t.mean_embedding) x *= inv_n;

  t.hidden_pre.resize(h);
  affine(t.mean_embedding, cls.w1, cls.b1.values(), t.hidden_pre);

  t.dropout_mask.assign(h, 1.0);
  if (mode == ForwardMode::kTrain && cls.dropout_rate > 0.0) {
    if (rng == nullptr) throw std::invalid_argument("forward: train-mode dropout needs an rng");
    const double keep_scale = 1.0 / (1.0 - cls.dropout_rate);
    for (double& m : t.dropout_mask) m = rng->uniform01() < cls.dropout_rate ? 0.0 : keep_scale;
  }
  t.hidden_post.resize(h);
  for (std::size_t j = 0; j < h; ++j) {
    t.hidden_post[j] = (t.hidden_pre[j] > 0.0 ? t.hidden_pre[j] : 0.0) * t.dropout_mask[j];
  }

  t.logits_c.resize(c);
  affine(t.hidden_post, cls.w2, cls.b2.values(), t.logits_c);

  if (noise == nullptr) return t;

  t.has_noise_head = true;
  if (rep_mode == RepMode::kLogits) {
    t.representation = t.logits_c;
  } else {
    t.representation = t.hidden_post;
    t.representation.insert(t.representation.end(), t.logits_c.begin(), t.logits_c.end());
  }
  if (t.representation.size() != noise->input_width()) {
    throw std::invalid_argument("noise head expects input width " +
                                std::to_string(noise->input_width()) + ", representation has " +
                                std::to_string(t.representation.size()));
  }
  t.noise_hidden_pre.resize(noise->hidden());
  affine(t.representation, noise->v1, noise->c1.values(), t.noise_hidden_pre);
  t.noise_hidden.resize(noise->hidden());
  for (std::size_t j = 0; j < t.noise_hidden.size(); ++j) {
    t.noise_hidden[j] = t.noise_hidden_pre[j] > 0.0 ? t.noise_hidden_pre[j] : 0.0;
  }
  t.logits_n.resize(c);
  affine(t.noise_hidden, noise->v2, noise->c2.values(), t.logits_n);
  return t;
}

double denoise_weight(double beta, double posterior, LossVariant variant) {
  const double gate = variant == LossVariant::kSoft ? posterior : (posterior > 0.5 ? 1.0 : 0.0);
  return beta * gate;
}

double loss_denoise(const ForwardTrace& trace, std::size_t label, double beta, double posterior,
                    LossVariant variant) {
  if (!trace.has_noise_head) throw std::invalid_argument("loss_denoise: trace has no noise head");
  const double cascade = cross_entropy(softmax(trace.logits_n), label);
  const double classifier = cross_entropy(softmax(trace.logits_c), label);
  return cascade + denoise_weight(beta, posterior, variant) * classifier;
}

namespace {

// Backpropagates dL/dlogits_c and an extra dL/dhidden_post through M.
void backprop_classifier(const ClassifierParams& cls, const ForwardTrace& t,
                         std::span<const double> grad_logits_c,
                         std::span<const double> extra_grad_hidden, ClassifierGrads& gc) {
  const std::size_t h = cls.hidden();
  affine_accumulate(t.hidden_post, grad_logits_c, gc.w2, gc.b2.values());

  std::vector<double> grad_hidden(h);
  affine_backward_input(cls.w2, grad_logits_c, grad_hidden);
  if (!extra_grad_hidden.empty()) {
    for (std::size_t j = 0; j < h; ++j) grad_hidden[j] += extra_grad_hidden[j];
  }
  for (std::size_t j = 0; j < h; ++j) {
    grad_hidden[j] = t.hidden_pre[j] > 0.0 ? grad_hidden[j] * t.dropout_mask[j] : 0.0;
  }
  affine_accumulate(t.mean_embedding, grad_hidden, gc.w1, gc.b1.values());

  std::vector<double> grad_mean(cls.dim());
  affine_backward_input(cls.w1, grad_hidden, grad_mean);
  const double inv_n = 1.0 / static_cast<double>(t.tokens.size());
  for (std::int32_t tok : t.tokens) {
    auto row = gc.embedding.row(static_cast<std::size_t>(tok));
    for (std::size_t k = 0; k < row.size(); ++k) row[k] += grad_mean[k] * inv_n;
  }
}

// softmax(logits) - onehot(label), scaled.
std::vector<double> ce_grad(std::span<const double> logits, std::size_t label, double scale) {
  auto g = softmax(logits);
  if (label >= g.size()) throw std::out_of_range("label out of range");
  g[label] -= 1.0;
  for (double& x : g) x *= scale;
  return g;
}

}  // namespace

double backward(const ClassifierParams& cls, const NoiseHeadParams& noise, const ForwardTrace& t,
                std::size_t label, double beta, double posterior, LossVariant variant,
                ClassifierGrads& gc, NoiseHeadGrads& gn) {
  if (!t.has_noise_head) throw std::invalid_argument("backward: trace has no noise head");
  const double weight = denoise_weight(beta, posterior, variant);
  const std::size_t h = cls.hidden();
  const std::size_t c = cls.classes();

  // Noise head.
  const auto grad_logits_n = ce_grad(t.logits_n, label, 1.0);
  affine_accumulate(t.noise_hidden, grad_logits_n, gn.v2, gn.c2.values());
  std::vector<double> grad_noise_hidden(noise.hidden());
  affine_backward_input(noise.v2, grad_logits_n, grad_noise_hidden);
  for (std::size_t j = 0; j < grad_noise_hidden.size(); ++j) {
    if (t.noise_hidden_pre[j] <= 0.0) grad_noise_hidden[j] = 0.0;
  }
  affine_accumulate(t.representation, grad_noise_hidden, gn.v1, gn.c1.values());
  std::vector<double> grad_rep(noise.input_width());
  affine_backward_input(noise.v1, grad_noise_hidden, grad_rep);

  // Classifier: weighted CE term plus whatever flows back through R_M(x).
  std::vector<double> grad_logits_c(c, 0.0);
  if (weight != 0.0) grad_logits_c = ce_grad(t.logits_c, label, weight);
  std::span<const double> extra_hidden;
  if (t.rep_mode == RepMode::kLogits) {
    for (std::size_t k = 0; k < c; ++k) grad_logits_c[k] += grad_rep[k];
  } else {
    for (std::size_t k = 0; k < c; ++k) grad_logits_c[k] += grad_rep[h + k];
    extra_hidden = std::span<const double>(grad_rep.data(), h);
  }
  backprop_classifier(cls, t, grad_logits_c, extra_hidden, gc);

  return loss_denoise(t, label, beta, posterior, variant);
}

double warmup_loss_and_grad(const ClassifierParams& cls, const ForwardTrace& t, std::size_t label,
                            ClassifierGrads& gc) {
  const auto probs = softmax(t.logits_c);
  const double loss = cross_entropy(probs, label);
  const auto grad_logits_c = ce_grad(t.logits_c, label, 1.0);
  backprop_classifier(cls, t, grad_logits_c, {}, gc);
  return loss;
}

void zero(ClassifierGrads& g) {
  for (Matrix* m : g.tensors()) m->fill(0.0);
}

void zero(NoiseHeadGrads& g) {
  for (Matrix* m : g.tensors()) m->fill(0.0);
}

}  // namespace denoise

#include "denoise/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "denoise/rng.hpp"

namespace denoise {

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

void affine(std::span<const double> in, const Matrix& weights,
            std::span<const double> bias, std::span<double> out) {
  if (in.size() != weights.rows() || out.size() != weights.cols() || bias.size() != weights.cols()) {
    throw std::invalid_argument("affine: shape mismatch");
  }
  std::copy(bias.begin(), bias.end(), out.begin());
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double x = in[i];
    if (x == 0.0) continue;
    auto w = weights.row(i);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += x * w[j];
  }
}

void affine_backward_input(const Matrix& weights, std::span<const double> grad_out,
                           std::span<double> grad_in) {
  if (grad_in.size() != weights.rows() || grad_out.size() != weights.cols()) {
    throw std::invalid_argument("affine_backward_input: shape mismatch");
  }
  for (std::size_t i = 0; i < grad_in.size(); ++i) {
    auto w = weights.row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < grad_out.size(); ++j) acc += w[j] * grad_out[j];
    grad_in[i] = acc;
  }
}

void affine_accumulate(std::span<const double> in, std::span<const double> grad_out,
                       Matrix& grad_weights, std::span<double> grad_bias) {
  if (in.size() != grad_weights.rows() || grad_out.size() != grad_weights.cols() ||
      grad_bias.size() != grad_out.size()) {
    throw std::invalid_argument("affine_accumulate: shape mismatch");
  }
  for (std::size_t i = 0; i < in.size(); ++i) {
    const double x = in[i];
    if (x == 0.0) continue;
    auto g = grad_weights.row(i);
    for (std::size_t j = 0; j < grad_out.size(); ++j) g[j] += x * grad_out[j];
  }
  for (std::size_t j = 0; j < grad_out.size(); ++j) grad_bias[j] += grad_out[j];
}

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) throw std::invalid_argument("empty logits");
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& p : out) p /= total;
  return out;
}

double cross_entropy(std::span<const double> probs, std::size_t label) {
  if (label >= probs.size()) {
    throw std::out_of_range("cross_entropy: label " + std::to_string(label) +
                            " out of range for " + std::to_string(probs.size()) + " classes");
  }
  return -std::log(std::max(probs[label], kProbFloor));
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state) {
  if (params.size() != grads.size()) throw std::invalid_argument("adam_step: shape mismatch");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw std::invalid_argument("adam_step: moment shape mismatch");
  }
  state.t += 1;
  const double t = static_cast<double>(state.t);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

double grad_check(const LossFn& loss, std::span<double> params,
                  std::span<const double> analytic, std::size_t probes, std::uint64_t seed) {
  if (params.size() != analytic.size()) throw std::invalid_argument("grad_check: shape mismatch");
  if (probes == 0 || params.empty()) return 0.0;

  std::vector<std::size_t> coords(params.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (probes < coords.size()) {
    Rng rng(seed);
    rng.shuffle(coords);
    coords.resize(probes);
  }

  constexpr double kStep = 1e-5;
  double worst = 0.0;
  for (std::size_t idx : coords) {
    const double saved = params[idx];
    params[idx] = saved + kStep;
    const double up = loss(params);
    params[idx] = saved - kStep;
    const double down = loss(params);
    params[idx] = saved;
    const double numeric = (up - down) / (2.0 * kStep);
    const double a = analytic[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace denoise

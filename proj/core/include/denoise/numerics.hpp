// Small dense numeric kernels shared by every other module.
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace denoise {

/// Row-major dense matrix of doubles. Vectors are 1 x n matrices or plain
/// std::vector<double>, whichever reads better at the call site.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  void fill(double v);
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// out[j] = bias[j] + sum_i in[i] * weights(i, j)
void affine(std::span<const double> in, const Matrix& weights,
            std::span<const double> bias, std::span<double> out);

/// grad_in[i] = sum_j weights(i, j) * grad_out[j]
void affine_backward_input(const Matrix& weights, std::span<const double> grad_out,
                           std::span<double> grad_in);

/// grad_weights(i, j) += in[i] * grad_out[j]; grad_bias[j] += grad_out[j]
void affine_accumulate(std::span<const double> in, std::span<const double> grad_out,
                       Matrix& grad_weights, std::span<double> grad_bias);

std::vector<double> softmax(std::span<const double> logits);

/// -log(probs[label]), with the probability clamped to kProbFloor first.
double cross_entropy(std::span<const double> probs, std::size_t label);

inline constexpr double kProbFloor = 1e-12;

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  AdamState() = default;
  AdamState(std::size_t n, double learning_rate)
      : m(n, 0.0), v(n, 0.0), lr(learning_rate) {}
};

/// One bias-corrected Adam update of `params` in place. `state.m`/`state.v`
/// are sized on first use when empty.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state);

using LossFn = std::function<double(std::span<const double>)>;

/// Compares `analytic` against central differences (step 1e-5) on `probes`
/// coordinates drawn with `seed`; returns max |a-n| / max(|a|, |n|, 1e-8).
/// `params` is perturbed during probing and restored before returning.
double grad_check(const LossFn& loss, std::span<double> params,
                  std::span<const double> analytic, std::size_t probes,
                  std::uint64_t seed = 0);

}  // namespace denoise

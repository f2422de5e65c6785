// Two-component beta mixture over normalized per-sample losses.
//
// The lower-mean component models samples whose label is clean. The fitted
// posterior of that component is the per-sample clean-label weight used by
// the de-noising loss.
#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace denoise {

/// Beta(alpha, beta) density at l, evaluated in log space. Throws for l
/// outside (0, 1) or non-positive shapes.
double beta_pdf(double l, double alpha, double beta);
double beta_log_pdf(double l, double alpha, double beta);

inline constexpr double kLossClampEps = 1e-4;
inline constexpr double kMinShape = 0.1;
inline constexpr double kMaxShape = 100.0;

struct NormalizedLosses {
  std::vector<double> values;  // each in [kLossClampEps, 1 - kLossClampEps]
  bool degenerate = false;     // max == min; every value is 0.5
};

/// Min-max normalization followed by clamping into the open unit interval.
NormalizedLosses normalize_losses(std::span<const double> raw);

struct BetaMixture {
  double lambda_c = 1.0;
  double lambda_n = 0.0;
  double alpha_c = 1.0;
  double beta_c = 1.0;
  double alpha_n = 1.0;
  double beta_n = 1.0;
  double fit_log_likelihood = 0.0;
  std::size_t iterations_run = 0;
  bool converged = false;

  /// Log-likelihood after each accepted EM iteration, and whether a shape
  /// clamp fired during that iteration's M-step. A step that would lower the
  /// likelihood is discarded and ends the fit.
  std::vector<double> log_likelihood_trace;
  std::vector<bool> clamp_fired;

  double clean_mean() const { return alpha_c / (alpha_c + beta_c); }
  double noisy_mean() const { return alpha_n / (alpha_n + beta_n); }

  std::string to_json() const;
  static BetaMixture from_json(const std::string& text);
};

struct BmmFitOptions {
  std::size_t max_iterations = 50;
  double tolerance = 1e-6;
};

/// Thrown by fit_bmm when the input cannot support a two-component fit
/// (too few samples or constant losses). Callers fall back to uniform weights.
class DegenerateFitError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// EM with weighted method-of-moments M-steps. Initial responsibilities are
/// hard: samples below the mean start in the clean component.
BetaMixture fit_bmm(std::span<const double> normalized, const BmmFitOptions& options = {});

double mixture_log_likelihood(const BetaMixture& m, std::span<const double> normalized);

double posterior_clean(const BetaMixture& m, double l);
double posterior_noisy(const BetaMixture& m, double l);

struct PosteriorTable {
  std::vector<std::size_t> ids;
  std::vector<double> values;  // values[i] belongs to ids[i]
  std::size_t fit_epoch = 0;
  bool fallback = false;  // all-ones table after a degenerate fit

  std::size_t size() const { return values.size(); }
};

PosteriorTable build_posterior_table(const BetaMixture& m, std::span<const double> normalized,
                                     std::span<const std::size_t> ids, std::size_t fit_epoch = 0);

/// Every posterior is 1.0; used when the mixture could not be fitted.
PosteriorTable uniform_posterior_table(std::span<const std::size_t> ids, std::size_t fit_epoch = 0);

}  // namespace denoise

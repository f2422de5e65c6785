#include "denoise/bmm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace denoise {

double beta_log_pdf(double l, double alpha, double beta) {
  if (!(l > 0.0 && l < 1.0)) {
    throw std::domain_error("beta_pdf: argument " + std::to_string(l) + " outside (0, 1)");
  }
  if (!(alpha > 0.0 && beta > 0.0)) throw std::domain_error("beta_pdf: shapes must be positive");
  return std::lgamma(alpha + beta) - std::lgamma(alpha) - std::lgamma(beta) +
         (alpha - 1.0) * std::log(l) + (beta - 1.0) * std::log1p(-l);
}

double beta_pdf(double l, double alpha, double beta) {
  return std::exp(beta_log_pdf(l, alpha, beta));
}

NormalizedLosses normalize_losses(std::span<const double> raw) {
  if (raw.size() < 2) throw std::invalid_argument("normalize_losses needs at least 2 samples");
  const auto [lo_it, hi_it] = std::minmax_element(raw.begin(), raw.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  NormalizedLosses out;
  out.values.resize(raw.size());
  if (hi == lo) {
    out.degenerate = true;
    std::fill(out.values.begin(), out.values.end(), 0.5);
    return out;
  }
  const double span = hi - lo;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    out.values[i] = std::clamp((raw[i] - lo) / span, kLossClampEps, 1.0 - kLossClampEps);
  }
  return out;
}

namespace {

double log_component(double lambda, double alpha, double beta, double l) {
  if (lambda <= 0.0) return -std::numeric_limits<double>::infinity();
  return std::log(lambda) + beta_log_pdf(l, alpha, beta);
}

// log(exp(a) + exp(b))
double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

struct Moments {
  double alpha;
  double beta;
  bool clamped;
};

// Weighted method of moments for a single beta component.
Moments weighted_moments(std::span<const double> x, std::span<const double> w) {
  double total = 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    total += w[i];
    mean += w[i] * x[i];
  }
  if (total <= 0.0) return {1.0, 1.0, true};
  mean /= total;
  double var = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) var += w[i] * (x[i] - mean) * (x[i] - mean);
  var /= total;
  var = std::max(var, 1e-12);

  const double common = mean * (1.0 - mean) / var - 1.0;
  double alpha = mean * common;
  double beta = (1.0 - mean) * common;
  bool clamped = false;
  auto clamp_shape = [&](double& s) {
    if (!(s >= kMinShape)) {
      s = kMinShape;
      clamped = true;
    } else if (s > kMaxShape) {
      s = kMaxShape;
      clamped = true;
    }
  };
  clamp_shape(alpha);
  clamp_shape(beta);
  return {alpha, beta, clamped};
}

}  // namespace

double mixture_log_likelihood(const BetaMixture& m, std::span<const double> normalized) {
  double ll = 0.0;
  for (double l : normalized) {
    ll += log_add(log_component(m.lambda_c, m.alpha_c, m.beta_c, l),
                  log_component(m.lambda_n, m.alpha_n, m.beta_n, l));
  }
  return ll;
}

BetaMixture fit_bmm(std::span<const double> normalized, const BmmFitOptions& options) {
  const std::size_t n = normalized.size();
  if (n < 10) {
    throw DegenerateFitError("beta mixture fit needs at least 10 samples, got " + std::to_string(n) +
                             "; fall back to uniform clean weights");
  }
  for (double l : normalized) {
    if (!(l > 0.0 && l < 1.0)) throw std::domain_error("fit_bmm: losses must lie in (0, 1)");
  }
  const auto [lo, hi] = std::minmax_element(normalized.begin(), normalized.end());
  if (*lo == *hi) {
    throw DegenerateFitError("all losses are identical; the mixture is unidentifiable. "
                             "Fall back to uniform clean weights");
  }

  std::vector<double> resp_c(n);
  std::vector<double> resp_n(n);
  const double mean = std::accumulate(normalized.begin(), normalized.end(), 0.0) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    resp_c[i] = normalized[i] < mean ? 1.0 : 0.0;
    resp_n[i] = 1.0 - resp_c[i];
  }

  BetaMixture m;
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (std::size_t iter = 0; iter < options.max_iterations; ++iter) {
    const BetaMixture previous = m;
    // M-step
    const double sum_c = std::accumulate(resp_c.begin(), resp_c.end(), 0.0);
    m.lambda_c = sum_c / static_cast<double>(n);
    m.lambda_n = 1.0 - m.lambda_c;
    const Moments mc = weighted_moments(normalized, resp_c);
    const Moments mn = weighted_moments(normalized, resp_n);
    m.alpha_c = mc.alpha;
    m.beta_c = mc.beta;
    m.alpha_n = mn.alpha;
    m.beta_n = mn.beta;

    // E-step
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double a = log_component(m.lambda_c, m.alpha_c, m.beta_c, normalized[i]);
      const double b = log_component(m.lambda_n, m.alpha_n, m.beta_n, normalized[i]);
      const double total = log_add(a, b);
      resp_c[i] = std::exp(a - total);
      resp_n[i] = 1.0 - resp_c[i];
      ll += total;
    }
    // Moment matching is not a likelihood maximizer, so a step can lose
    // likelihood. That ends the fit; keep the better previous iterate.
    if (ll < prev_ll) {
      m = previous;
      m.converged = true;
      break;
    }
    m.iterations_run = iter + 1;
    m.log_likelihood_trace.push_back(ll);
    m.clamp_fired.push_back(mc.clamped || mn.clamped);
    m.fit_log_likelihood = ll;
    if (ll - prev_ll < options.tolerance) {
      m.converged = true;
      break;
    }
    prev_ll = ll;
  }

  if (m.clean_mean() > m.noisy_mean()) {
    std::swap(m.lambda_c, m.lambda_n);
    std::swap(m.alpha_c, m.alpha_n);
    std::swap(m.beta_c, m.beta_n);
  }
  return m;
}

double posterior_clean(const BetaMixture& m, double l) {
  const double a = log_component(m.lambda_c, m.alpha_c, m.beta_c, l);
  const double b = log_component(m.lambda_n, m.alpha_n, m.beta_n, l);
  if (a == -std::numeric_limits<double>::infinity()) return 0.0;
  if (b == -std::numeric_limits<double>::infinity()) return 1.0;
  // a / (a + b) evaluated as a logistic in log space, which cannot underflow.
  return 1.0 / (1.0 + std::exp(b - a));
}

double posterior_noisy(const BetaMixture& m, double l) {
  const double a = log_component(m.lambda_c, m.alpha_c, m.beta_c, l);
  const double b = log_component(m.lambda_n, m.alpha_n, m.beta_n, l);
  if (b == -std::numeric_limits<double>::infinity()) return 0.0;
  if (a == -std::numeric_limits<double>::infinity()) return 1.0;
  return 1.0 / (1.0 + std::exp(a - b));
}

PosteriorTable build_posterior_table(const BetaMixture& m, std::span<const double> normalized,
                                     std::span<const std::size_t> ids, std::size_t fit_epoch) {
  if (normalized.size() != ids.size()) {
    throw std::invalid_argument("build_posterior_table: losses and ids differ in length");
  }
  PosteriorTable table;
  table.ids.assign(ids.begin(), ids.end());
  table.fit_epoch = fit_epoch;
  table.values.reserve(normalized.size());
  for (double l : normalized) table.values.push_back(posterior_clean(m, l));
  return table;
}

PosteriorTable uniform_posterior_table(std::span<const std::size_t> ids, std::size_t fit_epoch) {
  PosteriorTable table;
  table.ids.assign(ids.begin(), ids.end());
  table.values.assign(ids.size(), 1.0);
  table.fit_epoch = fit_epoch;
  table.fallback = true;
  return table;
}

std::string BetaMixture::to_json() const {
  nlohmann::ordered_json j;
  j["lambda_c"] = lambda_c;
  j["lambda_n"] = lambda_n;
  j["alpha_c"] = alpha_c;
  j["beta_c"] = beta_c;
  j["alpha_n"] = alpha_n;
  j["beta_n"] = beta_n;
  j["clean_mean"] = clean_mean();
  j["noisy_mean"] = noisy_mean();
  j["log_likelihood"] = fit_log_likelihood;
  j["iterations"] = iterations_run;
  j["converged"] = converged;
  return j.dump(2) + "\n";
}

BetaMixture BetaMixture::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  BetaMixture m;
  m.lambda_c = j.at("lambda_c").get<double>();
  m.lambda_n = j.at("lambda_n").get<double>();
  m.alpha_c = j.at("alpha_c").get<double>();
  m.beta_c = j.at("beta_c").get<double>();
  m.alpha_n = j.at("alpha_n").get<double>();
  m.beta_n = j.at("beta_n").get<double>();
  m.fit_log_likelihood = j.at("log_likelihood").get<double>();
  m.iterations_run = j.at("iterations").get<std::size_t>();
  m.converged = j.at("converged").get<bool>();
  return m;
}

}  // namespace denoise

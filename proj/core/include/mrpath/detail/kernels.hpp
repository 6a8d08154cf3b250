#pragma once

// Inner-loop helpers shared by the E-step, M-step and information code.
// Not part of the stable API.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

#include "mrpath/model.hpp"

namespace mrpath::detail {

inline constexpr double kLog2Pi = 1.8378770664093454836;

inline double floored(double variance) noexcept { return std::max(variance, kVarianceFloor); }

inline double log_sum_exp(const double* v, std::size_t n) noexcept {
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) hi = std::max(hi, v[i]);
  if (!std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += std::exp(v[i] - hi);
  return hi + std::log(acc);
}

/// Per-parameter constants so per-draw work is a handful of multiplies.
struct MixtureCache {
  std::size_t k = 0;
  std::vector<double> log_weights;
  std::vector<double> means;
  std::vector<double> variances;
  std::vector<double> inv_variances;
  std::vector<double> log_norm;  // log pi_k - 0.5 (log 2pi + log sigma_k^2)
  double exposure_mean = 0.0;
  double exposure_inv_variance = 1.0;
  double exposure_log_norm = 0.0;  // -0.5 (log 2pi + log lambda_x^2)

  explicit MixtureCache(const MixtureParams& p)
      : k(p.num_clusters()),
        log_weights(k),
        means(p.means),
        variances(k),
        inv_variances(k),
        log_norm(k),
        exposure_mean(p.exposure_mean) {
    for (std::size_t c = 0; c < k; ++c) {
      variances[c] = floored(p.variances[c]);
      inv_variances[c] = 1.0 / variances[c];
      log_weights[c] = std::log(p.weights[c]);
      log_norm[c] = log_weights[c] - 0.5 * (kLog2Pi + std::log(variances[c]));
    }
    const double lam = floored(p.exposure_variance);
    exposure_inv_variance = 1.0 / lam;
    exposure_log_norm = -0.5 * (kLog2Pi + std::log(lam));
  }

  /// log pi_c + log N(beta; mu_c, sigma_c^2)
  double log_joint(double beta, std::size_t c) const noexcept {
    const double d = beta - means[c];
    return log_norm[c] - 0.5 * d * d * inv_variances[c];
  }

  double log_prior_theta(double theta) const noexcept {
    const double d = theta - exposure_mean;
    return exposure_log_norm - 0.5 * d * d * exposure_inv_variance;
  }

  /// Writes P(xi = c | beta) into out[0..k).
  void responsibilities(double beta, double* out) const noexcept {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      out[c] = log_joint(beta, c);
      hi = std::max(hi, out[c]);
    }
    double total = 0.0;
    for (std::size_t c = 0; c < k; ++c) {
      out[c] = std::exp(out[c] - hi);
      total += out[c];
    }
    for (std::size_t c = 0; c < k; ++c) out[c] /= total;
  }

  /// log P(theta_hat_y | theta_x) under the mixture; scratch needs k slots.
  double log_marginal_outcome(double theta_x, double theta_y_hat, double sigma_y2,
                              double* scratch) const noexcept {
    const double t2 = theta_x * theta_x;
    for (std::size_t c = 0; c < k; ++c) {
      const double v = t2 * variances[c] + sigma_y2;
      const double d = theta_y_hat - theta_x * means[c];
      scratch[c] = log_weights[c] - 0.5 * (kLog2Pi + std::log(v) + d * d / v);
    }
    return log_sum_exp(scratch, k);
  }
};

inline double log_normal_pdf(double x, double mean, double variance) noexcept {
  const double v = floored(variance);
  const double d = x - mean;
  return -0.5 * (kLog2Pi + std::log(v) + d * d / v);
}

}  // namespace mrpath::detail

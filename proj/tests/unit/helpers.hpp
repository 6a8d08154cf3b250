#pragma once

// Shared generators and brute-force oracles for the unit tests. Nothing here
// calls into the library's density code, so the oracles stay independent.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mrpath/model.hpp"

namespace testing {

inline constexpr double kPi = 3.14159265358979323846;

inline double npdf(double x, double mean, double var) {
  const double d = x - mean;
  return std::exp(-0.5 * d * d / var) / std::sqrt(2.0 * kPi * var);
}

inline double log_npdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * kPi * var) - 0.5 * d * d / var;
}

/// Random but well-conditioned mixture parameters.
inline mrpath::MixtureParams random_params(std::mt19937_64& g, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mrpath::MixtureParams p;
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    p.weights.push_back(0.2 + u(g));
    total += p.weights.back();
    p.means.push_back(-1.0 + 2.0 * u(g));
    p.variances.push_back(std::pow(10.0, -2.5 + 2.0 * u(g)));
  }
  for (auto& w : p.weights) w /= total;
  p.exposure_mean = -0.2 + 0.4 * u(g);
  p.exposure_variance = std::pow(10.0, -2.0 + 1.5 * u(g));
  return mrpath::canonicalized(p);
}

inline mrpath::SnpRecord random_record(std::mt19937_64& g, const std::string& id = "snp") {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  mrpath::SnpRecord r;
  r.snp_id = id;
  r.sigma_x = 0.003 + 0.02 * u(g);
  r.sigma_y = 0.003 + 0.02 * u(g);
  r.theta_x_hat = -0.3 + 0.6 * u(g);
  r.theta_y_hat = -0.2 + 0.4 * u(g);
  return r;
}

inline mrpath::MixtureParams two_cluster(double sd = 0.1) {
  mrpath::MixtureParams p;
  p.weights = {0.5, 0.5};
  p.means = {-0.5, 0.5};
  p.variances = {sd * sd, sd * sd};
  p.exposure_mean = 0.0;
  p.exposure_variance = 1.0;
  return p;
}

/// Joint posterior of (theta_X, beta, xi) for one SNP tabulated on a grid,
/// written straight from the generative model.
struct GridPosterior {
  std::vector<double> theta, beta;   // grid nodes
  std::vector<double> mass;          // theta-major, summed over xi
  std::vector<double> cluster_mass;  // K entries
  double dtheta = 0.0, dbeta = 0.0;

  double beta_mean() const {
    double s = 0.0, t = 0.0;
    for (std::size_t a = 0; a < theta.size(); ++a)
      for (std::size_t b = 0; b < beta.size(); ++b) {
        s += mass[a * beta.size() + b] * beta[b];
        t += mass[a * beta.size() + b];
      }
    return s / t;
  }

  /// Marginal CDF of beta at every beta node.
  std::vector<double> beta_cdf() const {
    std::vector<double> marg(beta.size(), 0.0);
    for (std::size_t a = 0; a < theta.size(); ++a)
      for (std::size_t b = 0; b < beta.size(); ++b) marg[b] += mass[a * beta.size() + b];
    double total = 0.0;
    for (double m : marg) total += m;
    double acc = 0.0;
    for (double& m : marg) {
      acc += m;
      m = acc / total;
    }
    return marg;
  }
};

inline GridPosterior grid_posterior(const mrpath::SnpRecord& r, const mrpath::MixtureParams& p, std::size_t nt,
                                    std::size_t nb, double beta_lo, double beta_hi) {
  GridPosterior g;
  // theta_X: centre on its posterior given theta_hat_X alone, wide enough for
  // the outcome to pull it around.
  const double v = 1.0 / (1.0 / (r.sigma_x * r.sigma_x) + 1.0 / p.exposure_variance);
  const double m = v * (r.theta_x_hat / (r.sigma_x * r.sigma_x) + p.exposure_mean / p.exposure_variance);
  const double half = 8.0 * std::sqrt(v);
  g.dtheta = 2.0 * half / static_cast<double>(nt - 1);
  g.dbeta = (beta_hi - beta_lo) / static_cast<double>(nb - 1);
  for (std::size_t a = 0; a < nt; ++a) g.theta.push_back(m - half + g.dtheta * static_cast<double>(a));
  for (std::size_t b = 0; b < nb; ++b) g.beta.push_back(beta_lo + g.dbeta * static_cast<double>(b));
  g.mass.assign(nt * nb, 0.0);
  g.cluster_mass.assign(p.num_clusters(), 0.0);
  for (std::size_t a = 0; a < nt; ++a) {
    const double t = g.theta[a];
    const double lt = log_npdf(t, p.exposure_mean, p.exposure_variance) + log_npdf(r.theta_x_hat, t, r.sigma_x * r.sigma_x);
    for (std::size_t b = 0; b < nb; ++b) {
      const double be = g.beta[b];
      const double ly = log_npdf(r.theta_y_hat, be * t, r.sigma_y * r.sigma_y);
      for (std::size_t c = 0; c < p.num_clusters(); ++c) {
        const double w = std::exp(lt + ly + std::log(p.weights[c]) + log_npdf(be, p.means[c], p.variances[c]));
        g.mass[a * nb + b] += w;
        g.cluster_mass[c] += w;
      }
    }
  }
  double total = 0.0;
  for (double x : g.cluster_mass) total += x;
  for (double& x : g.cluster_mass) x /= total;
  return g;
}

}  // namespace testing

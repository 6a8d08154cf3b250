#pragma once

// Ascent-based Monte-Carlo EM with an importance-sampling E-step.
//
// Per SNP, theta_X is proposed from its posterior given theta_hat_X alone,
// beta from its exact conditional given theta_X and theta_hat_Y, and the
// cluster label from P(xi | beta). The unnormalized weight of a draw is
// P(theta_hat_Y | theta_X, phi).
//
// The Q-function estimate is Rao-Blackwellized over the cluster label: each
// draw contributes sum_k r_k(beta) [log pi_k + log N(beta; mu_k, sigma_k^2)]
// with r_k evaluated under the sampling parameters, and the closed-form
// M-step is its exact maximizer.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrpath/fit_result.hpp"
#include "mrpath/model.hpp"

namespace mrpath {

enum class EtaScaling {
  kSqrtM,    ///< DeltaQ - z * eta_hat / sqrt(m): the asymptotically calibrated rule
  kLiteralM  ///< DeltaQ - z * eta_hat / m, for comparison only
};

struct McemConfig {
  std::size_t m0 = 500;
  double growth = 1.5;
  double alpha = 0.10;
  double gamma = 0.05;
  std::optional<double> epsilon;    ///< absolute stopping threshold; default epsilon_per_snp * p
  double epsilon_per_snp = 0.005;
  std::size_t max_iters = 500;
  std::size_t max_mc_size = std::size_t{1} << 20;
  std::size_t n_restarts = 10;
  std::uint64_t seed = 1;
  bool estimate_exposure = true;    ///< false holds (nu_x, lambda_x^2) at their initial values
  EtaScaling eta_scaling = EtaScaling::kSqrtM;
  double min_ess = 10.0;            ///< per-SNP effective sample size below this is reported

  void validate() const;
  double epsilon_for(std::size_t num_snps) const;
};

/// Identifies the random stream of one E-step; per-SNP engines are derived
/// from (seed, chain, step, snp_id).
struct DrawStream {
  std::uint64_t seed = 0;
  std::uint64_t chain = 0;
  std::uint64_t step = 0;
  std::uint64_t domain = 0x2222;
};

/// Draws for every SNP, stored SNP-major: draw j of SNP i lives at i * m + j.
struct ImportanceSample {
  MixtureParams params;  ///< parameters the draws were generated under
  std::size_t num_snps = 0;
  std::size_t draws_per_snp = 0;
  std::vector<double> theta_x;
  std::vector<double> beta;
  std::vector<std::uint32_t> cluster;
  std::vector<double> log_weights;       ///< log w_i^j (unnormalized)
  std::vector<double> norm_weights;      ///< per-SNP self-normalized
  std::vector<double> responsibilities;  ///< P(xi = k | beta_i^j), K per draw
  std::vector<double> ess;               ///< per-SNP 1 / sum_j (w_bar_i^j)^2
  std::vector<std::string> diagnostics;

  std::size_t num_clusters() const noexcept { return params.num_clusters(); }
  std::size_t index(std::size_t snp, std::size_t draw) const noexcept { return snp * draws_per_snp + draw; }
  std::span<const double> snp_norm_weights(std::size_t snp) const {
    return {norm_weights.data() + snp * draws_per_snp, draws_per_snp};
  }
  std::span<const double> draw_responsibilities(std::size_t snp, std::size_t draw) const {
    return {responsibilities.data() + index(snp, draw) * num_clusters(), num_clusters()};
  }
  LatentState latent(std::size_t snp, std::size_t draw) const {
    const auto at = index(snp, draw);
    return {theta_x[at], beta[at], cluster[at]};
  }
};

ImportanceSample e_step(const SummaryDataset& data, const MixtureParams& params, std::size_t m,
                        const DrawStream& stream, double min_ess = 10.0);

/// Rao-Blackwellized per-draw complete-data log-likelihood at params_eval,
/// using the sample's stored responsibilities.
double draw_loglik(const ImportanceSample& sample, const SnpRecord& record, std::size_t snp,
                   std::size_t draw, const MixtureParams& params_eval);

double q_estimate(const ImportanceSample& sample, const MixtureParams& params_eval,
                  const SummaryDataset& data);

struct MStepOptions {
  bool estimate_exposure = true;
};

struct MStepResult {
  MixtureParams params;                ///< labels aligned with sample.params (not re-sorted)
  std::vector<std::size_t> collapsed;  ///< clusters held at previous values
};

MStepResult m_step_aligned(const ImportanceSample& sample, const SummaryDataset& data,
                           const MStepOptions& options = {});

/// Maximizer of q_estimate(sample, ., data), returned in canonical label order.
MixtureParams m_step(const ImportanceSample& sample, const SummaryDataset& data,
                     const MStepOptions& options = {});

/// eta_hat^2 = m * sum_i sum_j w_bar_ij^2 (Lambda_ij - DeltaQ_i)^2, which is the
/// expanded form of m * sum_i DeltaQ_i^2 [ sum (wL)^2 / DeltaQ_i^2 - 2 sum w^2 L / DeltaQ_i + sum w^2 ]
/// and stays finite when DeltaQ_i = 0. Spans are SNP-major with m draws per SNP.
double eta_hat_squared(std::span<const double> norm_weights, std::span<const double> lambdas,
                       std::size_t draws_per_snp);

struct DeltaQResult {
  double delta_q = 0.0;
  double eta_hat = 0.0;
  double lower_bound = 0.0;  ///< delta_q - z_alpha * eta_hat / scale(m)
  bool accepted = false;
  bool eta_degenerate = false;
};

DeltaQResult delta_q_test(const ImportanceSample& sample, const MixtureParams& params_new,
                          const MixtureParams& params_old, const SummaryDataset& data, double alpha,
                          EtaScaling scaling = EtaScaling::kSqrtM);

bool check_convergence(double delta_q, double eta_hat, std::size_t m, double gamma, double epsilon,
                       EtaScaling scaling = EtaScaling::kSqrtM);

/// Data-driven starting values for one restart (ratio quantiles of strong SNPs).
MixtureParams initial_params(const SummaryDataset& data, std::size_t k, std::uint64_t seed,
                             std::uint64_t chain);

/// Runs config.n_restarts chains and keeps the one with the largest final Q~.
FitResult fit(const SummaryDataset& data, std::size_t k, const McemConfig& config);

/// Single chain from caller-supplied starting values.
FitResult fit_from(const SummaryDataset& data, const MixtureParams& start, const McemConfig& config);

}  // namespace mrpath

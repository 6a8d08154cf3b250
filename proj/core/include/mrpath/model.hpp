#pragma once

// Probability model for heterogeneous causal effects in summary-data
// Mendelian randomization:
//
//   xi_i ~ Categorical(pi),  beta_i | xi_i = k ~ N(mu_k, sigma_k^2),
//   theta_Xi ~ N(nu_x, lambda_x^2),
//   theta_hat_Xi ~ N(theta_Xi, sigma_Xi^2),
//   theta_hat_Yi ~ N(beta_i * theta_Xi, sigma_Yi^2).
//
// Cluster indices are 0-based in the C++ API and 1-based in every file
// format the tool emits.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mrpath {

inline constexpr double kVarianceFloor = 1e-12;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or invalid input data (bad TSV, non-positive standard errors, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters or configuration supplied by the caller.
class ConfigError : public Error {
 public:
  using Error::Error;
};

struct SnpRecord {
  std::string snp_id;
  double theta_x_hat = 0.0;  ///< estimated SNP-exposure association
  double sigma_x = 1.0;      ///< its standard error
  double theta_y_hat = 0.0;  ///< estimated SNP-outcome association
  double sigma_y = 1.0;      ///< its standard error

  /// Throws DataError unless all fields are finite and both SEs are positive.
  void validate() const;
};

class SummaryDataset {
 public:
  SummaryDataset() = default;
  /// Validates every record and rejects duplicate ids.
  explicit SummaryDataset(std::vector<SnpRecord> records);

  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  const SnpRecord& operator[](std::size_t i) const { return records_[i]; }
  std::span<const SnpRecord> records() const noexcept { return records_; }
  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  /// Copy with records ordered by snp_id.
  SummaryDataset sorted_by_id() const;

 private:
  std::vector<SnpRecord> records_;
};

/// phi = {pi_k, mu_k, sigma_k^2} plus the exposure prior (nu_x, lambda_x^2).
struct MixtureParams {
  std::vector<double> weights;
  std::vector<double> means;
  std::vector<double> variances;
  double exposure_mean = 0.0;
  double exposure_variance = 1.0;

  std::size_t num_clusters() const noexcept { return means.size(); }

  /// Checks shape, simplex (1e-12), positivity and finiteness. Does not
  /// require canonical order; see is_canonical().
  void validate() const;
  bool is_canonical() const;

  bool operator==(const MixtureParams&) const = default;
};

/// Clusters sorted by mean ascending, ties broken by variance ascending.
MixtureParams canonicalized(MixtureParams params);

struct LatentState {
  double theta_x = 0.0;
  double beta = 0.0;
  std::size_t cluster = 0;
};

/// Conditional law of beta given (theta_x, theta_hat_y): a K-component normal
/// mixture. Component weights are kept on the log scale and unnormalized;
/// they sum (after exp) to exp(log_marginal_outcome(...)).
struct ClusterConditional {
  std::vector<double> log_weights;
  std::vector<double> means;
  std::vector<double> variances;

  std::vector<double> normalized_weights() const;
  double mixture_mean() const;
  double density(double beta) const;
};

/// Posterior of theta_X given theta_hat_X only; the importance proposal.
struct ProposalParams {
  double mean = 0.0;
  double variance = 1.0;
};

double log_normal_pdf(double x, double mean, double variance) noexcept;
double log_sum_exp(std::span<const double> values) noexcept;

/// One SNP's complete-data log-likelihood, including both data terms.
double snp_complete_loglik(const MixtureParams& params, const SnpRecord& record,
                           const LatentState& latent);

double complete_data_loglik(const MixtureParams& params, const SummaryDataset& data,
                            std::span<const LatentState> latents);

/// P(xi = k | beta, phi), computed in log space.
std::vector<double> cluster_responsibilities(double beta, const MixtureParams& params);

ClusterConditional beta_conditional(double theta_x, double theta_y_hat, double sigma_y,
                                    const MixtureParams& params);

ProposalParams proposal_params(double theta_x_hat, double sigma_x, const MixtureParams& params);

/// log sum_k pi_k N(theta_y_hat; theta_x mu_k, theta_x^2 sigma_k^2 + sigma_y^2).
/// Bounded above by -0.5 log(2 pi sigma_y^2).
double log_marginal_outcome(double theta_x, double theta_y_hat, double sigma_y,
                            const MixtureParams& params);

}  // namespace mrpath

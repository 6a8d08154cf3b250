#pragma once

// Observed information via the Louis identity, with every conditional
// expectation estimated from an importance sample at the MLE.
//
// Free coordinates (d = 3K + 1), in this order:
//   a_1..a_{K-1}   logits of pi_1..pi_{K-1} against pi_K
//   mu_1..mu_K
//   s_1..s_K       log sigma_k^2
//   nu_x
//   t              log lambda_x^2

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mrpath/fit_result.hpp"
#include "mrpath/mcem.hpp"
#include "mrpath/model.hpp"

namespace mrpath {

std::size_t free_dimension(std::size_t k) noexcept;
std::vector<std::string> free_parameter_names(std::size_t k);

Eigen::VectorXd to_unconstrained(const MixtureParams& params);
MixtureParams from_unconstrained(const Eigen::VectorXd& x, std::size_t k);

struct ScoreHessian {
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};

/// Analytic derivatives of one SNP's complete-data log-likelihood in the free
/// coordinates. The data terms carry no parameters and drop out.
ScoreHessian score_and_hessian(const MixtureParams& params, const LatentState& latent,
                               const SnpRecord& record);

struct InformationMatrix {
  Eigen::MatrixXd matrix;
  bool positive_definite = false;
  double min_eigenvalue = 0.0;
  Eigen::VectorXd score_mean;      ///< IS estimate of E[dl | D, phi]
  Eigen::VectorXd score_mean_se;   ///< its Monte-Carlo standard error, per coordinate
  std::vector<std::string> diagnostics;
};

/// (sum_i g_i)(sum_i g_i)^T - sum_i g_i g_i^T == 2 sum_{i<n} g_i g_n^T, in O(p d^2).
Eigen::MatrixXd cross_snp_term(std::span<const Eigen::VectorXd> per_snp_scores);

/// Louis information from a stored sample. Cluster labels are integrated out
/// exactly using the sample's responsibilities.
InformationMatrix observed_information(const MixtureParams& params_hat, const SummaryDataset& data,
                                       const ImportanceSample& sample);

/// Same estimator, drawing m fresh draws per SNP and accumulating SNP by SNP
/// without holding the whole sample in memory.
InformationMatrix estimate_information(const MixtureParams& params_hat, const SummaryDataset& data,
                                       std::size_t m, std::uint64_t seed);

/// Wald intervals in the free coordinates, mapped back to (pi, mu, sigma^2,
/// nu_x, lambda_x^2). Weights use the delta method; variances are
/// exponentiated log-scale intervals. Throws Error if `info` is not positive
/// definite, naming the dominant coordinate of the offending eigenvector.
CiResult confidence_intervals(const InformationMatrix& info, const MixtureParams& params_hat,
                              double level = 0.95);

/// Fills fit.intervals from a fresh information sample of
/// info_multiplier * fit.final_mc_size draws per SNP. Leaves intervals empty
/// (with a diagnostic) when the information matrix is not positive definite.
void attach_intervals(FitResult& fit, const SummaryDataset& data, std::uint64_t seed,
                      double level = 0.95, double info_multiplier = 10.0);

}  // namespace mrpath

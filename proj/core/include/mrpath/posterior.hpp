#pragma once

// SNP-level posteriors of (theta_X, beta, xi) given fitted parameters, by
// sampling/importance resampling.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mrpath/model.hpp"

namespace mrpath {

struct SirResult {
  std::vector<LatentState> draws;  ///< n_out triplets resampled jointly
  /// sum_j w_bar_j P(xi = k | theta_X^j, theta_hat_Y): the Rao-Blackwellized
  /// estimate of P(xi = k | data), sharper than counting resampled labels.
  std::vector<double> membership;
  double ess = 0.0;
  std::vector<std::string> diagnostics;
};

SirResult sir_resample(const SnpRecord& record, const MixtureParams& params_hat, std::size_t m,
                       std::size_t n_out, std::uint64_t seed);

struct PosteriorSummary {
  std::string snp_id;
  std::vector<double> membership_probs;
  double beta_median = 0.0;
  double beta_lower = 0.0;
  double beta_upper = 0.0;
  std::size_t assigned_cluster = 0;  ///< 0-based argmax of membership_probs
  std::size_t n_resamples = 0;
  double ess = 0.0;
};

struct PosteriorOptions {
  double level = 0.95;
  std::size_t m = 50000;
  std::size_t n_out = 5000;
  std::uint64_t seed = 1;
};

/// One summary per SNP, in the dataset's order.
std::vector<PosteriorSummary> summarize_posteriors(const SummaryDataset& data, const MixtureParams& params_hat,
                                                   const PosteriorOptions& options = {});

}  // namespace mrpath

#pragma once

// Wald-ratio mixture baseline: a Gaussian mixture on ratio estimates with
// fixed per-SNP delta-method variances, fitted by exact EM.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "mrpath/model.hpp"

namespace mrpath {

inline constexpr double kRatioExposureFloor = 1e-12;

struct RatioData {
  std::vector<std::string> snp_ids;
  std::vector<double> ratio;  ///< theta_hat_Y / theta_hat_X
  std::vector<double> se;     ///< sigma_Y / |theta_hat_X|
  std::vector<std::string> excluded;  ///< ids dropped for |theta_hat_X| below the floor

  std::size_t size() const noexcept { return ratio.size(); }
};

RatioData make_ratio_data(const SummaryDataset& data);

struct RatioMixtureConfig {
  bool include_null = false;
  std::size_t max_iters = 5000;
  double tolerance = 1e-10;   ///< relative log-likelihood change
  std::size_t n_starts = 10;  ///< one quantile start plus random ones
  std::uint64_t seed = 1;
};

struct RatioMixtureFit {
  std::size_t k = 0;         ///< substantive clusters
  bool include_null = false;
  double null_weight = 0.0;  ///< weight of the mean-zero component (0 when disabled)
  std::vector<double> weights;
  std::vector<double> means;  ///< ascending
  double loglik = 0.0;
  double bic = 0.0;           ///< -2 loglik + (2K - 1 + null) log n
  std::size_t iterations = 0;
  bool converged = false;
  std::vector<double> loglik_trace;  ///< best start's trajectory
  std::size_t num_used = 0;
};

RatioMixtureFit fit_ratio_mixture(const RatioData& data, std::size_t k, const RatioMixtureConfig& config = {});
RatioMixtureFit fit_ratio_mixture(const SummaryDataset& data, std::size_t k, const RatioMixtureConfig& config = {});

struct RatioSelection {
  std::vector<RatioMixtureFit> fits;  ///< K = 1..k_max
  std::size_t chosen_k = 0;
};

RatioSelection select_ratio_k(const SummaryDataset& data, std::size_t k_max = 7,
                              const RatioMixtureConfig& config = {});

}  // namespace mrpath

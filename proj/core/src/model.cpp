#include "mrpath/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "mrpath/detail/kernels.hpp"

namespace mrpath {

namespace {

bool finite(double x) { return std::isfinite(x); }

std::vector<std::size_t> canonical_order(const MixtureParams& p) {
  std::vector<std::size_t> order(p.num_clusters());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (p.means[a] != p.means[b]) return p.means[a] < p.means[b];
    return p.variances[a] < p.variances[b];
  });
  return order;
}

}  // namespace

void SnpRecord::validate() const {
  std::ostringstream msg;
  if (!finite(theta_x_hat) || !finite(sigma_x) || !finite(theta_y_hat) || !finite(sigma_y)) {
    msg << "SNP '" << snp_id << "': non-finite value";
    throw DataError(msg.str());
  }
  if (!(sigma_x > 0.0) || !(sigma_y > 0.0)) {
    msg << "SNP '" << snp_id << "': standard errors must be positive";
    throw DataError(msg.str());
  }
}

SummaryDataset::SummaryDataset(std::vector<SnpRecord> records) : records_(std::move(records)) {
  std::unordered_set<std::string> seen;
  seen.reserve(records_.size());
  for (const auto& r : records_) {
    r.validate();
    if (!seen.insert(r.snp_id).second) throw DataError("duplicate snp_id '" + r.snp_id + "'");
  }
}

SummaryDataset SummaryDataset::sorted_by_id() const {
  auto copy = records_;
  std::sort(copy.begin(), copy.end(),
            [](const SnpRecord& a, const SnpRecord& b) { return a.snp_id < b.snp_id; });
  SummaryDataset out;
  out.records_ = std::move(copy);
  return out;
}

void MixtureParams::validate() const {
  const std::size_t k = means.size();
  if (k == 0) throw ConfigError("mixture needs at least one cluster");
  if (weights.size() != k || variances.size() != k)
    throw ConfigError("weights, means and variances must have equal length");
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    if (!finite(weights[c]) || !(weights[c] > 0.0) || weights[c] > 1.0)
      throw ConfigError("cluster weights must lie in (0, 1]");
    if (!finite(means[c])) throw ConfigError("cluster means must be finite");
    if (!finite(variances[c]) || !(variances[c] > 0.0))
      throw ConfigError("cluster variances must be positive and finite");
    total += weights[c];
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("cluster weights must sum to 1");
  if (!finite(exposure_mean)) throw ConfigError("exposure mean must be finite");
  if (!finite(exposure_variance) || !(exposure_variance > 0.0))
    throw ConfigError("exposure variance must be positive and finite");
}

bool MixtureParams::is_canonical() const {
  for (std::size_t c = 1; c < means.size(); ++c) {
    if (means[c] < means[c - 1]) return false;
    if (means[c] == means[c - 1] && variances[c] < variances[c - 1]) return false;
  }
  return true;
}

MixtureParams canonicalized(MixtureParams params) {
  const auto order = canonical_order(params);
  MixtureParams out = params;
  for (std::size_t c = 0; c < order.size(); ++c) {
    out.weights[c] = params.weights[order[c]];
    out.means[c] = params.means[order[c]];
    out.variances[c] = params.variances[order[c]];
  }
  return out;
}

std::vector<double> ClusterConditional::normalized_weights() const {
  const double norm = detail::log_sum_exp(log_weights.data(), log_weights.size());
  std::vector<double> w(log_weights.size());
  for (std::size_t c = 0; c < w.size(); ++c) w[c] = std::exp(log_weights[c] - norm);
  return w;
}

double ClusterConditional::mixture_mean() const {
  const auto w = normalized_weights();
  double m = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c) m += w[c] * means[c];
  return m;
}

double ClusterConditional::density(double beta) const {
  const auto w = normalized_weights();
  double d = 0.0;
  for (std::size_t c = 0; c < w.size(); ++c)
    d += w[c] * std::exp(detail::log_normal_pdf(beta, means[c], variances[c]));
  return d;
}

double log_normal_pdf(double x, double mean, double variance) noexcept {
  return detail::log_normal_pdf(x, mean, variance);
}

double log_sum_exp(std::span<const double> values) noexcept {
  return detail::log_sum_exp(values.data(), values.size());
}

double snp_complete_loglik(const MixtureParams& params, const SnpRecord& record,
                           const LatentState& latent) {
  if (latent.cluster >= params.num_clusters()) throw ConfigError("latent cluster index out of range");
  if (!finite(latent.theta_x) || !finite(latent.beta)) throw DataError("non-finite latent state");
  const std::size_t c = latent.cluster;
  return detail::log_normal_pdf(record.theta_x_hat, latent.theta_x, record.sigma_x * record.sigma_x) +
         detail::log_normal_pdf(record.theta_y_hat, latent.beta * latent.theta_x,
                                record.sigma_y * record.sigma_y) +
         detail::log_normal_pdf(latent.theta_x, params.exposure_mean, params.exposure_variance) +
         std::log(params.weights[c]) +
         detail::log_normal_pdf(latent.beta, params.means[c], params.variances[c]);
}

double complete_data_loglik(const MixtureParams& params, const SummaryDataset& data,
                            std::span<const LatentState> latents) {
  if (latents.size() != data.size())
    throw ConfigError("latent state count does not match the number of SNPs");
  params.validate();
  double total = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) total += snp_complete_loglik(params, data[i], latents[i]);
  return total;
}

std::vector<double> cluster_responsibilities(double beta, const MixtureParams& params) {
  const detail::MixtureCache cache(params);
  std::vector<double> r(cache.k);
  cache.responsibilities(beta, r.data());
  return r;
}

ClusterConditional beta_conditional(double theta_x, double theta_y_hat, double sigma_y,
                                    const MixtureParams& params) {
  if (!(sigma_y > 0.0)) throw DataError("sigma_y must be positive");
  const std::size_t k = params.num_clusters();
  const double sy2 = sigma_y * sigma_y;
  const double precision_data = theta_x * theta_x / sy2;
  ClusterConditional out;
  out.log_weights.resize(k);
  out.means.resize(k);
  out.variances.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const double s2 = detail::floored(params.variances[c]);
    const double v = 1.0 / (1.0 / s2 + precision_data);
    out.variances[c] = v;
    out.means[c] = v * (theta_y_hat * theta_x / sy2 + params.means[c] / s2);
    out.log_weights[c] =
        std::log(params.weights[c]) +
        detail::log_normal_pdf(theta_y_hat, theta_x * params.means[c], theta_x * theta_x * s2 + sy2);
  }
  return out;
}

ProposalParams proposal_params(double theta_x_hat, double sigma_x, const MixtureParams& params) {
  if (!(sigma_x > 0.0)) throw DataError("sigma_x must be positive");
  const double sx2 = sigma_x * sigma_x;
  const double lam = detail::floored(params.exposure_variance);
  const double v = 1.0 / (1.0 / sx2 + 1.0 / lam);
  return {v * (theta_x_hat / sx2 + params.exposure_mean / lam), v};
}

double log_marginal_outcome(double theta_x, double theta_y_hat, double sigma_y,
                            const MixtureParams& params) {
  if (!(sigma_y > 0.0)) throw DataError("sigma_y must be positive");
  const detail::MixtureCache cache(params);
  std::vector<double> scratch(cache.k);
  return cache.log_marginal_outcome(theta_x, theta_y_hat, sigma_y * sigma_y, scratch.data());
}

}  // namespace mrpath

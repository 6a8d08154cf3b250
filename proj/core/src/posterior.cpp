#include "mrpath/posterior.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "mrpath/mcem.hpp"
#include "mrpath/parallel.hpp"
#include "mrpath/rng.hpp"
#include "mrpath/stats.hpp"

namespace mrpath {

namespace {
constexpr double kMinPosteriorEss = 10.0;
}  // namespace

SirResult sir_resample(const SnpRecord& record, const MixtureParams& params_hat, std::size_t m,
                       std::size_t n_out, std::uint64_t seed) {
  if (m == 0 || n_out == 0) throw ConfigError("SIR needs m >= 1 and n_out >= 1");
  params_hat.validate();
  const std::size_t k = params_hat.num_clusters();
  const SummaryDataset one(std::vector<SnpRecord>{record});
  const auto sample = e_step(one, params_hat, m, {seed, 0, 0, rng::kPosterior}, 0.0);

  SirResult out;
  out.ess = sample.ess[0];
  if (n_out > m) out.diagnostics.push_back("n_out exceeds m; resampled draws will repeat heavily");
  if (out.ess < kMinPosteriorEss && m >= kMinPosteriorEss)
    out.diagnostics.push_back("effective sample size " + std::to_string(out.ess) +
                              " is very low; the proposal misses this SNP's posterior");
  const auto w = sample.snp_norm_weights(0);
  if (std::all_of(w.begin(), w.end(), [&](double x) { return x == w[0]; }) && m > 1)
    out.diagnostics.push_back("importance weights are uniform; resampling is uniform");

  out.membership.assign(k, 0.0);
  std::vector<double> lp(k);
  const double vy = record.sigma_y * record.sigma_y;
  for (std::size_t j = 0; j < m; ++j) {
    const double t = sample.theta_x[j];
    for (std::size_t c = 0; c < k; ++c)
      lp[c] = std::log(params_hat.weights[c]) +
              log_normal_pdf(record.theta_y_hat, t * params_hat.means[c], t * t * params_hat.variances[c] + vy);
    const double norm = log_sum_exp(lp);
    for (std::size_t c = 0; c < k; ++c) out.membership[c] += w[j] * std::exp(lp[c] - norm);
  }
  double total = 0.0;
  for (double x : out.membership) total += x;
  for (double& x : out.membership) x /= total;

  auto engine = rng::make_engine(seed, {rng::kPosterior, 1, rng::hash_label(record.snp_id)});
  std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
  out.draws.reserve(n_out);
  for (std::size_t r = 0; r < n_out; ++r) out.draws.push_back(sample.latent(0, pick(engine)));
  return out;
}

std::vector<PosteriorSummary> summarize_posteriors(const SummaryDataset& data, const MixtureParams& params_hat,
                                                   const PosteriorOptions& options) {
  if (!(options.level > 0.0 && options.level < 1.0)) throw ConfigError("credible level must lie in (0, 1)");
  std::vector<PosteriorSummary> out(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    const auto sir = sir_resample(data[i], params_hat, options.m, options.n_out, options.seed);
    PosteriorSummary& s = out[i];
    s.snp_id = data[i].snp_id;
    s.membership_probs = sir.membership;
    s.assigned_cluster = static_cast<std::size_t>(
        std::max_element(s.membership_probs.begin(), s.membership_probs.end()) - s.membership_probs.begin());
    std::vector<double> betas;
    betas.reserve(sir.draws.size());
    for (const auto& d : sir.draws) betas.push_back(d.beta);
    s.beta_median = stats::quantile(betas, 0.5);
    s.beta_lower = stats::quantile(betas, 0.5 * (1.0 - options.level));
    s.beta_upper = stats::quantile(betas, 0.5 * (1.0 + options.level));
    s.n_resamples = sir.draws.size();
    s.ess = sir.ess;
  });
  return out;
}

}  // namespace mrpath

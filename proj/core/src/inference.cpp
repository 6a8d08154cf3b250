#include "mrpath/inference.hpp"

#include <cmath>
#include <sstream>

#include "mrpath/parallel.hpp"
#include "mrpath/rng.hpp"
#include "mrpath/stats.hpp"

namespace mrpath {

namespace {

struct Layout {
  std::size_t k;
  std::size_t logit(std::size_t j) const { return j; }
  std::size_t mean(std::size_t c) const { return k - 1 + c; }
  std::size_t logvar(std::size_t c) const { return 2 * k - 1 + c; }
  std::size_t exposure_mean() const { return 3 * k - 1; }
  std::size_t exposure_logvar() const { return 3 * k; }
  std::size_t dim() const { return 3 * k + 1; }
};

// Writes gradient and Hessian of the parameter-dependent part of l_i for a
// latent state with cluster c into preallocated g and h.
void fill_score_hessian(const MixtureParams& p, double theta, double beta, std::size_t c, Eigen::VectorXd& g,
                        Eigen::MatrixXd& h) {
  const Layout L{p.num_clusters()};
  g.setZero();
  h.setZero();
  const std::size_t k = L.k;
  for (std::size_t j = 0; j + 1 < k; ++j) {
    g(L.logit(j)) = (j == c ? 1.0 : 0.0) - p.weights[j];
    for (std::size_t l = 0; l + 1 < k; ++l)
      h(L.logit(j), L.logit(l)) = -((j == l ? p.weights[j] : 0.0) - p.weights[j] * p.weights[l]);
  }
  const double inv_v = 1.0 / p.variances[c];
  const double d = beta - p.means[c];
  g(L.mean(c)) = d * inv_v;
  g(L.logvar(c)) = -0.5 + 0.5 * d * d * inv_v;
  h(L.mean(c), L.mean(c)) = -inv_v;
  h(L.mean(c), L.logvar(c)) = h(L.logvar(c), L.mean(c)) = -d * inv_v;
  h(L.logvar(c), L.logvar(c)) = -0.5 * d * d * inv_v;

  const double inv_l = 1.0 / p.exposure_variance;
  const double e = theta - p.exposure_mean;
  g(L.exposure_mean()) = e * inv_l;
  g(L.exposure_logvar()) = -0.5 + 0.5 * e * e * inv_l;
  h(L.exposure_mean(), L.exposure_mean()) = -inv_l;
  h(L.exposure_mean(), L.exposure_logvar()) = h(L.exposure_logvar(), L.exposure_mean()) = -e * inv_l;
  h(L.exposure_logvar(), L.exposure_logvar()) = -0.5 * e * e * inv_l;
}

struct SnpAccumulator {
  Eigen::MatrixXd neg_hessian;   // sum_j w sum_k r (-H)
  Eigen::MatrixXd outer;         // sum_j w sum_k r g g^T
  Eigen::VectorXd score;         // sum_j w sum_k r g
  Eigen::VectorXd score_var;     // sum_j w^2 (g_bar_j - score)^2, per coordinate
};

SnpAccumulator accumulate_snp(const MixtureParams& params, const ImportanceSample& sample, std::size_t snp) {
  const std::size_t d = free_dimension(params.num_clusters());
  const std::size_t k = params.num_clusters();
  const std::size_t m = sample.draws_per_snp;
  SnpAccumulator acc{Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d), Eigen::VectorXd::Zero(d),
                     Eigen::VectorXd::Zero(d)};
  Eigen::VectorXd g(d), gbar(d);
  Eigen::MatrixXd h(d, d);
  std::vector<Eigen::VectorXd> draw_scores(m, Eigen::VectorXd::Zero(d));
  for (std::size_t j = 0; j < m; ++j) {
    const auto at = sample.index(snp, j);
    const double w = sample.norm_weights[at];
    const double* r = sample.responsibilities.data() + at * k;
    gbar.setZero();
    for (std::size_t c = 0; c < k; ++c) {
      if (r[c] == 0.0) continue;
      fill_score_hessian(params, sample.theta_x[at], sample.beta[at], c, g, h);
      const double wr = w * r[c];
      acc.neg_hessian.noalias() -= wr * h;
      acc.outer.noalias() += wr * g * g.transpose();
      gbar.noalias() += r[c] * g;
    }
    draw_scores[j] = gbar;
    acc.score.noalias() += w * gbar;
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double w = sample.norm_weights[sample.index(snp, j)];
    acc.score_var.array() += (w * (draw_scores[j] - acc.score).array()).square();
  }
  return acc;
}

InformationMatrix assemble(std::vector<SnpAccumulator>& parts, std::size_t d) {
  Eigen::MatrixXd neg_h = Eigen::MatrixXd::Zero(d, d);
  Eigen::MatrixXd outer = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
  Eigen::VectorXd var = Eigen::VectorXd::Zero(d);
  std::vector<Eigen::VectorXd> scores;
  scores.reserve(parts.size());
  for (auto& a : parts) {
    neg_h += a.neg_hessian;
    outer += a.outer;
    total += a.score;
    var += a.score_var;
    scores.push_back(a.score);
  }
  InformationMatrix info;
  // I = E[-H] - E[dl dl^T] + E[dl] E[dl]^T, with E[dl dl^T] split into
  // within-SNP second moments plus the cross-SNP products.
  info.matrix = neg_h - (outer + cross_snp_term(scores)) + total * total.transpose();
  info.matrix = 0.5 * (info.matrix + info.matrix.transpose()).eval();
  info.score_mean = total;
  info.score_mean_se = var.cwiseSqrt();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info.matrix, Eigen::EigenvaluesOnly);
  info.min_eigenvalue = eig.eigenvalues().minCoeff();
  info.positive_definite = info.min_eigenvalue > 0.0;
  if (!info.positive_definite) {
    std::ostringstream msg;
    msg << "observed information is not positive definite (min eigenvalue " << info.min_eigenvalue << ")";
    info.diagnostics.push_back(msg.str());
  }
  return info;
}

}  // namespace

std::size_t free_dimension(std::size_t k) noexcept { return 3 * k + 1; }

std::vector<std::string> free_parameter_names(std::size_t k) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j + 1 < k; ++j) names.push_back("logit_pi_" + std::to_string(j + 1));
  for (std::size_t c = 0; c < k; ++c) names.push_back("mu_" + std::to_string(c + 1));
  for (std::size_t c = 0; c < k; ++c) names.push_back("log_sigma2_" + std::to_string(c + 1));
  names.emplace_back("exposure_mean");
  names.emplace_back("log_exposure_variance");
  return names;
}

Eigen::VectorXd to_unconstrained(const MixtureParams& params) {
  const Layout L{params.num_clusters()};
  Eigen::VectorXd x(L.dim());
  const double log_last = std::log(params.weights[L.k - 1]);
  for (std::size_t j = 0; j + 1 < L.k; ++j) x(L.logit(j)) = std::log(params.weights[j]) - log_last;
  for (std::size_t c = 0; c < L.k; ++c) {
    x(L.mean(c)) = params.means[c];
    x(L.logvar(c)) = std::log(params.variances[c]);
  }
  x(L.exposure_mean()) = params.exposure_mean;
  x(L.exposure_logvar()) = std::log(params.exposure_variance);
  return x;
}

MixtureParams from_unconstrained(const Eigen::VectorXd& x, std::size_t k) {
  const Layout L{k};
  if (static_cast<std::size_t>(x.size()) != L.dim()) throw ConfigError("free-coordinate vector has wrong length");
  MixtureParams p;
  p.weights.resize(k);
  p.means.resize(k);
  p.variances.resize(k);
  double hi = 0.0;
  for (std::size_t j = 0; j + 1 < k; ++j) hi = std::max(hi, x(L.logit(j)));
  double total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const double a = c + 1 < k ? x(L.logit(c)) : 0.0;
    p.weights[c] = std::exp(a - hi);
    total += p.weights[c];
  }
  for (auto& w : p.weights) w /= total;
  for (std::size_t c = 0; c < k; ++c) {
    p.means[c] = x(L.mean(c));
    p.variances[c] = std::exp(x(L.logvar(c)));
  }
  p.exposure_mean = x(L.exposure_mean());
  p.exposure_variance = std::exp(x(L.exposure_logvar()));
  return p;
}

ScoreHessian score_and_hessian(const MixtureParams& params, const LatentState& latent, const SnpRecord&) {
  params.validate();
  if (latent.cluster >= params.num_clusters()) throw ConfigError("latent cluster index out of range");
  const std::size_t d = free_dimension(params.num_clusters());
  ScoreHessian out{Eigen::VectorXd(d), Eigen::MatrixXd(d, d)};
  fill_score_hessian(params, latent.theta_x, latent.beta, latent.cluster, out.gradient, out.hessian);
  return out;
}

Eigen::MatrixXd cross_snp_term(std::span<const Eigen::VectorXd> per_snp_scores) {
  if (per_snp_scores.empty()) return {};
  const auto d = per_snp_scores.front().size();
  Eigen::VectorXd total = Eigen::VectorXd::Zero(d);
  Eigen::MatrixXd self = Eigen::MatrixXd::Zero(d, d);
  for (const auto& g : per_snp_scores) {
    total += g;
    self.noalias() += g * g.transpose();
  }
  return total * total.transpose() - self;
}

InformationMatrix observed_information(const MixtureParams& params_hat, const SummaryDataset& data,
                                       const ImportanceSample& sample) {
  if (sample.num_snps != data.size()) throw ConfigError("importance sample does not match dataset size");
  if (sample.num_clusters() != params_hat.num_clusters()) throw ConfigError("parameter dimension does not match the sample");
  params_hat.validate();
  std::vector<SnpAccumulator> parts(data.size());
  parallel_for(data.size(), [&](std::size_t i) { parts[i] = accumulate_snp(params_hat, sample, i); });
  return assemble(parts, free_dimension(params_hat.num_clusters()));
}

InformationMatrix estimate_information(const MixtureParams& params_hat, const SummaryDataset& data, std::size_t m,
                                       std::uint64_t seed) {
  params_hat.validate();
  std::vector<SnpAccumulator> parts(data.size());
  parallel_for(data.size(), [&](std::size_t i) {
    const SummaryDataset one(std::vector<SnpRecord>{data[i]});
    const auto sample = e_step(one, params_hat, m, {seed, 0, 0, rng::kInformation});
    parts[i] = accumulate_snp(params_hat, sample, 0);
  });
  return assemble(parts, free_dimension(params_hat.num_clusters()));
}

CiResult confidence_intervals(const InformationMatrix& info, const MixtureParams& params_hat, double level) {
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("confidence level must lie in (0, 1)");
  const std::size_t k = params_hat.num_clusters();
  const Layout L{k};
  if (static_cast<std::size_t>(info.matrix.rows()) != L.dim()) throw ConfigError("information matrix has wrong dimension");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info.matrix);
  const auto& values = eig.eigenvalues();
  const double scale = std::max(1.0, values.cwiseAbs().maxCoeff());
  Eigen::Index worst = 0;
  values.minCoeff(&worst);
  if (!(values(worst) > 1e-12 * scale)) {
    const auto names = free_parameter_names(k);
    Eigen::Index dominant = 0;
    eig.eigenvectors().col(worst).cwiseAbs().maxCoeff(&dominant);
    std::ostringstream msg;
    msg << "observed information is singular or indefinite (eigenvalue " << values(worst)
        << "); offending direction is dominated by " << names[static_cast<std::size_t>(dominant)];
    throw Error(msg.str());
  }
  const Eigen::MatrixXd cov =
      eig.eigenvectors() * values.cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  const double z = stats::normal_quantile(0.5 + 0.5 * level);

  CiResult out;
  out.level = level;
  if (k > 1) {
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(k, k - 1);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t j = 0; j + 1 < k; ++j)
        jac(c, j) = params_hat.weights[c] * ((c == j ? 1.0 : 0.0) - params_hat.weights[j]);
    const Eigen::MatrixXd cov_a = cov.topLeftCorner(k - 1, k - 1);
    const Eigen::MatrixXd cov_pi = jac * cov_a * jac.transpose();
    for (std::size_t c = 0; c < k; ++c) {
      const double se = std::sqrt(std::max(cov_pi(c, c), 0.0));
      const double est = params_hat.weights[c];
      out.entries.push_back({"pi_" + std::to_string(c + 1), est, se, std::max(0.0, est - z * se),
                             std::min(1.0, est + z * se), "identity"});
    }
  }
  for (std::size_t c = 0; c < k; ++c) {
    const double se = std::sqrt(cov(L.mean(c), L.mean(c)));
    const double est = params_hat.means[c];
    out.entries.push_back({"mu_" + std::to_string(c + 1), est, se, est - z * se, est + z * se, "identity"});
  }
  for (std::size_t c = 0; c < k; ++c) {
    const double se_log = std::sqrt(cov(L.logvar(c), L.logvar(c)));
    const double est = params_hat.variances[c];
    out.entries.push_back({"sigma2_" + std::to_string(c + 1), est, est * se_log, est * std::exp(-z * se_log),
                           est * std::exp(z * se_log), "log"});
  }
  {
    const double se = std::sqrt(cov(L.exposure_mean(), L.exposure_mean()));
    const double est = params_hat.exposure_mean;
    out.entries.push_back({"exposure_mean", est, se, est - z * se, est + z * se, "identity"});
    const double se_log = std::sqrt(cov(L.exposure_logvar(), L.exposure_logvar()));
    const double ev = params_hat.exposure_variance;
    out.entries.push_back({"exposure_variance", ev, ev * se_log, ev * std::exp(-z * se_log), ev * std::exp(z * se_log),
                           "log"});
  }
  return out;
}

void attach_intervals(FitResult& fit, const SummaryDataset& data, std::uint64_t seed, double level,
                      double info_multiplier) {
  const auto m = static_cast<std::size_t>(std::ceil(info_multiplier * static_cast<double>(std::max<std::size_t>(fit.final_mc_size, 1))));
  const auto info = estimate_information(fit.params, data.sorted_by_id(), m, seed);
  if (!info.positive_definite) {
    fit.diagnostics.insert(fit.diagnostics.end(), info.diagnostics.begin(), info.diagnostics.end());
    fit.diagnostics.push_back("standard errors unavailable");
    fit.intervals.reset();
    return;
  }
  try {
    fit.intervals = confidence_intervals(info, fit.params, level);
  } catch (const Error& e) {
    fit.diagnostics.push_back(std::string("standard errors unavailable: ") + e.what());
    fit.intervals.reset();
  }
}

}  // namespace mrpath

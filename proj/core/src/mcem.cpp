#include "mrpath/mcem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "mrpath/detail/kernels.hpp"
#include "mrpath/parallel.hpp"
#include "mrpath/rng.hpp"
#include "mrpath/stats.hpp"

namespace mrpath {

namespace {

constexpr double kCollapsedMass = 1e-8;

double data_loglik(const SnpRecord& rec, double theta, double beta) {
  const double dx = rec.theta_x_hat - theta;
  const double dy = rec.theta_y_hat - beta * theta;
  const double sx2 = rec.sigma_x * rec.sigma_x;
  const double sy2 = rec.sigma_y * rec.sigma_y;
  return -0.5 * (2.0 * detail::kLog2Pi + std::log(sx2) + std::log(sy2) + dx * dx / sx2 + dy * dy / sy2);
}

// Parameter-dependent part of the Rao-Blackwellized per-draw log-likelihood.
double param_loglik(const detail::MixtureCache& cache, double theta, double beta, const double* resp) {
  double acc = cache.log_prior_theta(theta);
  for (std::size_t c = 0; c < cache.k; ++c) acc += resp[c] * cache.log_joint(beta, c);
  return acc;
}

std::size_t pick(const double* probs, std::size_t k, double u) {
  double acc = 0.0;
  for (std::size_t c = 0; c + 1 < k; ++c) {
    acc += probs[c];
    if (u < acc) return c;
  }
  return k - 1;
}

void draw_snp(const SnpRecord& rec, const detail::MixtureCache& cache, const ProposalParams& proposal,
              std::size_t m, rng::Engine& engine, double* theta_out, double* beta_out,
              std::uint32_t* cluster_out, double* logw_out, double* resp_out) {
  const std::size_t k = cache.k;
  const double sy2 = rec.sigma_y * rec.sigma_y;
  const double prop_sd = std::sqrt(proposal.variance);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<double> comp(k);

  for (std::size_t j = 0; j < m; ++j) {
    const double theta = proposal.mean + prop_sd * normal(engine);
    const double t2 = theta * theta;
    for (std::size_t c = 0; c < k; ++c) {
      const double v = t2 * cache.variances[c] + sy2;
      const double d = rec.theta_y_hat - theta * cache.means[c];
      comp[c] = cache.log_weights[c] - 0.5 * (detail::kLog2Pi + std::log(v) + d * d / v);
    }
    const double logw = detail::log_sum_exp(comp.data(), k);

    std::size_t c = 0;
    if (k > 1) {
      for (std::size_t q = 0; q < k; ++q) comp[q] = std::exp(comp[q] - logw);
      c = pick(comp.data(), k, uniform(engine));
    }
    const double post_var = 1.0 / (cache.inv_variances[c] + t2 / sy2);
    const double post_mean = post_var * (rec.theta_y_hat * theta / sy2 + cache.means[c] * cache.inv_variances[c]);
    const double beta = post_mean + std::sqrt(post_var) * normal(engine);

    double* resp = resp_out + j * k;
    cache.responsibilities(beta, resp);
    const std::size_t xi = k > 1 ? pick(resp, k, uniform(engine)) : 0;

    theta_out[j] = theta;
    beta_out[j] = beta;
    cluster_out[j] = static_cast<std::uint32_t>(xi);
    logw_out[j] = logw;
  }
}

void require_matching(const ImportanceSample& sample, const SummaryDataset& data) {
  if (sample.num_snps != data.size()) throw ConfigError("importance sample does not match dataset size");
}

double scaled_se(double eta_hat, std::size_t m, EtaScaling scaling) {
  const double md = static_cast<double>(m);
  return scaling == EtaScaling::kSqrtM ? eta_hat / std::sqrt(md) : eta_hat / md;
}

}  // namespace

void McemConfig::validate() const {
  if (m0 < 100) throw ConfigError("m0 must be at least 100");
  if (!(growth > 1.0)) throw ConfigError("growth must exceed 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in (0, 1)");
  if (epsilon && !(*epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(epsilon_per_snp > 0.0)) throw ConfigError("epsilon_per_snp must be positive");
  if (max_iters == 0) throw ConfigError("max_iters must be positive");
  if (max_mc_size < m0) throw ConfigError("max_mc_size must be at least m0");
  if (n_restarts == 0) throw ConfigError("n_restarts must be positive");
}

double McemConfig::epsilon_for(std::size_t num_snps) const {
  return epsilon ? *epsilon : epsilon_per_snp * static_cast<double>(num_snps);
}

ImportanceSample e_step(const SummaryDataset& data, const MixtureParams& params, std::size_t m,
                        const DrawStream& stream, double min_ess) {
  if (m == 0) throw ConfigError("e_step needs at least one draw per SNP");
  params.validate();
  const std::size_t p = data.size();
  const std::size_t k = params.num_clusters();
  const detail::MixtureCache cache(params);

  ImportanceSample s;
  s.params = params;
  s.num_snps = p;
  s.draws_per_snp = m;
  s.theta_x.resize(p * m);
  s.beta.resize(p * m);
  s.cluster.resize(p * m);
  s.log_weights.resize(p * m);
  s.norm_weights.resize(p * m);
  s.responsibilities.resize(p * m * k);
  s.ess.resize(p);

  parallel_for(p, [&](std::size_t i) {
    const SnpRecord& rec = data[i];
    auto engine = rng::make_engine(stream.seed, {stream.domain, stream.chain, stream.step,
                                                 rng::hash_label(rec.snp_id)});
    const auto proposal = proposal_params(rec.theta_x_hat, rec.sigma_x, params);
    const std::size_t off = i * m;
    draw_snp(rec, cache, proposal, m, engine, s.theta_x.data() + off, s.beta.data() + off,
             s.cluster.data() + off, s.log_weights.data() + off, s.responsibilities.data() + off * k);

    const double* lw = s.log_weights.data() + off;
    double* nw = s.norm_weights.data() + off;
    const double hi = *std::max_element(lw, lw + m);
    double total = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      nw[j] = std::exp(lw[j] - hi);
      total += nw[j];
    }
    double sq = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      nw[j] /= total;
      sq += nw[j] * nw[j];
    }
    s.ess[i] = 1.0 / sq;
  });

  std::size_t low = 0;
  std::string first_low;
  for (std::size_t i = 0; i < p; ++i) {
    if (s.ess[i] < min_ess) {
      if (low == 0) first_low = data[i].snp_id;
      ++low;
    }
  }
  if (low > 0) {
    std::ostringstream msg;
    msg << "low effective sample size (< " << min_ess << ") for " << low << " SNP(s), first: " << first_low;
    s.diagnostics.push_back(msg.str());
  }
  return s;
}

double draw_loglik(const ImportanceSample& sample, const SnpRecord& record, std::size_t snp,
                   std::size_t draw, const MixtureParams& params_eval) {
  if (params_eval.num_clusters() != sample.num_clusters())
    throw ConfigError("parameter dimension does not match the sample");
  const detail::MixtureCache cache(params_eval);
  const auto at = sample.index(snp, draw);
  return data_loglik(record, sample.theta_x[at], sample.beta[at]) +
         param_loglik(cache, sample.theta_x[at], sample.beta[at], sample.draw_responsibilities(snp, draw).data());
}

double q_estimate(const ImportanceSample& sample, const MixtureParams& params_eval,
                  const SummaryDataset& data) {
  require_matching(sample, data);
  if (params_eval.num_clusters() != sample.num_clusters())
    throw ConfigError("parameter dimension does not match the sample");
  params_eval.validate();
  const detail::MixtureCache cache(params_eval);
  const std::size_t m = sample.draws_per_snp;
  const std::size_t k = sample.num_clusters();
  std::vector<double> per_snp(sample.num_snps);
  parallel_for(sample.num_snps, [&](std::size_t i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const auto at = i * m + j;
      const double l = data_loglik(data[i], sample.theta_x[at], sample.beta[at]) +
                       param_loglik(cache, sample.theta_x[at], sample.beta[at],
                                    sample.responsibilities.data() + at * k);
      acc += sample.norm_weights[at] * l;
    }
    per_snp[i] = acc;
  });
  return std::accumulate(per_snp.begin(), per_snp.end(), 0.0);
}

MStepResult m_step_aligned(const ImportanceSample& sample, const SummaryDataset& data,
                           const MStepOptions& options) {
  require_matching(sample, data);
  const std::size_t p = sample.num_snps;
  const std::size_t m = sample.draws_per_snp;
  const std::size_t k = sample.num_clusters();
  const double pd = static_cast<double>(p);

  // First pass: weighted masses and first moments, per SNP then reduced in order.
  std::vector<double> part(p * (2 * k + 1), 0.0);
  parallel_for(p, [&](std::size_t i) {
    double* out = part.data() + i * (2 * k + 1);
    for (std::size_t j = 0; j < m; ++j) {
      const auto at = i * m + j;
      const double w = sample.norm_weights[at];
      const double* r = sample.responsibilities.data() + at * k;
      for (std::size_t c = 0; c < k; ++c) {
        out[c] += w * r[c];
        out[k + c] += w * r[c] * sample.beta[at];
      }
      out[2 * k] += w * sample.theta_x[at];
    }
  });
  std::vector<double> mass(k, 0.0), first(k, 0.0);
  double theta_sum = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    const double* in = part.data() + i * (2 * k + 1);
    for (std::size_t c = 0; c < k; ++c) {
      mass[c] += in[c];
      first[c] += in[k + c];
    }
    theta_sum += in[2 * k];
  }

  const MixtureParams& prev = sample.params;
  MStepResult result;
  MixtureParams& next = result.params;
  next = prev;
  for (std::size_t c = 0; c < k; ++c) {
    if (mass[c] < kCollapsedMass) {
      result.collapsed.push_back(c);
      continue;
    }
    next.means[c] = first[c] / mass[c];
  }
  next.exposure_mean = options.estimate_exposure ? theta_sum / pd : prev.exposure_mean;

  // Second pass: centred second moments.
  std::vector<double> part2(p * (k + 1), 0.0);
  parallel_for(p, [&](std::size_t i) {
    double* out = part2.data() + i * (k + 1);
    for (std::size_t j = 0; j < m; ++j) {
      const auto at = i * m + j;
      const double w = sample.norm_weights[at];
      const double* r = sample.responsibilities.data() + at * k;
      for (std::size_t c = 0; c < k; ++c) {
        const double d = sample.beta[at] - next.means[c];
        out[c] += w * r[c] * d * d;
      }
      const double dt = sample.theta_x[at] - next.exposure_mean;
      out[k] += w * dt * dt;
    }
  });
  std::vector<double> second(k + 1, 0.0);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t c = 0; c <= k; ++c) second[c] += part2[i * (k + 1) + c];

  double weight_total = 0.0;
  for (std::size_t c = 0; c < k; ++c) {
    const bool held = std::find(result.collapsed.begin(), result.collapsed.end(), c) != result.collapsed.end();
    if (!held) {
      next.weights[c] = mass[c] / pd;
      next.variances[c] = std::max(second[c] / mass[c], kVarianceFloor);
    }
    weight_total += next.weights[c];
  }
  for (auto& w : next.weights) w /= weight_total;
  if (options.estimate_exposure) next.exposure_variance = std::max(second[k] / pd, kVarianceFloor);
  return result;
}

MixtureParams m_step(const ImportanceSample& sample, const SummaryDataset& data, const MStepOptions& options) {
  return canonicalized(m_step_aligned(sample, data, options).params);
}

double eta_hat_squared(std::span<const double> norm_weights, std::span<const double> lambdas,
                       std::size_t draws_per_snp) {
  if (norm_weights.size() != lambdas.size() || draws_per_snp == 0 || norm_weights.size() % draws_per_snp != 0)
    throw ConfigError("eta_hat_squared: inconsistent sample layout");
  const std::size_t m = draws_per_snp;
  const std::size_t p = norm_weights.size() / m;
  double total = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    double dq = 0.0;
    for (std::size_t j = 0; j < m; ++j) dq += norm_weights[i * m + j] * lambdas[i * m + j];
    double v = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double wd = norm_weights[i * m + j] * (lambdas[i * m + j] - dq);
      v += wd * wd;
    }
    total += v;
  }
  return static_cast<double>(m) * total;
}

DeltaQResult delta_q_test(const ImportanceSample& sample, const MixtureParams& params_new,
                          const MixtureParams& params_old, const SummaryDataset& data, double alpha,
                          EtaScaling scaling) {
  require_matching(sample, data);
  if (params_new.num_clusters() != sample.num_clusters() || params_old.num_clusters() != sample.num_clusters())
    throw ConfigError("parameter dimension does not match the sample");
  const detail::MixtureCache cache_new(params_new);
  const detail::MixtureCache cache_old(params_old);
  const std::size_t p = sample.num_snps;
  const std::size_t m = sample.draws_per_snp;
  const std::size_t k = sample.num_clusters();

  std::vector<double> dq(p), var(p);
  parallel_for(p, [&](std::size_t i) {
    std::vector<double> lambda(m);
    double acc = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const auto at = i * m + j;
      const double* r = sample.responsibilities.data() + at * k;
      lambda[j] = param_loglik(cache_new, sample.theta_x[at], sample.beta[at], r) -
                  param_loglik(cache_old, sample.theta_x[at], sample.beta[at], r);
      acc += sample.norm_weights[at] * lambda[j];
    }
    double v = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
      const double wd = sample.norm_weights[i * m + j] * (lambda[j] - acc);
      v += wd * wd;
    }
    dq[i] = acc;
    var[i] = v;
  });

  DeltaQResult out;
  out.delta_q = std::accumulate(dq.begin(), dq.end(), 0.0);
  const double eta2 = static_cast<double>(m) * std::accumulate(var.begin(), var.end(), 0.0);
  out.eta_hat = eta2 > 0.0 ? std::sqrt(eta2) : 0.0;
  out.eta_degenerate = !(eta2 > 0.0);
  out.lower_bound = out.delta_q - stats::upper_z(alpha) * scaled_se(out.eta_hat, m, scaling);
  out.accepted = !out.eta_degenerate && out.lower_bound > 0.0;
  return out;
}

bool check_convergence(double delta_q, double eta_hat, std::size_t m, double gamma, double epsilon,
                       EtaScaling scaling) {
  if (m == 0) throw ConfigError("check_convergence: m must be positive");
  return delta_q + stats::upper_z(gamma) * scaled_se(eta_hat, m, scaling) < epsilon;
}

MixtureParams initial_params(const SummaryDataset& data, std::size_t k, std::uint64_t seed,
                             std::uint64_t chain) {
  if (k == 0) throw ConfigError("number of clusters must be positive");
  if (data.empty()) throw DataError("empty dataset");
  auto engine = rng::make_engine(seed, {rng::kInit, chain});

  std::vector<double> strong, all;
  for (const auto& r : data) {
    if (r.theta_x_hat == 0.0) continue;
    const double ratio = r.theta_y_hat / r.theta_x_hat;
    all.push_back(ratio);
    if (std::abs(r.theta_x_hat) / r.sigma_x > 2.0) strong.push_back(ratio);
  }
  const auto& ratios = strong.size() >= std::max<std::size_t>(k, 2) ? strong : all;

  MixtureParams p;
  p.weights.assign(k, 1.0 / static_cast<double>(k));
  p.means.resize(k);
  p.variances.resize(k);
  double spread = 0.1;
  if (!ratios.empty()) {
    const double iqr = stats::quantile(ratios, 0.75) - stats::quantile(ratios, 0.25);
    spread = iqr > 0.0 ? iqr : std::max(stats::stddev(ratios), 0.1);
    // Chain 0 starts at evenly spaced quantiles; later chains jitter within
    // the same strata so that no two starting means share a stratum.
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    for (std::size_t c = 0; c < k; ++c) {
      const double u = chain == 0 ? 0.5 : uniform(engine);
      p.means[c] = stats::quantile(ratios, (static_cast<double>(c) + u) / static_cast<double>(k));
    }
  } else {
    for (std::size_t c = 0; c < k; ++c) p.means[c] = static_cast<double>(c);
  }
  for (std::size_t c = 1; c < k; ++c)
    if (p.means[c] <= p.means[c - 1]) p.means[c] = p.means[c - 1] + 1e-3 * spread;
  const double v = std::max(spread * spread / static_cast<double>(4 * k * k), 1e-8);
  p.variances.assign(k, v);

  std::vector<double> tx;
  double mean_se2 = 0.0;
  for (const auto& r : data) {
    tx.push_back(r.theta_x_hat);
    mean_se2 += r.sigma_x * r.sigma_x;
  }
  mean_se2 /= static_cast<double>(data.size());
  p.exposure_mean = stats::mean(tx);
  const double var_tx = tx.size() > 1 ? std::pow(stats::stddev(tx), 2) : 0.0;
  double lam = var_tx - mean_se2;
  if (lam < 0.1 * var_tx) lam = 0.1 * var_tx;
  if (!(lam > 0.0)) lam = std::max(mean_se2, kVarianceFloor);
  p.exposure_variance = lam;
  return p;
}

namespace {

struct ChainOutcome {
  MixtureParams params;
  bool converged = false;
  double q_final = -std::numeric_limits<double>::infinity();
  std::size_t final_m = 0;
  std::vector<TraceEntry> trace;
  std::vector<std::string> diagnostics;
};

ChainOutcome run_chain(const SummaryDataset& data, const MixtureParams& start, const McemConfig& config,
                       std::uint64_t chain) {
  ChainOutcome out;
  MixtureParams phi = canonicalized(start);
  phi.validate();
  const double eps = config.epsilon_for(data.size());
  const MStepOptions mopts{config.estimate_exposure};
  std::size_t m = config.m0;
  std::uint64_t step = 0;
  std::size_t rejected = 0;
  std::size_t collapsed_events = 0;
  std::size_t low_ess_events = 0;
  bool capped = false;

  while (out.trace.size() < config.max_iters) {
    const auto sample = e_step(data, phi, m, {config.seed, chain, step++, rng::kEStep}, config.min_ess);
    if (!sample.diagnostics.empty()) ++low_ess_events;
    const auto next = m_step_aligned(sample, data, mopts);
    if (!next.collapsed.empty()) ++collapsed_events;
    const auto test = delta_q_test(sample, next.params, phi, data, config.alpha, config.eta_scaling);
    const bool stop = check_convergence(test.delta_q, test.eta_hat, m, config.gamma, eps, config.eta_scaling);

    if (test.accepted || stop) {
      TraceEntry e;
      e.iteration = out.trace.size() + 1;
      e.q_tilde = q_estimate(sample, next.params, data);
      phi = canonicalized(next.params);
      e.params = phi;
      e.delta_q = test.delta_q;
      e.eta_hat = test.eta_hat;
      e.mc_size = m;
      e.rejected_attempts = rejected;
      e.accepted = test.accepted;
      e.stopping = stop;
      out.trace.push_back(std::move(e));
      rejected = 0;
      if (stop) {
        out.converged = true;
        break;
      }
    } else {
      ++rejected;
      const auto grown = static_cast<std::size_t>(std::ceil(config.growth * static_cast<double>(m)));
      if (grown > config.max_mc_size) {
        capped = true;
        break;
      }
      m = grown;
    }
  }

  std::ostringstream tag;
  tag << "chain " << chain << ": ";
  if (capped) out.diagnostics.push_back(tag.str() + "Monte-Carlo sample size cap reached before convergence");
  else if (!out.converged) out.diagnostics.push_back(tag.str() + "iteration limit reached before convergence");
  if (collapsed_events > 0) {
    std::ostringstream msg;
    msg << tag.str() << "collapsed cluster held at previous values in " << collapsed_events << " M-step(s)";
    out.diagnostics.push_back(msg.str());
  }
  if (low_ess_events > 0) {
    std::ostringstream msg;
    msg << tag.str() << "low effective sample size reported in " << low_ess_events << " E-step(s)";
    out.diagnostics.push_back(msg.str());
  }

  const auto final_sample = e_step(data, phi, m, {config.seed, chain, 0, rng::kFinal}, config.min_ess);
  out.q_final = q_estimate(final_sample, phi, data);
  out.params = phi;
  out.final_m = m;
  return out;
}

FitResult assemble(std::vector<ChainOutcome> chains, const SummaryDataset& data, std::size_t k) {
  std::size_t best = 0;
  bool best_conv = chains[0].converged;
  for (std::size_t c = 1; c < chains.size(); ++c) {
    const bool conv = chains[c].converged;
    if ((conv && !best_conv) || (conv == best_conv && chains[c].q_final > chains[best].q_final)) {
      best = c;
      best_conv = conv;
    }
  }
  FitResult r;
  r.k = k;
  r.num_snps = data.size();
  r.best_chain = best;
  for (const auto& c : chains) {
    r.chains.push_back({c.q_final, c.converged, c.trace.size(), c.final_m});
    r.diagnostics.insert(r.diagnostics.end(), c.diagnostics.begin(), c.diagnostics.end());
  }
  auto& winner = chains[best];
  r.params = winner.params;
  r.converged = winner.converged;
  r.q_final = winner.q_final;
  r.final_mc_size = winner.final_m;
  r.trace = std::move(winner.trace);
  if (!r.converged) r.diagnostics.push_back("no chain converged; returning the best non-converged chain");
  return r;
}

}  // namespace

FitResult fit(const SummaryDataset& data, std::size_t k, const McemConfig& config) {
  config.validate();
  if (k == 0) throw ConfigError("number of clusters must be positive");
  if (data.empty()) throw DataError("empty dataset");
  const auto sorted = data.sorted_by_id();
  std::vector<ChainOutcome> chains;
  chains.reserve(config.n_restarts);
  for (std::size_t c = 0; c < config.n_restarts; ++c)
    chains.push_back(run_chain(sorted, initial_params(sorted, k, config.seed, c), config, c));
  return assemble(std::move(chains), sorted, k);
}

FitResult fit_from(const SummaryDataset& data, const MixtureParams& start, const McemConfig& config) {
  config.validate();
  if (data.empty()) throw DataError("empty dataset");
  const auto sorted = data.sorted_by_id();
  std::vector<ChainOutcome> chains;
  chains.push_back(run_chain(sorted, start, config, 0));
  return assemble(std::move(chains), sorted, start.num_clusters());
}

}  // namespace mrpath

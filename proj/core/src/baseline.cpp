#include "mrpath/baseline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "mrpath/rng.hpp"
#include "mrpath/stats.hpp"

namespace mrpath {

namespace {

struct State {
  std::vector<double> log_w;  // substantive clusters, then the null when enabled
  std::vector<double> means;
};

// One E-step plus M-step; returns the log-likelihood at the incoming state.
double em_step(const RatioData& d, State& s, bool with_null, std::vector<double>& resp) {
  const std::size_t k = s.means.size();
  const std::size_t c_all = k + (with_null ? 1 : 0);
  const std::size_t n = d.size();
  resp.resize(n * c_all);
  double ll = 0.0;
  std::vector<double> lp(c_all);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = d.se[i] * d.se[i];
    for (std::size_t c = 0; c < c_all; ++c) {
      const double mu = c < k ? s.means[c] : 0.0;
      lp[c] = s.log_w[c] + log_normal_pdf(d.ratio[i], mu, v);
    }
    const double norm = log_sum_exp(lp);
    ll += norm;
    for (std::size_t c = 0; c < c_all; ++c) resp[i * c_all + c] = std::exp(lp[c] - norm);
  }
  for (std::size_t c = 0; c < c_all; ++c) {
    double mass = 0.0, prec = 0.0, num = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = resp[i * c_all + c];
      const double inv_v = 1.0 / (d.se[i] * d.se[i]);
      mass += r;
      prec += r * inv_v;
      num += r * inv_v * d.ratio[i];
    }
    s.log_w[c] = std::log(std::max(mass / static_cast<double>(n), std::numeric_limits<double>::min()));
    if (c < k && prec > 0.0) s.means[c] = num / prec;
  }
  return ll;
}

double loglik(const RatioData& d, const State& s, bool with_null) {
  std::vector<double> resp;
  State copy = s;
  return em_step(d, copy, with_null, resp);
}

}  // namespace

RatioData make_ratio_data(const SummaryDataset& data) {
  RatioData out;
  for (const auto& r : data) {
    if (std::abs(r.theta_x_hat) < kRatioExposureFloor) {
      out.excluded.push_back(r.snp_id);
      continue;
    }
    out.snp_ids.push_back(r.snp_id);
    out.ratio.push_back(r.theta_y_hat / r.theta_x_hat);
    out.se.push_back(r.sigma_y / std::abs(r.theta_x_hat));
  }
  return out;
}

RatioMixtureFit fit_ratio_mixture(const RatioData& data, std::size_t k, const RatioMixtureConfig& config) {
  if (k == 0) throw ConfigError("ratio mixture needs K >= 1");
  if (data.size() == 0) throw DataError("no SNPs left after excluding near-zero exposure estimates");
  const bool with_null = config.include_null;
  const std::size_t c_all = k + (with_null ? 1 : 0);
  const std::size_t n = data.size();

  auto engine = rng::make_engine(config.seed, {rng::kBaseline, k, with_null ? 1u : 0u});
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  RatioMixtureFit best;
  best.loglik = -std::numeric_limits<double>::infinity();
  std::vector<double> resp;
  const std::size_t starts = std::max<std::size_t>(config.n_starts, 1);
  for (std::size_t start = 0; start < starts; ++start) {
    State s;
    s.log_w.assign(c_all, -std::log(static_cast<double>(c_all)));
    for (std::size_t c = 0; c < k; ++c) {
      const double q = start == 0 ? (static_cast<double>(c) + 0.5) / static_cast<double>(k) : unif(engine);
      s.means.push_back(stats::quantile(data.ratio, q));
    }
    std::vector<double> trace;
    bool converged = false;
    std::size_t it = 0;
    for (; it < config.max_iters; ++it) {
      trace.push_back(em_step(data, s, with_null, resp));
      if (trace.size() >= 2) {
        const double prev = trace[trace.size() - 2];
        if (std::abs(trace.back() - prev) <= config.tolerance * std::max(1.0, std::abs(prev))) {
          converged = true;
          break;
        }
      }
    }
    const double ll = loglik(data, s, with_null);
    trace.push_back(ll);
    if (ll > best.loglik) {
      best.loglik = ll;
      best.loglik_trace = std::move(trace);
      best.iterations = it;
      best.converged = converged;
      std::vector<std::size_t> order(k);
      for (std::size_t c = 0; c < k; ++c) order[c] = c;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return s.means[a] < s.means[b]; });
      best.means.clear();
      best.weights.clear();
      for (std::size_t c : order) {
        best.means.push_back(s.means[c]);
        best.weights.push_back(std::exp(s.log_w[c]));
      }
      best.null_weight = with_null ? std::exp(s.log_w[k]) : 0.0;
    }
  }
  best.k = k;
  best.include_null = with_null;
  best.num_used = n;
  const double dim = 2.0 * static_cast<double>(k) - 1.0 + (with_null ? 1.0 : 0.0);
  best.bic = -2.0 * best.loglik + dim * std::log(static_cast<double>(n));
  return best;
}

RatioMixtureFit fit_ratio_mixture(const SummaryDataset& data, std::size_t k, const RatioMixtureConfig& config) {
  return fit_ratio_mixture(make_ratio_data(data), k, config);
}

RatioSelection select_ratio_k(const SummaryDataset& data, std::size_t k_max, const RatioMixtureConfig& config) {
  if (k_max == 0) throw ConfigError("k_max must be >= 1");
  const auto ratios = make_ratio_data(data);
  RatioSelection out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k = 1; k <= k_max; ++k) {
    out.fits.push_back(fit_ratio_mixture(ratios, k, config));
    if (out.fits.back().bic < best) {
      best = out.fits.back().bic;
      out.chosen_k = k;
    }
  }
  return out;
}

}  // namespace mrpath

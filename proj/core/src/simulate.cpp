#include "mrpath/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "mrpath/parallel.hpp"
#include "mrpath/rng.hpp"

namespace mrpath {

namespace {

std::string snp_label(std::size_t i, std::size_t p) {
  const std::size_t width = std::to_string(p).size();
  std::string digits = std::to_string(i + 1);
  return "snp" + std::string(width - digits.size(), '0') + digits;
}

double inverse_gamma(rng::Engine& engine, double shape, double scale) {
  std::gamma_distribution<double> g(shape, 1.0);
  return scale / g(engine);
}

std::size_t categorical(rng::Engine& engine, const std::vector<double>& probs) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double x = u(engine);
  double acc = 0.0;
  for (std::size_t c = 0; c + 1 < probs.size(); ++c) {
    acc += probs[c];
    if (x < acc) return c;
  }
  return probs.size() - 1;
}

MixtureParams mixture(std::vector<double> w, std::vector<double> mu, std::vector<double> sd, double strength,
                      std::size_t p) {
  MixtureParams m;
  m.weights = std::move(w);
  m.means = std::move(mu);
  for (double s : sd) m.variances.push_back(s * s);
  m.exposure_mean = 0.0;
  m.exposure_variance = exposure_variance_for_strength(strength, p);
  return m;
}

}  // namespace

void SimConfig::validate() const {
  if (p == 0) throw ConfigError("simulation needs p >= 1");
  if (!(meas_shape > 2.0)) throw ConfigError("inverse-gamma shape must exceed 2");
  if (!(meas_scale > 0.0)) throw ConfigError("inverse-gamma scale must be positive");
  params_true.validate();
  if (theta_x_mixture) {
    const auto& mx = *theta_x_mixture;
    if (mx.weights.empty() || mx.weights.size() != mx.spreads.size())
      throw ConfigError("exposure mixture weights and spreads must match");
  }
  if (!(idiosyncratic_fraction >= 0.0 && idiosyncratic_fraction <= 1.0))
    throw ConfigError("idiosyncratic fraction must lie in [0, 1]");
}

double exposure_variance_for_strength(double sqrt_p_lambda, std::size_t p) {
  return sqrt_p_lambda * sqrt_p_lambda / static_cast<double>(p);
}

SimOutput simulate_dataset(const SimConfig& config) {
  config.validate();
  const std::size_t p = config.p;
  const auto& truth_params = config.params_true;

  struct Draw {
    SnpRecord rec;
    LatentState latent;
    double noise_y = 0.0;  // standard normal used for theta_hat_Y once alpha is known
  };
  std::vector<Draw> draws(p);

  parallel_for(p, [&](std::size_t i) {
    auto engine = rng::make_engine(config.seed, {rng::kSimulate, i});
    std::normal_distribution<double> normal(0.0, 1.0);
    Draw& d = draws[i];
    const double sx2 = inverse_gamma(engine, config.meas_shape, config.meas_scale);
    const double sy2 = inverse_gamma(engine, config.meas_shape, config.meas_scale);
    const std::size_t xi = categorical(engine, truth_params.weights);
    double beta = truth_params.means[xi];
    if (!config.point_mass_betas) beta += std::sqrt(truth_params.variances[xi]) * normal(engine);
    double theta = 0.0;
    if (config.theta_x_mixture) {
      const auto& mx = *config.theta_x_mixture;
      const std::size_t c = categorical(engine, mx.weights);
      const double sd = mx.spreads_are_sd ? mx.spreads[c] : std::sqrt(mx.spreads[c]);
      theta = sd * normal(engine);
    } else {
      theta = truth_params.exposure_mean + std::sqrt(truth_params.exposure_variance) * normal(engine);
    }
    d.rec.snp_id = snp_label(i, p);
    d.rec.sigma_x = std::sqrt(sx2);
    d.rec.sigma_y = std::sqrt(sy2);
    d.rec.theta_x_hat = theta + d.rec.sigma_x * normal(engine);
    d.noise_y = normal(engine);
    d.latent = {theta, beta, xi};
  });

  double tau0 = 0.0;
  for (const auto& d : draws) tau0 += d.rec.sigma_y;
  tau0 *= 2.0 / static_cast<double>(p);

  std::vector<double> alpha(p, 0.0);
  if (config.pleiotropy != Pleiotropy::kNone) {
    std::vector<bool> shifted(p, false);
    if (config.pleiotropy == Pleiotropy::kIdiosyncratic) {
      std::vector<std::size_t> idx(p);
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      auto engine = rng::make_engine(config.seed, {rng::kSimulate, 0xfeedULL});
      std::shuffle(idx.begin(), idx.end(), engine);
      const auto n_shift = static_cast<std::size_t>(std::llround(config.idiosyncratic_fraction * static_cast<double>(p)));
      for (std::size_t j = 0; j < n_shift; ++j) shifted[idx[j]] = true;
    }
    for (std::size_t i = 0; i < p; ++i) {
      auto engine = rng::make_engine(config.seed, {rng::kSimulate, i, 1});
      std::normal_distribution<double> normal(0.0, 1.0);
      switch (config.pleiotropy) {
        case Pleiotropy::kNormal:
          alpha[i] = tau0 * normal(engine);
          break;
        case Pleiotropy::kLaplace: {
          std::exponential_distribution<double> expo(1.0);
          std::bernoulli_distribution sign(0.5);
          const double e = expo(engine);
          alpha[i] = tau0 * (sign(engine) ? e : -e);
          break;
        }
        case Pleiotropy::kIdiosyncratic:
          alpha[i] = (shifted[i] ? config.idiosyncratic_shift * tau0 : 0.0) + tau0 * normal(engine);
          break;
        case Pleiotropy::kNone:
          break;
      }
    }
  }

  SimOutput out;
  std::vector<SnpRecord> records;
  records.reserve(p);
  out.truth.reserve(p);
  for (std::size_t i = 0; i < p; ++i) {
    auto& d = draws[i];
    d.rec.theta_y_hat = alpha[i] + d.latent.beta * d.latent.theta_x + d.rec.sigma_y * d.noise_y;
    records.push_back(d.rec);
    out.truth.push_back(d.latent);
  }
  out.dataset = SummaryDataset(std::move(records));
  out.pleiotropy = std::move(alpha);
  out.tau0 = tau0;
  out.params_true = truth_params;
  return out;
}

std::vector<std::string> preset_names() {
  return {"sim1-k1",          "sim1-k2",           "sim1-k3",
          "sim2",             "appendix-d",        "appendix-e-normal",
          "appendix-e-laplace", "appendix-e-idiosyncratic", "appendix-g-low",
          "appendix-g-high"};
}

SimConfig preset(std::string_view name, const PresetOptions& o) {
  SimConfig c;
  c.seed = o.seed;
  auto sd = [&](double def) { return o.sigma.value_or(def); };

  if (name == "sim1-k1" || name == "sim1-k2" || name == "sim1-k3") {
    c.p = o.p.value_or(100);
    const double s = o.strength.value_or(10.0);
    if (name == "sim1-k1") c.params_true = mixture({1.0}, {0.3}, {sd(0.1)}, s, c.p);
    else if (name == "sim1-k2") c.params_true = mixture({0.5, 0.5}, {-0.5, 0.5}, {sd(0.1), sd(0.1)}, s, c.p);
    else c.params_true = mixture({0.3, 0.4, 0.3}, {-0.5, 0.0, 0.5}, {sd(0.1), sd(0.1), sd(0.1)}, s, c.p);
  } else if (name == "sim2") {
    c.p = o.p.value_or(250);
    const double s = o.strength.value_or(5.0);
    switch (o.k_true) {
      case 1: c.params_true = mixture({1.0}, {0.5}, {sd(0.1)}, s, c.p); break;
      case 2: c.params_true = mixture({0.5, 0.5}, {-0.5, 0.5}, {sd(0.1), sd(0.1)}, s, c.p); break;
      case 3: {
        const double third = 1.0 / 3.0;
        c.params_true = mixture({third, third, 1.0 - 2.0 * third}, {-0.5, 0.0, 0.5}, {sd(0.05), sd(0.05), sd(0.05)}, s, c.p);
        break;
      }
      default: throw ConfigError("sim2 preset supports k_true in {1, 2, 3}");
    }
  } else if (name == "appendix-d") {
    c.p = o.p.value_or(100);
    c.params_true = mixture({0.6, 0.4}, {-0.5, 0.5}, {sd(0.1), sd(0.1)}, 1.0, c.p);
    // Records the mixture's overall variance as the nominal exposure variance.
    c.params_true.exposure_variance = 0.7 * 0.1 + 0.3 * 1e-6;
    c.theta_x_mixture = ExposureMixture{};
  } else if (name.starts_with("appendix-e-")) {
    c.p = o.p.value_or(100);
    const double s = o.strength.value_or(10.0);
    c.params_true = mixture({0.5, 0.5}, {-0.5, 0.5}, {1e-6, 1e-6}, s, c.p);
    c.point_mass_betas = true;
    if (name == "appendix-e-normal") c.pleiotropy = Pleiotropy::kNormal;
    else if (name == "appendix-e-laplace") c.pleiotropy = Pleiotropy::kLaplace;
    else if (name == "appendix-e-idiosyncratic") c.pleiotropy = Pleiotropy::kIdiosyncratic;
    else throw ConfigError("unknown preset '" + std::string(name) + "'");
  } else if (name == "appendix-g-low" || name == "appendix-g-high") {
    c.p = o.p.value_or(100);
    const double s = o.strength.value_or(10.0);
    const double sigma = sd(name == "appendix-g-low" ? 0.1 : 0.3);
    c.params_true = mixture({0.5, 0.5}, {-0.5, 0.5}, {sigma, sigma}, s, c.p);
  } else {
    throw ConfigError("unknown preset '" + std::string(name) + "'");
  }
  return c;
}

}  // namespace mrpath

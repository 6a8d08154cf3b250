#pragma once

// Synthetic summary data with retained ground truth.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mrpath/model.hpp"

namespace mrpath {

enum class Pleiotropy { kNone, kNormal, kLaplace, kIdiosyncratic };

/// Two-component (or more) zero-mean normal mixture for theta_X, used by the
/// weak-instrument scenario. `spreads` are variances unless spreads_are_sd.
struct ExposureMixture {
  std::vector<double> weights{0.7, 0.3};
  std::vector<double> spreads{0.1, 1e-6};
  bool spreads_are_sd = false;
};

struct SimConfig {
  std::size_t p = 100;
  MixtureParams params_true;      ///< theta_X ~ N(exposure_mean, exposure_variance) unless a mixture is given
  double meas_shape = 9.0;        ///< sigma_X^2, sigma_Y^2 ~ InvGamma(shape, scale)
  double meas_scale = 0.0002;
  Pleiotropy pleiotropy = Pleiotropy::kNone;
  double idiosyncratic_fraction = 0.1;
  double idiosyncratic_shift = 5.0;  ///< shifted SNPs have alpha ~ N(shift * tau0, tau0^2)
  std::optional<ExposureMixture> theta_x_mixture;
  bool point_mass_betas = false;  ///< beta_i = mu_{xi_i} exactly
  std::uint64_t seed = 1;

  void validate() const;
};

struct SimOutput {
  SummaryDataset dataset;
  std::vector<LatentState> truth;
  std::vector<double> pleiotropy;  ///< alpha_i (all zero when disabled)
  double tau0 = 0.0;               ///< (2/p) sum_i sigma_Yi
  MixtureParams params_true;
};

SimOutput simulate_dataset(const SimConfig& config);

/// lambda_x^2 for a given instrument strength sqrt(p) * lambda_x.
double exposure_variance_for_strength(double sqrt_p_lambda, std::size_t p);

struct PresetOptions {
  std::optional<std::size_t> p;
  std::uint64_t seed = 1;
  std::optional<double> strength;  ///< sqrt(p) * lambda_x
  std::size_t k_true = 2;          ///< model-selection preset only
  std::optional<double> sigma;     ///< overrides every cluster SD
};

/// Named scenarios: sim1-k1, sim1-k2, sim1-k3, sim2, appendix-d,
/// appendix-e-normal, appendix-e-laplace, appendix-e-idiosyncratic,
/// appendix-g-low, appendix-g-high.
SimConfig preset(std::string_view name, const PresetOptions& options = {});
std::vector<std::string> preset_names();

}  // namespace mrpath

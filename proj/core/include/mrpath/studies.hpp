#pragma once

// Replication harnesses: simulate, fit, summarize. Shared by the `bench`
// subcommand and the acceptance suite.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mrpath/mcem.hpp"
#include "mrpath/simulate.hpp"

namespace mrpath::studies {

/// Called after each replication with (done, total).
using Progress = std::function<void(std::size_t, std::size_t)>;

struct RecoveryConfig {
  std::string preset = "sim1-k2";
  std::size_t k = 2;                ///< clusters in the fitted model
  PresetOptions preset_options;     ///< seed is overwritten per replication
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  McemConfig mcem;
  bool intervals = false;
  double level = 0.95;
  double info_multiplier = 10.0;
};

struct ParameterSummary {
  std::string name;  ///< pi_k, mu_k, sigma2_k, exposure_mean, exposure_variance
  double truth = 0.0;
  std::vector<double> estimates;  ///< one per replication whose fit converged
  std::size_t covered = 0;
  std::size_t with_interval = 0;

  double mean() const;
  double sd() const;
  double coverage() const { return with_interval ? static_cast<double>(covered) / static_cast<double>(with_interval) : 0.0; }
};

struct RecoveryResult {
  std::size_t reps = 0;
  std::size_t converged = 0;
  std::size_t missing_intervals = 0;
  std::vector<ParameterSummary> parameters;

  const ParameterSummary* find(const std::string& name) const;
};

/// Estimates are matched to the truth by canonical (ascending-mean) order.
RecoveryResult run_recovery(const RecoveryConfig& config, const Progress& progress = {});

struct SelectionStudyConfig {
  std::string preset = "sim2";
  PresetOptions preset_options;
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  McemConfig mcem;
  std::vector<std::size_t> candidates{1, 2, 3};
  bool baseline = false;           ///< also run the ratio-mixture BIC
  std::size_t baseline_k_max = 7;
};

struct SelectionStudyResult {
  std::vector<std::size_t> chosen;           ///< per replication; 0 when nothing converged
  std::vector<std::size_t> baseline_chosen;  ///< empty unless requested
  std::vector<double> mu1_when_k1;           ///< mu_1 of the K=1 fit where K=1 was chosen

  double rate(std::size_t k) const;
  double baseline_rate_above(std::size_t k) const;
};

SelectionStudyResult run_selection(const SelectionStudyConfig& config, const Progress& progress = {});

/// Seeds for replication r: (simulation, fitting).
std::uint64_t replication_seed(std::uint64_t seed, std::size_t rep, std::uint64_t role);

}  // namespace mrpath::studies

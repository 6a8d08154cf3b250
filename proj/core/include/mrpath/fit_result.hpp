#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "mrpath/model.hpp"

namespace mrpath {

/// One accepted MC-EM iteration (or the final, stopping attempt).
struct TraceEntry {
  std::size_t iteration = 0;
  MixtureParams params;        ///< canonical-order parameters after this iteration
  double q_tilde = 0.0;        ///< Q~(phi_t, phi_{t-1}) on this iteration's sample
  double delta_q = 0.0;
  double eta_hat = 0.0;
  std::size_t mc_size = 0;     ///< draws per SNP used by the accepted attempt
  std::size_t rejected_attempts = 0;
  bool accepted = true;        ///< false only for a stopping attempt that failed the ascent test
  bool stopping = false;
};

struct CiEntry {
  std::string name;   ///< e.g. "pi_1", "mu_2", "sigma2_1", "exposure_mean"
  double estimate = 0.0;
  double se = 0.0;    ///< natural-scale SE (delta method for weights and variances)
  double lower = 0.0;
  double upper = 0.0;
  std::string scale;  ///< "identity", "logit", or "log" (the scale the Wald interval was built on)
};

struct CiResult {
  double level = 0.95;
  std::vector<CiEntry> entries;

  const CiEntry* find(const std::string& name) const {
    for (const auto& e : entries)
      if (e.name == name) return &e;
    return nullptr;
  }
};

struct ChainSummary {
  double q_final = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
  std::size_t final_mc_size = 0;
};

struct FitResult {
  std::size_t k = 0;
  std::size_t num_snps = 0;
  MixtureParams params;
  bool converged = false;
  double q_final = 0.0;  ///< Q~(phi_hat, phi_hat) from a fresh E-step at phi_hat
  std::size_t final_mc_size = 0;
  std::size_t best_chain = 0;
  std::vector<TraceEntry> trace;
  std::vector<ChainSummary> chains;
  std::vector<std::string> diagnostics;

  std::optional<CiResult> intervals;
  std::optional<double> bic;
};

}  // namespace mrpath

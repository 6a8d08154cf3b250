#pragma once

// Choosing K by a modified BIC built from the importance-sampling
// estimate of Q at the fitted parameters.

#include <cstddef>
#include <string>
#include <vector>

#include "mrpath/fit_result.hpp"
#include "mrpath/mcem.hpp"

namespace mrpath {

/// -2 q + (3K + 2p) log p
double modified_bic(double q_tilde_final, std::size_t k, std::size_t p);

struct SelectionResult {
  std::vector<FitResult> fits;  ///< one per candidate, in candidate order; fit.bic is set
  std::size_t chosen_k = 0;     ///< 0 when no candidate converged
  std::vector<std::string> notes;

  const FitResult* fit_for(std::size_t k) const {
    for (const auto& f : fits)
      if (f.k == k) return &f;
    return nullptr;
  }
};

/// Fits every candidate with the full restart protocol and picks the smallest
/// BIC among converged fits; ties go to the smaller K.
SelectionResult select_k(const SummaryDataset& data, const std::vector<std::size_t>& k_candidates,
                         const McemConfig& config);

}  // namespace mrpath

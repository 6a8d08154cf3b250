#include "mrpath/model_select.hpp"

#include <cmath>
#include <limits>

namespace mrpath {

double modified_bic(double q_tilde_final, std::size_t k, std::size_t p) {
  if (k == 0 || p == 0) throw ConfigError("modified BIC needs K >= 1 and p >= 1");
  const double dim = 3.0 * static_cast<double>(k) + 2.0 * static_cast<double>(p);
  return -2.0 * q_tilde_final + dim * std::log(static_cast<double>(p));
}

SelectionResult select_k(const SummaryDataset& data, const std::vector<std::size_t>& k_candidates,
                         const McemConfig& config) {
  if (k_candidates.empty()) throw ConfigError("select_k needs at least one candidate K");
  for (std::size_t k : k_candidates)
    if (k == 0) throw ConfigError("candidate K must be >= 1");

  // Candidates run one after another; each fit already spreads its E-steps
  // over the worker pool, so nesting another level would only oversubscribe.
  SelectionResult out;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t k : k_candidates) {
    FitResult f = fit(data, k, config);
    f.bic = modified_bic(f.q_final, k, data.size());
    if (!f.converged) {
      out.notes.push_back("K=" + std::to_string(k) + " did not converge and is excluded");
    } else if (*f.bic < best || (*f.bic == best && k < out.chosen_k)) {
      best = *f.bic;
      out.chosen_k = k;
    }
    out.fits.push_back(std::move(f));
  }
  if (out.chosen_k == 0) out.notes.push_back("no candidate converged");
  return out;
}

}  // namespace mrpath

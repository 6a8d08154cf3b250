#include "mrpath/studies.hpp"

#include <algorithm>

#include "mrpath/baseline.hpp"
#include "mrpath/inference.hpp"
#include "mrpath/model_select.hpp"
#include "mrpath/rng.hpp"
#include "mrpath/stats.hpp"

namespace mrpath::studies {

namespace {

std::vector<std::pair<std::string, double>> named_values(const MixtureParams& p) {
  std::vector<std::pair<std::string, double>> out;
  const std::size_t k = p.num_clusters();
  if (k > 1)
    for (std::size_t c = 0; c < k; ++c) out.emplace_back("pi_" + std::to_string(c + 1), p.weights[c]);
  for (std::size_t c = 0; c < k; ++c) out.emplace_back("mu_" + std::to_string(c + 1), p.means[c]);
  for (std::size_t c = 0; c < k; ++c) out.emplace_back("sigma2_" + std::to_string(c + 1), p.variances[c]);
  out.emplace_back("exposure_mean", p.exposure_mean);
  out.emplace_back("exposure_variance", p.exposure_variance);
  return out;
}

}  // namespace

double ParameterSummary::mean() const { return stats::mean(estimates); }
double ParameterSummary::sd() const { return stats::stddev(estimates); }

const ParameterSummary* RecoveryResult::find(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return &p;
  return nullptr;
}

std::uint64_t replication_seed(std::uint64_t seed, std::size_t rep, std::uint64_t role) {
  return rng::derive(seed, {rng::kStudy, rep, role});
}

RecoveryResult run_recovery(const RecoveryConfig& config, const Progress& progress) {
  RecoveryResult out;
  out.reps = config.reps;
  for (std::size_t r = 0; r < config.reps; ++r) {
    PresetOptions po = config.preset_options;
    po.seed = replication_seed(config.seed, r, 0);
    const auto sim = simulate_dataset(preset(config.preset, po));
    if (out.parameters.empty()) {
      // Truth is only comparable when the fitted K matches the generator.
      MixtureParams truth = canonicalized(sim.params_true);
      if (truth.num_clusters() != config.k) throw ConfigError("recovery study needs K equal to the generating K");
      for (const auto& [name, value] : named_values(truth)) out.parameters.push_back({name, value, {}, 0, 0});
    }
    McemConfig mc = config.mcem;
    mc.seed = replication_seed(config.seed, r, 1);
    FitResult f = fit(sim.dataset, config.k, mc);
    if (f.converged) {
      ++out.converged;
      if (config.intervals) attach_intervals(f, sim.dataset, replication_seed(config.seed, r, 2), config.level,
                                             config.info_multiplier);
      const auto values = named_values(f.params);
      for (std::size_t j = 0; j < values.size(); ++j) {
        auto& ps = out.parameters[j];
        ps.estimates.push_back(values[j].second);
        if (!config.intervals) continue;
        if (!f.intervals) continue;
        const CiEntry* e = f.intervals->find(ps.name);
        if (e == nullptr) continue;
        ++ps.with_interval;
        if (e->lower <= ps.truth && ps.truth <= e->upper) ++ps.covered;
      }
      if (config.intervals && !f.intervals) ++out.missing_intervals;
    }
    if (progress) progress(r + 1, config.reps);
  }
  return out;
}

double SelectionStudyResult::rate(std::size_t k) const {
  if (chosen.empty()) return 0.0;
  return static_cast<double>(std::count(chosen.begin(), chosen.end(), k)) / static_cast<double>(chosen.size());
}

double SelectionStudyResult::baseline_rate_above(std::size_t k) const {
  if (baseline_chosen.empty()) return 0.0;
  const auto n = std::count_if(baseline_chosen.begin(), baseline_chosen.end(), [&](std::size_t c) { return c > k; });
  return static_cast<double>(n) / static_cast<double>(baseline_chosen.size());
}

SelectionStudyResult run_selection(const SelectionStudyConfig& config, const Progress& progress) {
  SelectionStudyResult out;
  for (std::size_t r = 0; r < config.reps; ++r) {
    PresetOptions po = config.preset_options;
    po.seed = replication_seed(config.seed, r, 0);
    const auto sim = simulate_dataset(preset(config.preset, po));
    McemConfig mc = config.mcem;
    mc.seed = replication_seed(config.seed, r, 1);
    const auto sel = select_k(sim.dataset, config.candidates, mc);
    out.chosen.push_back(sel.chosen_k);
    if (sel.chosen_k == 1)
      if (const auto* f = sel.fit_for(1)) out.mu1_when_k1.push_back(f->params.means[0]);
    if (config.baseline) {
      RatioMixtureConfig rc;
      rc.seed = replication_seed(config.seed, r, 3);
      out.baseline_chosen.push_back(select_ratio_k(sim.dataset, config.baseline_k_max, rc).chosen_k);
    }
    if (progress) progress(r + 1, config.reps);
  }
  return out;
}

}  // namespace mrpath::studies

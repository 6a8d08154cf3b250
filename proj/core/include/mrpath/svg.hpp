#pragma once

// Static SVG reports. Geometry is written with data-* attributes so the
// rendered figures can be checked numerically.

#include <filesystem>
#include <span>
#include <string>

#include "mrpath/model.hpp"
#include "mrpath/posterior.hpp"

namespace mrpath::svg {

struct ScatterOptions {
  double width = 640.0;
  double height = 480.0;
  double margin = 60.0;
  std::string title = "SNP associations with exposure and outcome";
};

/// (theta_hat_X, theta_hat_Y) with 1-SE bars; one line through the origin per
/// cluster with slope mu_k and a band of slopes mu_k +- sigma_k. Points are
/// coloured by assigned cluster when posteriors are supplied.
std::string scatter(const SummaryDataset& data, const MixtureParams& params,
                    std::span<const PosteriorSummary> posteriors = {}, const ScatterOptions& options = {});

/// Stacked horizontal bars of membership probabilities, one per SNP, ordered
/// by the probability of the first cluster.
std::string membership_bars(std::span<const PosteriorSummary> posteriors, double width = 640.0);

void render_scatter_svg(const SummaryDataset& data, const MixtureParams& params,
                        std::span<const PosteriorSummary> posteriors, const std::filesystem::path& out_path);
void render_membership_svg(std::span<const PosteriorSummary> posteriors, const std::filesystem::path& out_path);

}  // namespace mrpath::svg

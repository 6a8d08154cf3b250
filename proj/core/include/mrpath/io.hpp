#pragma once

// File formats: summary-statistics TSV in, JSON/CSV results out.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mrpath/fit_result.hpp"
#include "mrpath/model.hpp"
#include "mrpath/model_select.hpp"
#include "mrpath/posterior.hpp"

namespace mrpath::io {

inline constexpr const char* kResultsSchema = "mrpath.results/1";
inline constexpr const char* kManifestSchema = "mrpath.manifest/1";

/// Columns: snp_id, beta_exposure, se_exposure, beta_outcome, se_outcome
/// (any order, extra columns ignored). Errors name the 1-based data row.
SummaryDataset read_summary_tsv(const std::filesystem::path& path);
SummaryDataset parse_summary_tsv(const std::string& text, const std::string& source = "<input>");
void write_summary_tsv(const SummaryDataset& data, const std::filesystem::path& path);
std::string format_summary_tsv(const SummaryDataset& data);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double x);

std::uint64_t fnv1a(std::string_view bytes) noexcept;
std::string hex64(std::uint64_t x);

struct RunManifest {
  std::string command;
  std::string input_path;
  std::string input_hash;
  std::vector<std::pair<std::string, std::string>> config;  ///< echoed in insertion order
  std::uint64_t seed = 0;
  std::string version;
  std::vector<std::pair<std::string, double>> timings_seconds;
  std::vector<std::string> diagnostics;

  /// Hash of everything except timings and diagnostics, so it is a pure
  /// function of the inputs.
  std::string hash() const;
};

struct ResultsBundle {
  const FitResult* fit = nullptr;              ///< reported fit (chosen K for select-k)
  const SelectionResult* selection = nullptr;  ///< optional BIC table
  std::span<const PosteriorSummary> posteriors;
  const RunManifest* manifest = nullptr;
};

std::string results_json(const ResultsBundle& bundle);
std::string posteriors_csv(std::span<const PosteriorSummary> posteriors, const std::string& manifest_hash);
std::string trace_csv(const FitResult& fit, const std::string& manifest_hash);
std::string manifest_json(const RunManifest& manifest);

/// Writes results.json, trace.csv, manifest.json and, when posteriors are
/// present, posteriors.csv. Returns the paths written.
std::vector<std::filesystem::path> write_results(const ResultsBundle& bundle, const std::filesystem::path& out_dir);

/// Parameters stored in a results.json.
MixtureParams read_params_json(const std::filesystem::path& path);
MixtureParams parse_params_json(const std::string& text);

std::vector<PosteriorSummary> read_posteriors_csv(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace mrpath::io

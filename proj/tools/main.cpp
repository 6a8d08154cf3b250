// mrpath: command-line front end.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 data or I/O
// error, 3 the fit did not converge (results are still written).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mrpath/baseline.hpp"
#include "mrpath/inference.hpp"
#include "mrpath/io.hpp"
#include "mrpath/mcem.hpp"
#include "mrpath/model_select.hpp"
#include "mrpath/parallel.hpp"
#include "mrpath/posterior.hpp"
#include "mrpath/simulate.hpp"
#include "mrpath/stats.hpp"
#include "mrpath/studies.hpp"
#include "mrpath/svg.hpp"

namespace fs = std::filesystem;
using namespace mrpath;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNoConvergence = 3;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct FitFlags {
  std::string input;
  std::string out = "mrpath_out";
  std::uint64_t seed = 1;
  std::size_t m0 = 500;
  double alpha = 0.10;
  double gamma = 0.05;
  std::optional<double> epsilon;
  std::size_t restarts = 10;
  std::size_t max_iters = 500;
  bool no_ci = false;
  double level = 0.95;
  double info_multiplier = 10.0;

  void add_to(CLI::App& app) {
    app.add_option("--input", input, "Summary statistics TSV")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out, "Output directory")->capture_default_str();
    app.add_option("--seed", seed, "Random seed")->capture_default_str();
    app.add_option("--m0", m0, "Initial Monte-Carlo sample size per SNP")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--alpha", alpha, "Level of the ascent test")->capture_default_str()->check(CLI::Range(1e-6, 0.5));
    app.add_option("--gamma", gamma, "Level of the stopping test")->capture_default_str()->check(CLI::Range(1e-6, 0.5));
    app.add_option("--epsilon", epsilon, "Absolute stopping threshold (default 0.005 * p)");
    app.add_option("--restarts", restarts, "Independent chains per K")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_option("--max-iters", max_iters, "Iteration cap per chain")->capture_default_str();
    app.add_flag("--no-ci", no_ci, "Skip the observed-information intervals");
    app.add_option("--level", level, "Confidence level")->capture_default_str()->check(CLI::Range(0.5, 0.9999));
    app.add_option("--info-multiplier", info_multiplier, "Information sample size as a multiple of the final m")
        ->capture_default_str();
  }

  McemConfig config() const {
    McemConfig c;
    c.m0 = m0;
    c.alpha = alpha;
    c.gamma = gamma;
    c.epsilon = epsilon;
    c.n_restarts = restarts;
    c.max_iters = max_iters;
    c.seed = seed;
    c.validate();
    return c;
  }

  void echo(io::RunManifest& m) const {
    m.config.emplace_back("m0", std::to_string(m0));
    m.config.emplace_back("alpha", io::format_double(alpha));
    m.config.emplace_back("gamma", io::format_double(gamma));
    m.config.emplace_back("epsilon", epsilon ? io::format_double(*epsilon) : "default");
    m.config.emplace_back("restarts", std::to_string(restarts));
    m.config.emplace_back("max_iters", std::to_string(max_iters));
    m.config.emplace_back("confidence_intervals", no_ci ? "off" : "on");
    m.config.emplace_back("level", io::format_double(level));
    m.config.emplace_back("info_multiplier", io::format_double(info_multiplier));
  }
};

io::RunManifest make_manifest(const std::string& command, const std::string& input, std::uint64_t seed) {
  io::RunManifest m;
  m.command = command;
  m.seed = seed;
  m.version = MRPATH_VERSION;
  if (!input.empty()) {
    m.input_path = input;
    m.input_hash = io::hex64(io::fnv1a(io::read_text_file(input)));
  }
  return m;
}

void report_written(const std::vector<fs::path>& paths) {
  for (const auto& p : paths) std::cerr << "wrote " << p.string() << "\n";
}

void add_intervals(FitResult& f, const SummaryDataset& data, const FitFlags& flags, io::RunManifest& manifest) {
  if (flags.no_ci || !f.converged) return;
  const auto t0 = Clock::now();
  attach_intervals(f, data, flags.seed, flags.level, flags.info_multiplier);
  manifest.timings_seconds.emplace_back("information", seconds_since(t0));
}

int run_fit(const FitFlags& flags, std::size_t k) {
  auto manifest = make_manifest("fit", flags.input, flags.seed);
  flags.echo(manifest);
  manifest.config.emplace_back("k", std::to_string(k));
  const auto data = io::read_summary_tsv(flags.input);
  const auto t0 = Clock::now();
  FitResult f = fit(data, k, flags.config());
  manifest.timings_seconds.emplace_back("fit", seconds_since(t0));
  f.bic = modified_bic(f.q_final, k, data.size());
  add_intervals(f, data, flags, manifest);
  manifest.diagnostics = f.diagnostics;
  io::ResultsBundle bundle;
  bundle.fit = &f;
  bundle.manifest = &manifest;
  report_written(io::write_results(bundle, flags.out));
  if (!f.converged) {
    std::cerr << "error: the MC-EM chains did not converge for K=" << k << "\n";
    return kExitNoConvergence;
  }
  std::cerr << "K=" << k << " converged; modified BIC " << *f.bic << "\n";
  return kExitOk;
}

int run_select(const FitFlags& flags, std::size_t k_min, std::size_t k_max) {
  if (k_min == 0 || k_max < k_min) throw ConfigError("need 1 <= --k-min <= --k-max");
  auto manifest = make_manifest("select-k", flags.input, flags.seed);
  flags.echo(manifest);
  manifest.config.emplace_back("k_min", std::to_string(k_min));
  manifest.config.emplace_back("k_max", std::to_string(k_max));
  const auto data = io::read_summary_tsv(flags.input);
  std::vector<std::size_t> candidates;
  for (std::size_t k = k_min; k <= k_max; ++k) candidates.push_back(k);
  const auto t0 = Clock::now();
  SelectionResult sel = select_k(data, candidates, flags.config());
  manifest.timings_seconds.emplace_back("select_k", seconds_since(t0));
  for (const auto& f : sel.fits)
    std::cerr << "K=" << f.k << (f.converged ? "" : " (not converged)") << "  modified BIC " << *f.bic << "\n";
  if (sel.chosen_k == 0) {
    io::ResultsBundle bundle;
    bundle.fit = &sel.fits.front();
    bundle.selection = &sel;
    bundle.manifest = &manifest;
    report_written(io::write_results(bundle, flags.out));
    std::cerr << "error: no candidate K converged\n";
    return kExitNoConvergence;
  }
  FitResult chosen = *sel.fit_for(sel.chosen_k);
  add_intervals(chosen, data, flags, manifest);
  manifest.diagnostics = chosen.diagnostics;
  for (const auto& n : sel.notes) manifest.diagnostics.push_back(n);
  io::ResultsBundle bundle;
  bundle.fit = &chosen;
  bundle.selection = &sel;
  bundle.manifest = &manifest;
  report_written(io::write_results(bundle, flags.out));
  std::cerr << "chosen K=" << sel.chosen_k << "\n";
  return kExitOk;
}

struct PosteriorFlags {
  std::string input;
  std::string params;
  std::string out = "mrpath_out";
  double level = 0.95;
  std::size_t m = 50000;
  std::size_t n_out = 5000;
  std::uint64_t seed = 1;
};

int run_posterior(const PosteriorFlags& flags) {
  auto manifest = make_manifest("posterior", flags.input, flags.seed);
  manifest.config.emplace_back("params_hash", io::hex64(io::fnv1a(io::read_text_file(flags.params))));
  manifest.config.emplace_back("level", io::format_double(flags.level));
  manifest.config.emplace_back("m", std::to_string(flags.m));
  manifest.config.emplace_back("n_out", std::to_string(flags.n_out));
  const auto data = io::read_summary_tsv(flags.input);
  const auto params = io::read_params_json(flags.params);
  const auto t0 = Clock::now();
  const auto post = summarize_posteriors(data, params, {flags.level, flags.m, flags.n_out, flags.seed});
  manifest.timings_seconds.emplace_back("posterior", seconds_since(t0));
  std::error_code ec;
  fs::create_directories(flags.out, ec);
  if (ec) throw Error("cannot create output directory '" + flags.out + "': " + ec.message());
  const fs::path dir(flags.out);
  io::write_text_file(dir / "posteriors.csv", io::posteriors_csv(post, manifest.hash()));
  io::write_text_file(dir / "posterior_manifest.json", io::manifest_json(manifest));
  report_written({dir / "posteriors.csv", dir / "posterior_manifest.json"});
  return kExitOk;
}

struct SimFlags {
  std::string preset;
  std::optional<std::size_t> p;
  std::uint64_t seed = 1;
  std::optional<double> strength;
  std::size_t k_true = 2;
  std::optional<double> sigma;
  std::vector<double> weights, means, sds;
  std::string pleiotropy = "none";
  std::string out;
  std::string truth;
};

SimConfig sim_config(const SimFlags& f) {
  PresetOptions po{f.p, f.seed, f.strength, f.k_true, f.sigma};
  if (!f.preset.empty()) return preset(f.preset, po);
  if (f.means.empty()) throw ConfigError("give --preset or explicit --means (with --sds and --weights)");
  const std::size_t k = f.means.size();
  SimConfig c;
  c.seed = f.seed;
  c.p = f.p.value_or(100);
  c.params_true.means = f.means;
  c.params_true.weights = f.weights.empty() ? std::vector<double>(k, 1.0 / static_cast<double>(k)) : f.weights;
  const auto sds = f.sds.empty() ? std::vector<double>(k, f.sigma.value_or(0.1)) : f.sds;
  if (sds.size() != k || c.params_true.weights.size() != k)
    throw ConfigError("--means, --sds and --weights must have the same length");
  for (double s : sds) c.params_true.variances.push_back(s * s);
  c.params_true.exposure_variance = exposure_variance_for_strength(f.strength.value_or(10.0), c.p);
  static const std::map<std::string, Pleiotropy> modes{{"none", Pleiotropy::kNone},
                                                       {"normal", Pleiotropy::kNormal},
                                                       {"laplace", Pleiotropy::kLaplace},
                                                       {"idiosyncratic", Pleiotropy::kIdiosyncratic}};
  const auto it = modes.find(f.pleiotropy);
  if (it == modes.end()) throw ConfigError("unknown --pleiotropy '" + f.pleiotropy + "'");
  c.pleiotropy = it->second;
  return c;
}

int run_simulate(const SimFlags& flags) {
  const auto sim = simulate_dataset(sim_config(flags));
  const std::string tsv = io::format_summary_tsv(sim.dataset);
  if (flags.out.empty() || flags.out == "-") {
    std::cout << tsv;
  } else {
    io::write_text_file(flags.out, tsv);
    std::cerr << "wrote " << flags.out << " (" << sim.dataset.size() << " SNPs)\n";
  }
  if (!flags.truth.empty()) {
    std::string csv = "snp_id,cluster,beta,theta_x,alpha\n";
    for (std::size_t i = 0; i < sim.truth.size(); ++i)
      csv += sim.dataset[i].snp_id + "," + std::to_string(sim.truth[i].cluster + 1) + "," +
             io::format_double(sim.truth[i].beta) + "," + io::format_double(sim.truth[i].theta_x) + "," +
             io::format_double(sim.pleiotropy[i]) + "\n";
    io::write_text_file(flags.truth, csv);
  }
  return kExitOk;
}

struct BenchFlags {
  std::string study = "selection";
  std::vector<std::size_t> ps{50, 250};
  std::vector<double> strengths{1.0, 5.0};
  std::vector<std::size_t> k_trues{1, 2, 3};
  std::vector<double> sigmas;
  std::size_t reps = 100;
  std::uint64_t seed = 1;
  std::size_t restarts = 3;
  std::size_t m0 = 500;
  std::string out;
};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", x);
  return buf;
}

int run_bench(const BenchFlags& f) {
  McemConfig mc;
  mc.n_restarts = f.restarts;
  mc.m0 = f.m0;
  std::string csv;
  auto progress = [](std::size_t done, std::size_t total) {
    if (done == total || done % 10 == 0) std::cerr << "  " << done << "/" << total << "\n";
  };
  if (f.study == "selection") {
    // One row per cell, in the layout of the model-selection tables; a
    // non-empty --sigmas list adds the cluster-SD column and mu_1 summaries.
    csv = "p,strength,k_true,sigma,prop_k1,prop_k2,prop_k3,prop_none,mu1_mean_when_k1,mu1_sd_when_k1,reps\n";
    const std::vector<double> sigmas = f.sigmas.empty() ? std::vector<double>{-1.0} : f.sigmas;
    for (std::size_t p : f.ps)
      for (double s : f.strengths)
        for (std::size_t k : f.k_trues)
          for (double sig : sigmas) {
            std::cerr << "p=" << p << " strength=" << s << " K_true=" << k << (sig > 0 ? " sigma=" + fmt(sig) : "") << "\n";
            studies::SelectionStudyConfig c;
            c.preset_options.p = p;
            c.preset_options.strength = s;
            c.preset_options.k_true = k;
            if (sig > 0) c.preset_options.sigma = sig;
            c.reps = f.reps;
            c.seed = f.seed;
            c.mcem = mc;
            const auto r = studies::run_selection(c, progress);
            const double none = r.rate(0);
            csv += std::to_string(p) + "," + fmt(s) + "," + std::to_string(k) + "," + (sig > 0 ? fmt(sig) : "default") +
                   "," + fmt(r.rate(1)) + "," + fmt(r.rate(2)) + "," + fmt(r.rate(3)) + "," + fmt(none) + "," +
                   fmt(stats::mean(r.mu1_when_k1)) + "," + fmt(stats::stddev(r.mu1_when_k1)) + "," + std::to_string(f.reps) + "\n";
          }
  } else if (f.study == "weak-instrument") {
    csv = "reps,mrpath_prop_k2,baseline_prop_above_2\n";
    studies::SelectionStudyConfig c;
    c.preset = "appendix-d";
    c.reps = f.reps;
    c.seed = f.seed;
    c.mcem = mc;
    c.baseline = true;
    const auto r = studies::run_selection(c, progress);
    csv += std::to_string(f.reps) + "," + fmt(r.rate(2)) + "," + fmt(r.baseline_rate_above(2)) + "\n";
  } else if (f.study == "recovery" || f.study == "coverage" || f.study.starts_with("appendix-e-")) {
    csv = "preset,p,parameter,truth,mean,sd,coverage,converged,reps\n";
    const bool pleio = f.study.starts_with("appendix-e-");
    std::vector<std::pair<std::string, std::size_t>> cells;
    if (pleio) cells = {{f.study, 2}};
    else
      for (std::size_t k : f.k_trues) cells.emplace_back("sim1-k" + std::to_string(k), k);
    for (const auto& [name, k] : cells)
      for (std::size_t p : (pleio ? std::vector<std::size_t>{100} : f.ps)) {
        std::cerr << name << " p=" << p << "\n";
        studies::RecoveryConfig c;
        c.preset = name;
        c.k = k;
        c.preset_options.p = p;
        c.reps = f.reps;
        c.seed = f.seed;
        c.mcem = mc;
        c.intervals = f.study == "coverage";
        const auto r = studies::run_recovery(c, progress);
        for (const auto& ps : r.parameters)
          csv += name + "," + std::to_string(p) + "," + ps.name + "," + fmt(ps.truth) + "," + fmt(ps.mean()) + "," +
                 fmt(ps.sd()) + "," + (c.intervals ? fmt(ps.coverage()) : "NA") + "," + std::to_string(r.converged) +
                 "," + std::to_string(r.reps) + "\n";
      }
  } else {
    throw ConfigError("unknown --study '" + f.study + "'");
  }
  if (f.out.empty() || f.out == "-") std::cout << csv;
  else io::write_text_file(f.out, csv);
  return kExitOk;
}

struct PlotFlags {
  std::string input;
  std::string params;
  std::string posteriors;
  std::string out = "mrpath_out";
};

int run_plot(const PlotFlags& f) {
  const auto data = io::read_summary_tsv(f.input);
  const auto params = io::read_params_json(f.params);
  std::vector<PosteriorSummary> post;
  if (!f.posteriors.empty()) post = io::read_posteriors_csv(f.posteriors);
  std::error_code ec;
  fs::create_directories(f.out, ec);
  if (ec) throw Error("cannot create output directory '" + f.out + "': " + ec.message());
  const fs::path dir(f.out);
  svg::render_scatter_svg(data, params, post, dir / "scatter.svg");
  std::vector<fs::path> written{dir / "scatter.svg"};
  if (!post.empty()) {
    svg::render_membership_svg(post, dir / "membership.svg");
    written.push_back(dir / "membership.svg");
  }
  report_written(written);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heterogeneous causal effects from summary-data Mendelian randomization"};
  app.set_version_flag("--version", std::string(MRPATH_VERSION));
  app.require_subcommand(1);
  std::optional<std::size_t> threads;
  app.add_option("--threads", threads, "Worker threads (default: MRPATH_THREADS or hardware concurrency)");

  FitFlags fit_flags;
  std::size_t k = 2;
  auto* fit_cmd = app.add_subcommand("fit", "Fit the mixture model with a fixed number of clusters");
  fit_flags.add_to(*fit_cmd);
  fit_cmd->add_option("--k", k, "Number of clusters")->capture_default_str()->check(CLI::PositiveNumber);

  FitFlags sel_flags;
  std::size_t k_min = 1, k_max = 3;
  auto* sel_cmd = app.add_subcommand("select-k", "Fit K = k-min..k-max and choose K by modified BIC");
  sel_flags.add_to(*sel_cmd);
  sel_cmd->add_option("--k-min", k_min)->capture_default_str();
  sel_cmd->add_option("--k-max", k_max)->capture_default_str();

  PosteriorFlags post_flags;
  auto* post_cmd = app.add_subcommand("posterior", "Per-SNP cluster membership and causal-effect posteriors");
  post_cmd->add_option("--input", post_flags.input, "Summary statistics TSV")->required()->check(CLI::ExistingFile);
  post_cmd->add_option("--params", post_flags.params, "results.json from fit or select-k")->required()->check(CLI::ExistingFile);
  post_cmd->add_option("--out", post_flags.out)->capture_default_str();
  post_cmd->add_option("--level", post_flags.level)->capture_default_str()->check(CLI::Range(0.5, 0.9999));
  post_cmd->add_option("--m", post_flags.m, "Importance draws per SNP")->capture_default_str()->check(CLI::PositiveNumber);
  post_cmd->add_option("--n-out", post_flags.n_out, "Resampled draws per SNP")->capture_default_str()->check(CLI::PositiveNumber);
  post_cmd->add_option("--seed", post_flags.seed)->capture_default_str();

  SimFlags sim_flags;
  auto* sim_cmd = app.add_subcommand("simulate", "Generate a synthetic summary-statistics TSV");
  sim_cmd->add_option("--preset", sim_flags.preset)->check(CLI::IsMember(preset_names()));
  sim_cmd->add_option("--p", sim_flags.p, "Number of SNPs");
  sim_cmd->add_option("--seed", sim_flags.seed)->capture_default_str();
  sim_cmd->add_option("--strength", sim_flags.strength, "Instrument strength sqrt(p) * lambda_x");
  sim_cmd->add_option("--k-true", sim_flags.k_true, "Generating K for the model-selection preset")->capture_default_str();
  sim_cmd->add_option("--sigma", sim_flags.sigma, "Cluster SD override");
  sim_cmd->add_option("--weights", sim_flags.weights)->delimiter(',');
  sim_cmd->add_option("--means", sim_flags.means)->delimiter(',');
  sim_cmd->add_option("--sds", sim_flags.sds)->delimiter(',');
  sim_cmd->add_option("--pleiotropy", sim_flags.pleiotropy)->capture_default_str()
      ->check(CLI::IsMember({"none", "normal", "laplace", "idiosyncratic"}));
  sim_cmd->add_option("--out", sim_flags.out, "Output TSV (default stdout)");
  sim_cmd->add_option("--truth", sim_flags.truth, "Also write per-SNP latent truth as CSV");

  BenchFlags bench_flags;
  auto* bench_cmd = app.add_subcommand("bench", "Run a replication study and print an aggregate CSV");
  bench_cmd->add_option("--study", bench_flags.study)->capture_default_str()
      ->check(CLI::IsMember({"selection", "recovery", "coverage", "weak-instrument", "appendix-e-normal",
                             "appendix-e-laplace", "appendix-e-idiosyncratic"}));
  bench_cmd->add_option("--p", bench_flags.ps)->delimiter(',');
  bench_cmd->add_option("--strength", bench_flags.strengths)->delimiter(',');
  bench_cmd->add_option("--k-true", bench_flags.k_trues)->delimiter(',');
  bench_cmd->add_option("--sigmas", bench_flags.sigmas)->delimiter(',');
  bench_cmd->add_option("--reps", bench_flags.reps)->capture_default_str();
  bench_cmd->add_option("--seed", bench_flags.seed)->capture_default_str();
  bench_cmd->add_option("--restarts", bench_flags.restarts)->capture_default_str();
  bench_cmd->add_option("--m0", bench_flags.m0)->capture_default_str();
  bench_cmd->add_option("--out", bench_flags.out, "Output CSV (default stdout)");

  PlotFlags plot_flags;
  auto* plot_cmd = app.add_subcommand("plot", "Render scatter and membership SVGs");
  plot_cmd->add_option("--input", plot_flags.input)->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--params", plot_flags.params)->required()->check(CLI::ExistingFile);
  plot_cmd->add_option("--posteriors", plot_flags.posteriors)->check(CLI::ExistingFile);
  plot_cmd->add_option("--out", plot_flags.out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (threads) set_worker_count(*threads);
    if (*fit_cmd) return run_fit(fit_flags, k);
    if (*sel_cmd) return run_select(sel_flags, k_min, k_max);
    if (*post_cmd) return run_posterior(post_flags);
    if (*sim_cmd) return run_simulate(sim_flags);
    if (*bench_cmd) return run_bench(bench_flags);
    if (*plot_cmd) return run_plot(plot_flags);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

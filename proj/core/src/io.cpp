#include "mrpath/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace mrpath::io {

namespace {

using json = nlohmann::ordered_json;

constexpr std::array<const char*, 5> kColumns{"snp_id", "beta_exposure", "se_exposure", "beta_outcome", "se_outcome"};

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
    if (tab == std::string_view::npos) break;
    start = tab + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail_row(const std::string& source, std::size_t row, std::size_t line, const std::string& what) {
  std::ostringstream msg;
  msg << source << ": row " << row << " (line " << line << "): " << what;
  throw DataError(msg.str());
}

json params_to_json(const MixtureParams& p) {
  return json{{"weights", p.weights},
              {"means", p.means},
              {"variances", p.variances},
              {"exposure_mean", p.exposure_mean},
              {"exposure_variance", p.exposure_variance}};
}

json trace_to_json(const TraceEntry& t) {
  return json{{"iteration", t.iteration},     {"q_tilde", t.q_tilde},
              {"delta_q", t.delta_q},         {"eta_hat", t.eta_hat},
              {"mc_size", t.mc_size},         {"rejected_attempts", t.rejected_attempts},
              {"accepted", t.accepted},       {"stopping", t.stopping},
              {"params", params_to_json(t.params)}};
}

json fit_to_json(const FitResult& f) {
  json j{{"k", f.k},
         {"num_snps", f.num_snps},
         {"converged", f.converged},
         {"q_final", f.q_final},
         {"final_mc_size", f.final_mc_size},
         {"best_chain", f.best_chain},
         {"params", params_to_json(f.params)}};
  if (f.bic) j["bic"] = *f.bic;
  if (f.intervals) {
    json ci = json::array();
    for (const auto& e : f.intervals->entries)
      ci.push_back(json{{"name", e.name}, {"estimate", e.estimate}, {"se", e.se},
                        {"lower", e.lower}, {"upper", e.upper}, {"scale", e.scale}});
    j["confidence_intervals"] = json{{"level", f.intervals->level}, {"entries", std::move(ci)}};
  } else {
    j["confidence_intervals"] = nullptr;
  }
  json chains = json::array();
  for (const auto& c : f.chains)
    chains.push_back(json{{"q_final", c.q_final}, {"converged", c.converged}, {"iterations", c.iterations},
                          {"final_mc_size", c.final_mc_size}});
  j["chains"] = std::move(chains);
  json trace = json::array();
  for (const auto& t : f.trace) trace.push_back(trace_to_json(t));
  j["trace"] = std::move(trace);
  j["diagnostics"] = f.diagnostics;
  return j;
}

double to_double(const json& v, const char* what) {
  if (!v.is_number()) throw DataError(std::string("results file: '") + what + "' is not a number");
  return v.get<double>();
}

}  // namespace

std::string format_double(double x) {
  std::array<char, 64> buf{};
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), res.ptr);
}

std::uint64_t fnv1a(std::string_view bytes) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t x) {
  std::array<char, 17> buf{};
  std::snprintf(buf.data(), buf.size(), "%016llx", static_cast<unsigned long long>(x));
  return buf.data();
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw Error("failed writing '" + path.string() + "'");
}

SummaryDataset parse_summary_tsv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  std::array<std::size_t, 5> col{};
  bool have_header = false;
  std::size_t width = 0;
  std::vector<SnpRecord> records;
  std::map<std::string, std::size_t, std::less<>> seen;

  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view view = trim(line);
    if (view.empty()) continue;
    const auto fields = split_tabs(view);
    if (!have_header) {
      for (std::size_t c = 0; c < kColumns.size(); ++c) {
        std::size_t found = fields.size();
        for (std::size_t f = 0; f < fields.size(); ++f)
          if (trim(fields[f]) == kColumns[c]) found = f;
        if (found == fields.size())
          throw DataError(source + ": header is missing required column '" + kColumns[c] + "'");
        col[c] = found;
      }
      width = fields.size();
      have_header = true;
      continue;
    }
    const std::size_t row = records.size() + 1;
    if (fields.size() != width) {
      fail_row(source, row, line_no,
               "expected " + std::to_string(width) + " fields, found " + std::to_string(fields.size()));
    }
    SnpRecord r;
    r.snp_id = std::string(trim(fields[col[0]]));
    if (r.snp_id.empty()) fail_row(source, row, line_no, "empty snp_id");
    std::array<double*, 4> targets{&r.theta_x_hat, &r.sigma_x, &r.theta_y_hat, &r.sigma_y};
    for (std::size_t c = 1; c < kColumns.size(); ++c) {
      const auto cell = trim(fields[col[c]]);
      double v = 0.0;
      const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
        fail_row(source, row, line_no, std::string("column ") + kColumns[c] + ": cannot parse '" + std::string(cell) + "'");
      if (!std::isfinite(v)) fail_row(source, row, line_no, std::string("column ") + kColumns[c] + ": value is not finite");
      *targets[c - 1] = v;
    }
    if (!(r.sigma_x > 0.0)) fail_row(source, row, line_no, "column se_exposure: must be positive");
    if (!(r.sigma_y > 0.0)) fail_row(source, row, line_no, "column se_outcome: must be positive");
    if (auto it = seen.find(r.snp_id); it != seen.end())
      fail_row(source, row, line_no, "duplicate snp_id '" + r.snp_id + "' (first seen on row " + std::to_string(it->second) + ")");
    seen.emplace(r.snp_id, row);
    records.push_back(std::move(r));
  }
  if (!have_header) throw DataError(source + ": file is empty (a header row is required)");
  if (records.empty()) throw DataError(source + ": no data rows");
  return SummaryDataset(std::move(records));
}

SummaryDataset read_summary_tsv(const std::filesystem::path& path) {
  return parse_summary_tsv(read_text_file(path), path.string());
}

std::string format_summary_tsv(const SummaryDataset& data) {
  std::string out = "snp_id\tbeta_exposure\tse_exposure\tbeta_outcome\tse_outcome\n";
  for (const auto& r : data) {
    out += r.snp_id;
    for (double v : {r.theta_x_hat, r.sigma_x, r.theta_y_hat, r.sigma_y}) {
      out += '\t';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_summary_tsv(const SummaryDataset& data, const std::filesystem::path& path) {
  write_text_file(path, format_summary_tsv(data));
}

std::string RunManifest::hash() const {
  json j{{"command", command}, {"input_hash", input_hash}, {"seed", seed}, {"version", version}};
  json cfg = json::array();
  for (const auto& [k, v] : config) cfg.push_back(json::array({k, v}));
  j["config"] = std::move(cfg);
  return hex64(fnv1a(j.dump()));
}

std::string manifest_json(const RunManifest& m) {
  json cfg = json::object();
  for (const auto& [k, v] : m.config) cfg[k] = v;
  json timings = json::object();
  for (const auto& [k, v] : m.timings_seconds) timings[k] = v;
  json j{{"schema_version", kManifestSchema},
         {"manifest_hash", m.hash()},
         {"command", m.command},
         {"input_path", m.input_path},
         {"input_hash", m.input_hash},
         {"seed", m.seed},
         {"version", m.version},
         {"config", std::move(cfg)},
         {"timings_seconds", std::move(timings)},
         {"diagnostics", m.diagnostics}};
  return j.dump(2) + "\n";
}

std::string results_json(const ResultsBundle& b) {
  if (b.fit == nullptr) throw ConfigError("results need a fit");
  json j{{"schema_version", kResultsSchema}};
  j["manifest_hash"] = b.manifest ? b.manifest->hash() : std::string();
  j["fit"] = fit_to_json(*b.fit);
  if (b.selection) {
    json table = json::array();
    for (const auto& f : b.selection->fits)
      table.push_back(json{{"k", f.k}, {"bic", f.bic ? json(*f.bic) : json(nullptr)},
                           {"q_final", f.q_final}, {"converged", f.converged}});
    j["model_selection"] = json{{"chosen_k", b.selection->chosen_k}, {"bic_table", std::move(table)},
                                {"notes", b.selection->notes}};
  }
  return j.dump(2) + "\n";
}

std::string posteriors_csv(std::span<const PosteriorSummary> posteriors, const std::string& manifest_hash) {
  std::string out = "# manifest_hash: " + manifest_hash + "\n";
  const std::size_t k = posteriors.empty() ? 0 : posteriors.front().membership_probs.size();
  out += "snp_id";
  for (std::size_t c = 0; c < k; ++c) out += ",prob_cluster_" + std::to_string(c + 1);
  out += ",assigned_cluster,beta_median,beta_lower,beta_upper,n_resamples\n";
  for (const auto& s : posteriors) {
    out += s.snp_id;
    for (double p : s.membership_probs) out += "," + format_double(p);
    out += "," + std::to_string(s.assigned_cluster + 1);
    out += "," + format_double(s.beta_median) + "," + format_double(s.beta_lower) + "," + format_double(s.beta_upper);
    out += "," + std::to_string(s.n_resamples) + "\n";
  }
  return out;
}

std::string trace_csv(const FitResult& fit, const std::string& manifest_hash) {
  std::string out = "# manifest_hash: " + manifest_hash + "\n";
  out += "iteration,q_tilde,delta_q,eta_hat,mc_size,rejected_attempts,accepted,stopping";
  for (std::size_t c = 0; c < fit.k; ++c) {
    const auto s = std::to_string(c + 1);
    out += ",pi_" + s + ",mu_" + s + ",sigma2_" + s;
  }
  out += ",exposure_mean,exposure_variance\n";
  for (const auto& t : fit.trace) {
    out += std::to_string(t.iteration) + "," + format_double(t.q_tilde) + "," + format_double(t.delta_q) + "," +
           format_double(t.eta_hat) + "," + std::to_string(t.mc_size) + "," + std::to_string(t.rejected_attempts) +
           "," + (t.accepted ? "1" : "0") + "," + (t.stopping ? "1" : "0");
    for (std::size_t c = 0; c < t.params.num_clusters(); ++c)
      out += "," + format_double(t.params.weights[c]) + "," + format_double(t.params.means[c]) + "," +
             format_double(t.params.variances[c]);
    out += "," + format_double(t.params.exposure_mean) + "," + format_double(t.params.exposure_variance) + "\n";
  }
  return out;
}

std::vector<std::filesystem::path> write_results(const ResultsBundle& b, const std::filesystem::path& out_dir) {
  if (b.fit == nullptr) throw ConfigError("results need a fit");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory '" + out_dir.string() + "': " + ec.message());
  const std::string hash = b.manifest ? b.manifest->hash() : std::string();
  std::vector<std::filesystem::path> written;
  auto put = [&](const char* name, const std::string& text) {
    written.push_back(out_dir / name);
    write_text_file(written.back(), text);
  };
  put("results.json", results_json(b));
  put("trace.csv", trace_csv(*b.fit, hash));
  if (!b.posteriors.empty()) put("posteriors.csv", posteriors_csv(b.posteriors, hash));
  if (b.manifest) put("manifest.json", manifest_json(*b.manifest));
  return written;
}

MixtureParams parse_params_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("results file is not valid JSON: ") + e.what());
  }
  const json* node = &j;
  if (j.contains("fit")) node = &j["fit"];
  if (!node->contains("params")) throw DataError("results file has no 'params' object");
  const json& p = (*node)["params"];
  MixtureParams out;
  for (const char* key : {"weights", "means", "variances"}) {
    if (!p.contains(key) || !p[key].is_array()) throw DataError(std::string("results file: missing array '") + key + "'");
  }
  for (const auto& v : p["weights"]) out.weights.push_back(to_double(v, "weights"));
  for (const auto& v : p["means"]) out.means.push_back(to_double(v, "means"));
  for (const auto& v : p["variances"]) out.variances.push_back(to_double(v, "variances"));
  if (!p.contains("exposure_mean") || !p.contains("exposure_variance"))
    throw DataError("results file: missing exposure parameters");
  out.exposure_mean = to_double(p["exposure_mean"], "exposure_mean");
  out.exposure_variance = to_double(p["exposure_variance"], "exposure_variance");
  try {
    out.validate();
  } catch (const ConfigError& e) {
    throw DataError(std::string("results file holds invalid parameters: ") + e.what());
  }
  return out;
}

MixtureParams read_params_json(const std::filesystem::path& path) { return parse_params_json(read_text_file(path)); }

std::vector<PosteriorSummary> read_posteriors_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  std::vector<std::string> header;
  std::vector<PosteriorSummary> out;
  auto split = [](const std::string& s) {
    std::vector<std::string> f;
    std::stringstream ss(s);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    return f;
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (header.empty()) {
      header = split(line);
      continue;
    }
    const auto f = split(line);
    if (f.size() != header.size()) throw DataError(path.string() + ": malformed row '" + line + "'");
    PosteriorSummary s;
    s.snp_id = f[0];
    const std::size_t k = header.size() - 6;
    try {
      for (std::size_t c = 0; c < k; ++c) s.membership_probs.push_back(std::stod(f[1 + c]));
      s.assigned_cluster = std::stoul(f[1 + k]) - 1;
      s.beta_median = std::stod(f[2 + k]);
      s.beta_lower = std::stod(f[3 + k]);
      s.beta_upper = std::stod(f[4 + k]);
      s.n_resamples = std::stoul(f[5 + k]);
    } catch (const std::exception&) {
      throw DataError(path.string() + ": unparseable row '" + line + "'");
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace mrpath::io

#include "mrpath/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <string>
#include <vector>

#include "mrpath/io.hpp"

namespace mrpath::svg {

namespace {

constexpr const char* kPalette[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d"};

const char* colour(std::size_t c) { return kPalette[c % std::size(kPalette)]; }

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double xmin, xmax, ymin, ymax, w, h;
  double px(double x) const { return (x - xmin) / (xmax - xmin) * w; }
  double py(double y) const { return h - (y - ymin) / (ymax - ymin) * h; }
};

// Clips the line y = slope * x to the frame's x-range and returns its two
// end points in plot coordinates.
std::string segment(const Frame& f, double slope) {
  return "M " + num(f.px(f.xmin)) + " " + num(f.py(slope * f.xmin)) + " L " + num(f.px(f.xmax)) + " " +
         num(f.py(slope * f.xmax));
}

}  // namespace

std::string scatter(const SummaryDataset& data, const MixtureParams& params, std::span<const PosteriorSummary> posteriors,
                    const ScatterOptions& o) {
  params.validate();
  double xlo = 0.0, xhi = 0.0, ylo = 0.0, yhi = 0.0;
  for (const auto& r : data) {
    xlo = std::min(xlo, r.theta_x_hat - r.sigma_x);
    xhi = std::max(xhi, r.theta_x_hat + r.sigma_x);
    ylo = std::min(ylo, r.theta_y_hat - r.sigma_y);
    yhi = std::max(yhi, r.theta_y_hat + r.sigma_y);
  }
  const double padx = 0.05 * std::max(xhi - xlo, 1e-12);
  const double pady = 0.05 * std::max(yhi - ylo, 1e-12);
  const Frame f{xlo - padx, xhi + padx, ylo - pady, yhi + pady, o.width - 2 * o.margin, o.height - 2 * o.margin};

  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(o.width) + "\" height=\"" + num(o.height) +
       "\" viewBox=\"0 0 " + num(o.width) + " " + num(o.height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(o.width / 2) + "\" y=\"" + num(o.margin / 2) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">" + escape(o.title) + "</text>\n";
  s += "<text x=\"" + num(o.width / 2) + "\" y=\"" + num(o.height - 15) +
       "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">SNP-exposure association</text>\n";
  s += "<text transform=\"translate(15 " + num(o.height / 2) +
       ") rotate(-90)\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">SNP-outcome association</text>\n";
  s += "<g id=\"plot-area\" transform=\"translate(" + num(o.margin) + " " + num(o.margin) + ")\" data-xmin=\"" +
       io::format_double(f.xmin) + "\" data-xmax=\"" + io::format_double(f.xmax) + "\" data-ymin=\"" +
       io::format_double(f.ymin) + "\" data-ymax=\"" + io::format_double(f.ymax) + "\" data-width=\"" +
       io::format_double(f.w) + "\" data-height=\"" + io::format_double(f.h) + "\">\n";
  s += "<clipPath id=\"clip\"><rect width=\"" + num(f.w) + "\" height=\"" + num(f.h) + "\"/></clipPath>\n";
  s += "<rect class=\"frame\" width=\"" + num(f.w) + "\" height=\"" + num(f.h) +
       "\" fill=\"none\" stroke=\"#444\"/>\n";
  s += "<line class=\"axis\" x1=\"0\" y1=\"" + num(f.py(0)) + "\" x2=\"" + num(f.w) + "\" y2=\"" + num(f.py(0)) +
       "\" stroke=\"#bbb\"/>\n";
  s += "<line class=\"axis\" x1=\"" + num(f.px(0)) + "\" y1=\"0\" x2=\"" + num(f.px(0)) + "\" y2=\"" + num(f.h) +
       "\" stroke=\"#bbb\"/>\n";

  s += "<g clip-path=\"url(#clip)\">\n";
  for (std::size_t c = 0; c < params.num_clusters(); ++c) {
    const double mu = params.means[c];
    const double sd = std::sqrt(params.variances[c]);
    const double lo = mu - sd, hi = mu + sd;
    s += "<path class=\"cluster-band\" data-cluster=\"" + std::to_string(c + 1) + "\" d=\"M " + num(f.px(f.xmin)) +
         " " + num(f.py(lo * f.xmin)) + " L " + num(f.px(f.xmax)) + " " + num(f.py(lo * f.xmax)) + " L " +
         num(f.px(f.xmax)) + " " + num(f.py(hi * f.xmax)) + " L " + num(f.px(f.xmin)) + " " +
         num(f.py(hi * f.xmin)) + " Z\" fill=\"" + colour(c) + "\" fill-opacity=\"0.15\" stroke=\"none\"/>\n";
    s += "<path class=\"cluster-line\" data-cluster=\"" + std::to_string(c + 1) + "\" data-slope=\"" +
         io::format_double(mu) + "\" d=\"" + segment(f, mu) + "\" stroke=\"" + colour(c) +
         "\" stroke-width=\"2\" fill=\"none\"/>\n";
  }
  s += "</g>\n";

  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& r = data[i];
    std::size_t cluster = 0;
    bool coloured = false;
    for (const auto& p : posteriors)
      if (p.snp_id == r.snp_id) {
        cluster = p.assigned_cluster;
        coloured = true;
        break;
      }
    const char* fill = coloured ? colour(cluster) : "#333";
    const double x = f.px(r.theta_x_hat), y = f.py(r.theta_y_hat);
    s += "<g class=\"snp\" data-snp=\"" + escape(r.snp_id) + "\">";
    s += "<line class=\"se-bar\" x1=\"" + num(f.px(r.theta_x_hat - r.sigma_x)) + "\" y1=\"" + num(y) + "\" x2=\"" +
         num(f.px(r.theta_x_hat + r.sigma_x)) + "\" y2=\"" + num(y) + "\" stroke=\"" + fill + "\" stroke-opacity=\"0.6\"/>";
    s += "<line class=\"se-bar\" x1=\"" + num(x) + "\" y1=\"" + num(f.py(r.theta_y_hat - r.sigma_y)) + "\" x2=\"" +
         num(x) + "\" y2=\"" + num(f.py(r.theta_y_hat + r.sigma_y)) + "\" stroke=\"" + fill + "\" stroke-opacity=\"0.6\"/>";
    s += "<circle class=\"point\" cx=\"" + num(x) + "\" cy=\"" + num(y) + "\" r=\"3\" fill=\"" + fill + "\"";
    if (coloured) s += " data-cluster=\"" + std::to_string(cluster + 1) + "\"";
    s += "/></g>\n";
  }
  s += "</g>\n";

  for (std::size_t c = 0; c < params.num_clusters(); ++c) {
    const double y = o.margin + 16.0 * static_cast<double>(c) + 10;
    s += "<g class=\"legend\"><rect x=\"" + num(o.margin + 10) + "\" y=\"" + num(y - 8) + "\" width=\"10\" height=\"10\" fill=\"" +
         colour(c) + "\"/><text x=\"" + num(o.margin + 25) + "\" y=\"" + num(y) +
         "\" font-family=\"sans-serif\" font-size=\"11\">cluster " + std::to_string(c + 1) + ": slope " + num(params.means[c]) +
         ", weight " + num(params.weights[c]) + "</text></g>\n";
  }
  s += "</svg>\n";
  return s;
}

std::string membership_bars(std::span<const PosteriorSummary> posteriors, double width) {
  const double row_h = 14.0, label_w = 120.0, top = 40.0, right = 20.0;
  const double bar_w = width - label_w - right;
  const double height = top + row_h * static_cast<double>(posteriors.size()) + 30.0;
  std::vector<std::size_t> order(posteriors.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double pa = posteriors[a].membership_probs.empty() ? 0.0 : posteriors[a].membership_probs[0];
    const double pb = posteriors[b].membership_probs.empty() ? 0.0 : posteriors[b].membership_probs[0];
    return pa > pb;
  });

  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(width) + "\" height=\"" + num(height) +
                  "\" viewBox=\"0 0 " + num(width) + " " + num(height) + "\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(width / 2) +
       "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">Cluster membership probabilities</text>\n";
  for (std::size_t r = 0; r < order.size(); ++r) {
    const auto& p = posteriors[order[r]];
    const double y = top + row_h * static_cast<double>(r);
    s += "<g class=\"snp-bar\" data-snp=\"" + escape(p.snp_id) + "\">";
    s += "<text x=\"" + num(label_w - 5) + "\" y=\"" + num(y + row_h - 3) +
         "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" + escape(p.snp_id) + "</text>";
    double x = label_w;
    for (std::size_t c = 0; c < p.membership_probs.size(); ++c) {
      const double w = bar_w * p.membership_probs[c];
      s += "<rect class=\"membership-segment\" data-cluster=\"" + std::to_string(c + 1) + "\" data-prob=\"" +
           io::format_double(p.membership_probs[c]) + "\" x=\"" + num(x) + "\" y=\"" + num(y + 1) + "\" width=\"" +
           num(w) + "\" height=\"" + num(row_h - 2) + "\" fill=\"" + colour(c) + "\"/>";
      x += w;
    }
    s += "</g>\n";
  }
  s += "</svg>\n";
  return s;
}

void render_scatter_svg(const SummaryDataset& data, const MixtureParams& params,
                        std::span<const PosteriorSummary> posteriors, const std::filesystem::path& out_path) {
  io::write_text_file(out_path, scatter(data, params, posteriors));
}

void render_membership_svg(std::span<const PosteriorSummary> posteriors, const std::filesystem::path& out_path) {
  io::write_text_file(out_path, membership_bars(posteriors));
}

}  // namespace mrpath::svg

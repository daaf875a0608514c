#include "adl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <regex>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace adl::plot {
namespace {

constexpr double kWidth = 640;
constexpr double kHeight = 420;
constexpr double kLeft = 70;
constexpr double kRight = 170;
constexpr double kTop = 40;
constexpr double kBottom = 60;

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                    "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string unescape(std::string text) {
  static const std::pair<const char*, const char*> entities[] = {
      {"&lt;", "<"}, {"&gt;", ">"}, {"&quot;", "\""}, {"&amp;", "&"}};
  for (const auto& [from, to] : entities) {
    for (auto pos = text.find(from); pos != std::string::npos; pos = text.find(from, pos + 1)) {
      text.replace(pos, std::strlen(from), to);
    }
  }
  return text;
}

std::pair<double, double> padded(double lo, double hi) {
  if (!(lo < hi)) {
    const double pad = std::abs(lo) > 0 ? std::abs(lo) * 0.05 : 0.5;
    return {lo - pad, hi + pad};
  }
  const double pad = (hi - lo) * 0.05;
  return {lo - pad, hi + pad};
}

}  // namespace

std::string render_svg(const LineChart& chart) {
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : chart.series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("series '" + s.label + "' has mismatched x/y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, s.y[i]);
      y_hi = std::max(y_hi, s.y[i]);
    }
  }
  if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1, y_lo = 0, y_hi = 1;
  std::tie(x_lo, x_hi) = padded(x_lo, x_hi);
  if (chart.y_lo < chart.y_hi) {
    y_lo = chart.y_lo;
    y_hi = chart.y_hi;
  } else {
    std::tie(y_lo, y_hi) = padded(y_lo, y_hi);
  }
  const double pw = kWidth - kLeft - kRight;
  const double ph = kHeight - kTop - kBottom;
  auto px = [&](double x) { return kLeft + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) { return kTop + (1.0 - (y - y_lo) / (y_hi - y_lo)) * ph; };

  std::ostringstream svg;
  svg << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)",
                     kWidth, kHeight)
      << '\n';
  svg << R"(<rect width="100%" height="100%" fill="white"/>)" << '\n';
  svg << fmt::format(R"(<text x="{}" y="22" text-anchor="middle" font-size="15">{}</text>)", kLeft + pw / 2,
                     escape(chart.title))
      << '\n';
  svg << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="#444"/>)", kLeft, kTop, pw, ph)
      << '\n';
  for (int t = 0; t <= 5; ++t) {
    const double xv = x_lo + (x_hi - x_lo) * t / 5.0;
    const double yv = y_lo + (y_hi - y_lo) * t / 5.0;
    svg << fmt::format(R"(<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#ddd"/>)", px(xv), kTop, kTop + ph) << '\n';
    svg << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{:.3g}</text>)", px(xv), kTop + ph + 16, xv) << '\n';
    svg << fmt::format(R"(<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#ddd"/>)", kLeft, py(yv), kLeft + pw) << '\n';
    svg << fmt::format(R"(<text x="{}" y="{}" text-anchor="end">{:.3g}</text>)", kLeft - 6, py(yv) + 4, yv) << '\n';
  }
  svg << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)", kLeft + pw / 2, kHeight - 18,
                     escape(chart.x_label))
      << '\n';
  svg << fmt::format(R"svg(<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">{1}</text>)svg",
                     kTop + ph / 2, escape(chart.y_label))
      << '\n';

  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const auto& s = chart.series[si];
    const char* colour = kPalette[si % std::size(kPalette)];
    svg << fmt::format(R"(<g class="series" data-label="{}">)", escape(s.label)) << '\n';
    std::string path;
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      path += fmt::format("{}{:.2f},{:.2f} ", path.empty() ? "M" : "L", px(s.x[i]), py(s.y[i]));
    }
    if (!path.empty()) svg << fmt::format(R"(<path d="{}" fill="none" stroke="{}" stroke-width="2"/>)", path, colour) << '\n';
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.y[i])) continue;
      svg << fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="3.5" fill="{}" data-x="{:.17g}" data-y="{:.17g}"/>)",
                         px(s.x[i]), py(s.y[i]), colour, s.x[i], s.y[i])
          << '\n';
    }
    const double ly = kTop + 14 + 18 * static_cast<double>(si);
    svg << fmt::format(R"(<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{3}" stroke-width="2"/>)", kLeft + pw + 12,
                       ly, kLeft + pw + 32, colour)
        << '\n';
    svg << fmt::format(R"(<text x="{}" y="{}">{}</text>)", kLeft + pw + 38, ly + 4, escape(s.label)) << '\n';
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_svg(const std::filesystem::path& path, const LineChart& chart) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << render_svg(chart);
}

std::vector<Series> read_svg_points(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  static const std::regex group(R"re(<g class="series" data-label="([^"]*)">)re");
  static const std::regex point(R"re(data-x="([^"]+)" data-y="([^"]+)")re");
  std::vector<Series> out;
  std::string line;
  std::smatch m;
  while (std::getline(in, line)) {
    if (std::regex_search(line, m, group)) {
      out.push_back(Series{unescape(m[1].str()), {}, {}});
    } else if (!out.empty() && std::regex_search(line, m, point)) {
      out.back().x.push_back(std::stod(m[1].str()));
      out.back().y.push_back(std::stod(m[2].str()));
    }
  }
  return out;
}

}  // namespace adl::plot

#pragma once

// Minimal static SVG line charts. Every point carries its exact coordinates
// as data-x / data-y attributes so plotted values can be read back.

#include <filesystem>
#include <string>
#include <vector>

namespace adl::plot {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct LineChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
  /// Fixed y range; when lo >= hi the range is taken from the data.
  double y_lo = 0.0;
  double y_hi = 0.0;
};

std::string render_svg(const LineChart& chart);
void write_svg(const std::filesystem::path& path, const LineChart& chart);

/// Points recovered from the data attributes of a chart written by render_svg,
/// one entry per series in drawing order.
std::vector<Series> read_svg_points(const std::filesystem::path& path);

}  // namespace adl::plot

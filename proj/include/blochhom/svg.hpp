#pragma once

// Minimal self-contained SVG line plots.

#include <optional>
#include <string>
#include <vector>

namespace blochhom {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  bool markers = false;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<PlotSeries> series;
};

/// Returns nullopt when no series has a plottable point.
std::optional<std::string> render_svg(const PlotSpec& spec);

std::string xml_escape(const std::string& s);

}  // namespace blochhom

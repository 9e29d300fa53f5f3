// Minimal static SVG line charts for report emission.
#pragma once

#include <string>
#include <vector>

namespace arcade::harness {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

void write_svg_lines(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<PlotSeries>& series);

}  // namespace arcade::harness

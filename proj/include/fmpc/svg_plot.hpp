#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fmpc {

struct PlotSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
  std::string color = "#1f77b4";
  double width = 1.5;
  bool dashed = false;
};

// Minimal standalone SVG line plot: axes, ticks, legend, nothing else.
// Non-finite samples split a series into separate segments.
struct LinePlot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<PlotSeries> series;

  void add(PlotSeries s) { series.push_back(std::move(s)); }
  void write_svg(std::ostream& out) const;
  void write_svg_file(const std::string& path) const;
};

}  // namespace fmpc

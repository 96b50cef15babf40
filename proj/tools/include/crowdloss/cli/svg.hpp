#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crowdloss::cli {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotSpec {
  std::string title;
  std::string x_label;
  std::string y_label;
};

/// Polyline chart with axes, five ticks per axis and a legend.
void write_line_plot(std::ostream& os, const PlotSpec& spec, const std::vector<Series>& series);

}  // namespace crowdloss::cli

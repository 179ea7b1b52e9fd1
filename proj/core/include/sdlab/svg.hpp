#pragma once

#include "sdlab/scene.hpp"

#include <string>
#include <vector>

namespace sdlab {

// Minimal hand-rolled SVG output; no external renderer involved, so files are
// byte-stable across runs.

// One rect per entry; values mapped through a blue-to-yellow ramp.
std::string svg_heatmap(const Mat& values, const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels, const std::string& title);

std::string svg_grid(const ObjectGrid& g, const std::string& title);

struct SvgSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string svg_lines(const std::vector<SvgSeries>& series, const std::string& title,
                      const std::string& x_label, const std::string& y_label);

}  // namespace sdlab

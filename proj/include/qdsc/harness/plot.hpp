#pragma once

#include <string>
#include <utility>
#include <vector>

#include "qdsc/harness/io.hpp"

namespace qdsc::harness {

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::vector<double> lo, hi;  // optional shaded band, same length as x
};

struct Figure {
  std::string title, x_label, y_label;
  std::vector<Series> series;
};

/// Self-contained SVG; identical figures give identical bytes.
std::string render_svg(const Figure& fig);

/// Trailing-window mean and population standard deviation.
std::pair<std::vector<double>, std::vector<double>> rolling_mean_std(const std::vector<double>& y, int window);

/// Chooses the figure from the CSV header: telemetry gives smoothed returns
/// with a ±1 std band, a trajectory gives rotor-angle traces, a noise sweep
/// gives mean return against p. Every input must be of the same kind.
Figure figure_from_tables(const std::vector<std::pair<std::string, CsvTable>>& inputs, int smoothing_window = 10);

}  // namespace qdsc::harness

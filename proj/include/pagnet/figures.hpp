#pragma once

#include <string>
#include <vector>

namespace pagnet::fig {

struct Series {
  std::string name;
  std::vector<double> y;
  std::vector<double> lo;  // optional confidence band, same length as y
  std::vector<double> hi;
};

struct LinePlot {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<double> x;
  std::vector<Series> series;
  // Optional grouped bars drawn under the lines (one group per x, one bar per row).
  std::vector<std::vector<double>> bars;
  std::vector<std::string> bar_names;
};

// Rows of two matrices drawn side by side, one row per timestep.
struct HeatmapPair {
  std::string title;
  std::string left_label;
  std::string right_label;
  std::vector<std::vector<double>> left;
  std::vector<std::vector<double>> right;
  std::vector<int> boundaries;  // column indices where a new segment begins
};

// Format chosen by extension; only ".svg" is supported.
void write_line_plot(const std::string& path, const LinePlot& plot);
void write_heatmap_pair(const std::string& path, const HeatmapPair& map);

struct SvgSummary {
  std::string title;
  int polylines = 0;
  int rects = 0;
};

// Reads back a figure written by this module; throws InputError if malformed.
SvgSummary read_svg(const std::string& path);

}  // namespace pagnet::fig

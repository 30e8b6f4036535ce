#pragma once

#include <string>
#include <vector>

namespace pb::svg {

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
  std::string color;  // empty = next color from the default cycle
};

struct Panel {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<Series> series;
};

// Vertically stacked line charts: frame, grid, ticks, legend, one polyline
// per series. Non-finite samples are dropped. Pure string assembly, no
// drawing dependency; the output is standalone well-formed XML.
std::string render_chart(const std::vector<Panel>& panels, int width = 900,
                         int panel_height = 280);

void write_chart(const std::string& path, const std::vector<Panel>& panels,
                 int width = 900, int panel_height = 280);

}  // namespace pb::svg

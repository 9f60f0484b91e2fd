#pragma once

#include <string>
#include <vector>

namespace lpssl {

/// Grouped bars on a fixed [0, 1] value axis with gridlines every 0.2.
struct BarChart {
  std::string title;
  std::string x_label;
  std::string y_label;
  std::vector<std::string> groups;
  std::vector<std::string> series;
  /// values[series][group]
  std::vector<std::vector<double>> values;
};

struct ChartGeometry {
  double width = 720;
  double height = 420;
  double left = 70;
  double right = 170;
  double top = 50;
  double bottom = 60;

  double plot_top() const { return top; }
  double plot_bottom() const { return height - bottom; }
  double y_of(double value) const { return plot_bottom() - value * (plot_bottom() - plot_top()); }
};

/// Standalone SVG 1.1 document. Each bar carries `data-series`, `data-group`
/// and `data-value` attributes; values outside [0, 1] are clipped in height.
std::string render_svg(const BarChart& chart, const ChartGeometry& geometry = {});

/// Decimal form shared by chart SVG attributes and CSV dumps.
std::string chart_value(double value);

}  // namespace lpssl

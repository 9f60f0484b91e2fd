#include "lpssl/svg_chart.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace lpssl {

namespace {

const char* kPalette[] = {"#4e79a7", "#f28e2b", "#59a14f", "#e15759", "#76b7b2", "#edc948"};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

std::string chart_value(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", value);
  return buf;
}

std::string render_svg(const BarChart& chart, const ChartGeometry& g) {
  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\" standalone=\"no\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << num(g.width) << "\" height=\""
      << num(g.height) << "\" viewBox=\"0 0 " << num(g.width) << ' ' << num(g.height) << "\">\n"
      << "<rect x=\"0\" y=\"0\" width=\"" << num(g.width) << "\" height=\"" << num(g.height)
      << "\" fill=\"white\"/>\n"
      << "<text x=\"" << num(g.width / 2) << "\" y=\"28\" text-anchor=\"middle\" font-family=\"sans-serif\" "
      << "font-size=\"16\">" << xml_escape(chart.title) << "</text>\n";

  const double plot_left = g.left;
  const double plot_right = g.width - g.right;
  for (int tick = 0; tick <= 5; ++tick) {
    const double v = tick * 0.2;
    const double y = g.y_of(v);
    svg << "<line class=\"gridline\" data-value=\"" << chart_value(v) << "\" x1=\"" << num(plot_left) << "\" y1=\""
        << num(y) << "\" x2=\"" << num(plot_right) << "\" y2=\"" << num(y) << "\" stroke=\"#cccccc\"/>\n"
        << "<text x=\"" << num(plot_left - 8) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << num(v).substr(0, 3)
        << "</text>\n";
  }
  svg << "<line x1=\"" << num(plot_left) << "\" y1=\"" << num(g.plot_bottom()) << "\" x2=\"" << num(plot_right)
      << "\" y2=\"" << num(g.plot_bottom()) << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << num(plot_left) << "\" y1=\"" << num(g.plot_top()) << "\" x2=\"" << num(plot_left)
      << "\" y2=\"" << num(g.plot_bottom()) << "\" stroke=\"black\"/>\n";

  const std::size_t n_groups = std::max<std::size_t>(1, chart.groups.size());
  const std::size_t n_series = std::max<std::size_t>(1, chart.series.size());
  const double group_width = (plot_right - plot_left) / static_cast<double>(n_groups);
  const double bar_width = group_width * 0.8 / static_cast<double>(n_series);
  for (std::size_t gi = 0; gi < chart.groups.size(); ++gi) {
    const double group_left = plot_left + group_width * static_cast<double>(gi) + group_width * 0.1;
    for (std::size_t si = 0; si < chart.series.size(); ++si) {
      const double value = chart.values[si][gi];
      const double clipped = std::clamp(value, 0.0, 1.0);
      const double y = g.y_of(clipped);
      svg << "<rect class=\"bar\" data-series=\"" << xml_escape(chart.series[si]) << "\" data-group=\""
          << xml_escape(chart.groups[gi]) << "\" data-value=\"" << chart_value(value) << "\" x=\""
          << num(group_left + bar_width * static_cast<double>(si)) << "\" y=\"" << num(y) << "\" width=\""
          << num(bar_width) << "\" height=\"" << num(g.plot_bottom() - y) << "\" fill=\""
          << kPalette[si % std::size(kPalette)] << "\"/>\n";
    }
    svg << "<text x=\"" << num(group_left + group_width * 0.4) << "\" y=\"" << num(g.plot_bottom() + 18)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(chart.groups[gi])
        << "</text>\n";
  }

  svg << "<text x=\"" << num((plot_left + plot_right) / 2) << "\" y=\"" << num(g.height - 16)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << xml_escape(chart.x_label)
      << "</text>\n"
      << "<text x=\"18\" y=\"" << num((g.plot_top() + g.plot_bottom()) / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" transform=\"rotate(-90 18 "
      << num((g.plot_top() + g.plot_bottom()) / 2) << ")\">" << xml_escape(chart.y_label) << "</text>\n";

  for (std::size_t si = 0; si < chart.series.size(); ++si) {
    const double y = g.plot_top() + 20.0 * static_cast<double>(si);
    svg << "<rect x=\"" << num(plot_right + 16) << "\" y=\"" << num(y) << "\" width=\"12\" height=\"12\" fill=\""
        << kPalette[si % std::size(kPalette)] << "\"/>\n"
        << "<text x=\"" << num(plot_right + 34) << "\" y=\"" << num(y + 10)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(chart.series[si]) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace lpssl

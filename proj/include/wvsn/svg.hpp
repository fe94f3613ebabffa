#pragma once

#include <string>
#include <vector>

namespace wvsn::svg {

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

/// Standalone SVG line chart (one polyline per series, axes, ticks, legend).
std::string line_chart(const std::string& title, const std::string& x_label,
                       const std::string& y_label, const std::vector<Series>& series,
                       int width = 860, int height = 480);

struct BarGroup {
  std::string label;
  std::vector<double> values;  // one per series name
};

/// Grouped bar chart; `series` names the bars within each group.
std::string bar_chart(const std::string& title, const std::string& y_label,
                      const std::vector<std::string>& series,
                      const std::vector<BarGroup>& groups, int width = 860,
                      int height = 480);

}  // namespace wvsn::svg

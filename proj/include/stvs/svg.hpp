#pragma once

#include <string>
#include <utility>
#include <vector>

namespace stvs::svg {

struct Series {
    std::string name;
    std::vector<std::pair<double, double>> points;
    bool dashed = false;
};

struct Axes {
    std::string title;
    std::string x_label;
    std::string y_label;
    double x_min = 0.0, x_max = 1.0;
    double y_min = 0.0, y_max = 1.0;
    int ticks = 5;
};

/// Polyline chart with axes, tick labels and a legend.
std::string line_chart(const Axes& axes, const std::vector<Series>& series, bool markers = true);

struct BarGroup {
    std::string label;              // x-axis category
    std::vector<double> values;     // one per series name
};

std::string bar_chart(const Axes& axes, const std::vector<std::string>& series_names,
                      const std::vector<BarGroup>& groups);

std::string escape(const std::string& text);

}  // namespace stvs::svg

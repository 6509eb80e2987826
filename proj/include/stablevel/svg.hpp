#pragma once

#include <string>
#include <vector>

namespace svl {

struct SvgSeries
{
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    // Optional shaded band; both empty or both sized like x.
    std::vector<double> lo;
    std::vector<double> hi;
};

// Minimal line chart with axes, tick labels and a legend.
std::string line_chart(const std::string& title,
                       const std::string& x_label,
                       const std::string& y_label,
                       const std::vector<SvgSeries>& series);

}  // namespace svl

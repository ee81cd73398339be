#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace kseg {

struct PlotSeries {
    std::string label;
    std::array<uint8_t, 3> color{0, 0, 0};
    std::vector<double> x;
    std::vector<double> y;
};

/// Centered moving average; window 1 returns the input unchanged. The window
/// is truncated at both ends so the output has the same length.
std::vector<double> moving_average(const std::vector<double>& y, int window);

/// Renders polyline series with axes, tick labels, and a legend to a PNG.
void write_line_plot(const std::string& path, const std::vector<PlotSeries>& series,
                     const std::string& title, const std::string& x_label,
                     const std::string& y_label, int width = 900, int height = 600);

}  // namespace kseg

#pragma once

#include <string>
#include <vector>

namespace freeflow::cli {

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

// Line plot on a fixed 800x500 viewport with axes, tick labels and a
// legend. Non-finite points are skipped. Each series may be drawn on its own
// normalized scale (`normalize`), in which case tick labels show [0, 1].
std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series, bool normalize = false);

}  // namespace freeflow::cli

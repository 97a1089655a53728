#pragma once

#include <string>
#include <vector>

namespace amplasso {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#444444";
    bool dashed = false;
    double width = 1.0;
};

/// Line chart on the unit square, the natural frame for (tpp, fdp) curves.
std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<PlotSeries>& series);

/// Reads two named columns from a CSV with a header row. NaN cells are kept.
void read_csv_columns(const std::string& path, const std::string& x_column, const std::string& y_column,
                      std::vector<double>& x, std::vector<double>& y);

}  // namespace amplasso

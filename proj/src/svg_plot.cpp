#include "amplasso/svg_plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace amplasso {

namespace {

constexpr double width = 480.0;
constexpr double height = 400.0;
constexpr double margin = 56.0;

std::string escape(const std::string& text)
{
    std::string out;
    for (char c : text) {
        switch (c) {
        case '<':
            out += "&lt;";
            break;
        case '>':
            out += "&gt;";
            break;
        case '&':
            out += "&amp;";
            break;
        default:
            out += c;
        }
    }
    return out;
}

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
        cells.push_back(cell);
    return cells;
}

}  // namespace

std::string render_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<PlotSeries>& series)
{
    const double plot_w = width - 2 * margin;
    const double plot_h = height - 2 * margin;
    auto sx = [&](double v) { return margin + std::clamp(v, 0.0, 1.0) * plot_w; };
    auto sy = [&](double v) { return height - margin - std::clamp(v, 0.0, 1.0) * plot_h; };

    std::ostringstream svg;
    svg.precision(5);
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<rect x=\"" << margin << "\" y=\"" << margin << "\" width=\"" << plot_w << "\" height=\"" << plot_h
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double v = k / 4.0;
        svg << "<text x=\"" << sx(v) << "\" y=\"" << height - margin + 16 << "\" text-anchor=\"middle\">" << v
            << "</text>\n";
        svg << "<text x=\"" << margin - 6 << "\" y=\"" << sy(v) + 4 << "\" text-anchor=\"end\">" << v
            << "</text>\n";
    }
    svg << "<text x=\"" << width / 2 << "\" y=\"" << margin / 2 << "\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(title) << "</text>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 14 << "\" text-anchor=\"middle\">" << escape(x_label)
        << "</text>\n";
    svg << "<text x=\"16\" y=\"" << height / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << height / 2 << ")\">" << escape(y_label) << "</text>\n";

    double legend_y = margin + 14;
    for (const auto& s : series) {
        std::ostringstream path;
        path.precision(5);
        bool pen_down = false;
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                pen_down = false;
                continue;
            }
            path << (pen_down ? " L" : " M") << sx(s.x[i]) << ' ' << sy(s.y[i]);
            pen_down = true;
        }
        const std::string dash = s.dashed ? " stroke-dasharray=\"5 3\"" : "";
        svg << "<path d=\"" << path.str() << "\" fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\""
            << s.width << "\"" << dash << "/>\n";
        if (!s.label.empty()) {
            svg << "<line x1=\"" << margin + 8 << "\" y1=\"" << legend_y - 4 << "\" x2=\"" << margin + 28
                << "\" y2=\"" << legend_y - 4 << "\" stroke=\"" << s.color << "\" stroke-width=\"" << s.width
                << "\"" << dash << "/>\n";
            svg << "<text x=\"" << margin + 34 << "\" y=\"" << legend_y << "\">" << escape(s.label) << "</text>\n";
            legend_y += 16;
        }
    }
    svg << "</svg>\n";
    return svg.str();
}

void read_csv_columns(const std::string& path, const std::string& x_column, const std::string& y_column,
                      std::vector<double>& x, std::vector<double>& y)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + " is empty");
    const auto header = split(line);
    std::size_t xi = header.size(), yi = header.size();
    for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] == x_column)
            xi = k;
        if (header[k] == y_column)
            yi = k;
    }
    if (xi == header.size() || yi == header.size())
        throw std::runtime_error(path + " lacks column " + (xi == header.size() ? x_column : y_column));
    x.clear();
    y.clear();
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        const auto cells = split(line);
        if (cells.size() != header.size())
            throw std::runtime_error(path + ": ragged row");
        x.push_back(std::stod(cells[xi]));
        y.push_back(std::stod(cells[yi]));
    }
}

}  // namespace amplasso

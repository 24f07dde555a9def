#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "swarmlab/io.hpp"

namespace swarmlab {

// One plotted series: a median line with an optional interquartile band.
struct PlotSeries {
    std::string label;
    std::string color = "#1f77b4";
    std::vector<double> x;
    std::vector<double> median;
    std::vector<double> q1;  // empty to skip the band
    std::vector<double> q3;
};

namespace detail {

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace detail

// Self-contained static SVG line chart. Plots are derived artifacts only;
// they never feed back into metrics files.
inline void write_svg_chart(const std::filesystem::path& path, const std::string& title,
                            const std::string& x_label, const std::string& y_label,
                            const std::vector<PlotSeries>& series) {
    const double width = 720, height = 440;
    const double ml = 70, mr = 20, mt = 40, mb = 50;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        for (double v : s.x) {
            xmin = std::min(xmin, v);
            xmax = std::max(xmax, v);
        }
        auto scan = [&](const std::vector<double>& vals) {
            for (double v : vals) {
                if (!std::isfinite(v)) continue;
                ymin = std::min(ymin, v);
                ymax = std::max(ymax, v);
            }
        };
        scan(s.median);
        scan(s.q1);
        scan(s.q3);
    }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
    }
    if (ymin > ymax) {
        ymin = 0;
        ymax = 1;
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (width - ml - mr); };
    auto py = [&](double y) { return height - mb - (y - ymin) / (ymax - ymin) * (height - mt - mb); };

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + detail::svg_num(width) +
           "\" height=\"" + detail::svg_num(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out += "<text x=\"" + detail::svg_num(width / 2) + "\" y=\"22\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\" font-size=\"15\">" + title + "</text>\n";

    // axes with a handful of ticks
    out += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" + detail::svg_num(height - mb) +
           "\" x2=\"" + detail::svg_num(width - mr) + "\" y2=\"" + detail::svg_num(height - mb) +
           "\" stroke=\"black\"/>\n";
    out += "<line x1=\"" + detail::svg_num(ml) + "\" y1=\"" + detail::svg_num(mt) + "\" x2=\"" +
           detail::svg_num(ml) + "\" y2=\"" + detail::svg_num(height - mb) +
           "\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = xmin + k * (xmax - xmin) / 4;
        const double yv = ymin + k * (ymax - ymin) / 4;
        out += "<text x=\"" + detail::svg_num(px(xv)) + "\" y=\"" + detail::svg_num(height - mb + 18) +
               "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::svg_num(xv) + "</text>\n";
        out += "<text x=\"" + detail::svg_num(ml - 8) + "\" y=\"" + detail::svg_num(py(yv) + 4) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" +
               detail::svg_num(yv) + "</text>\n";
    }
    out += "<text x=\"" + detail::svg_num((ml + width - mr) / 2) + "\" y=\"" +
           detail::svg_num(height - 12) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" + x_label +
           "</text>\n";
    out += "<text x=\"16\" y=\"" + detail::svg_num((mt + height - mb) / 2) +
           "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 16 " + detail::svg_num((mt + height - mb) / 2) + ")\">" +
           y_label + "</text>\n";

    int legend_row = 0;
    for (const auto& s : series) {
        if (!s.q1.empty() && s.q1.size() == s.x.size() && s.q3.size() == s.x.size()) {
            std::string band = "<path d=\"M";
            for (std::size_t i = 0; i < s.x.size(); ++i)
                band += " " + detail::svg_num(px(s.x[i])) + " " + detail::svg_num(py(s.q1[i]));
            for (std::size_t i = s.x.size(); i-- > 0;)
                band += " " + detail::svg_num(px(s.x[i])) + " " + detail::svg_num(py(s.q3[i]));
            band += " Z\" fill=\"" + s.color + "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
            out += band;
        }
        std::string line = "<polyline fill=\"none\" stroke=\"" + s.color +
                           "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            line += detail::svg_num(px(s.x[i])) + "," + detail::svg_num(py(s.median[i])) + " ";
        line += "\"/>\n";
        out += line;
        out += "<text x=\"" + detail::svg_num(width - mr - 10) + "\" y=\"" +
               detail::svg_num(mt + 14 + 16 * legend_row) +
               "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" +
               s.color + "\">" + s.label + "</text>\n";
        ++legend_row;
    }
    out += "</svg>\n";
    write_file(path, out);
}

}  // namespace swarmlab

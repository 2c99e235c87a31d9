#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "abkd/csvio.hpp"
#include "abkd/error.hpp"

namespace abkd {

// Minimal dependency-free SVG charts. Output is a pure function of the input
// data, so identical inputs give byte-identical files.

struct HeatmapCell {
    double x = 0.0; // alpha
    double y = 0.0; // beta
    double value = 0.0;
};

namespace detail {

inline std::string fmt_short(double v) {
    std::ostringstream os;
    os.precision(4);
    os << v;
    return os.str();
}

// Linear white -> steel blue ramp.
inline std::string ramp_color(double t) {
    t = std::clamp(t, 0.0, 1.0);
    const int r = static_cast<int>(std::lround(255.0 + t * (40.0 - 255.0)));
    const int g = static_cast<int>(std::lround(255.0 + t * (90.0 - 255.0)));
    const int b = static_cast<int>(std::lround(255.0 + t * (160.0 - 255.0)));
    std::ostringstream os;
    os << "rgb(" << r << "," << g << "," << b << ")";
    return os.str();
}

inline std::vector<double> sorted_unique(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

} // namespace detail

// Grid heatmap over the distinct (x, y) values present in `cells`.
inline std::string render_heatmap(const std::vector<HeatmapCell>& cells, const std::string& title,
                                  const std::string& x_label, const std::string& y_label) {
    if (cells.empty()) throw DataError("heatmap needs at least one cell");
    std::vector<double> xs, ys;
    for (const auto& c : cells) {
        xs.push_back(c.x);
        ys.push_back(c.y);
    }
    xs = detail::sorted_unique(xs);
    ys = detail::sorted_unique(ys);

    double lo = cells.front().value, hi = cells.front().value;
    for (const auto& c : cells) {
        if (std::isfinite(c.value)) {
            lo = std::min(lo, c.value);
            hi = std::max(hi, c.value);
        }
    }
    const double span = (hi > lo) ? hi - lo : 1.0;

    const int cell_w = 64, cell_h = 44, margin = 70, top = 50;
    const int width = margin + cell_w * static_cast<int>(xs.size()) + 30;
    const int height = top + cell_h * static_cast<int>(ys.size()) + 60;

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
        << title << "</text>\n";

    auto x_index = [&](double v) {
        return std::lower_bound(xs.begin(), xs.end(), v) - xs.begin();
    };
    auto y_index = [&](double v) {
        return std::lower_bound(ys.begin(), ys.end(), v) - ys.begin();
    };

    for (const auto& c : cells) {
        const auto xi = x_index(c.x);
        const auto yi = y_index(c.y);
        const int px = margin + static_cast<int>(xi) * cell_w;
        // Largest y at the top.
        const int py = top + (static_cast<int>(ys.size()) - 1 - static_cast<int>(yi)) * cell_h;
        const bool ok = std::isfinite(c.value);
        const std::string fill = ok ? detail::ramp_color((c.value - lo) / span) : "rgb(220,220,220)";
        svg << "<rect x=\"" << px << "\" y=\"" << py << "\" width=\"" << cell_w << "\" height=\""
            << cell_h << "\" fill=\"" << fill << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << px + cell_w / 2 << "\" y=\"" << py + cell_h / 2 + 4
            << "\" text-anchor=\"middle\" font-size=\"11\">"
            << (ok ? detail::fmt_short(c.value) : std::string("n/a")) << "</text>\n";
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
        svg << "<text x=\"" << margin + static_cast<int>(i) * cell_w + cell_w / 2 << "\" y=\""
            << top + static_cast<int>(ys.size()) * cell_h + 18
            << "\" text-anchor=\"middle\" font-size=\"12\">" << detail::fmt_short(xs[i])
            << "</text>\n";
    }
    for (std::size_t i = 0; i < ys.size(); ++i) {
        const int py = top + (static_cast<int>(ys.size()) - 1 - static_cast<int>(i)) * cell_h;
        svg << "<text x=\"" << margin - 8 << "\" y=\"" << py + cell_h / 2 + 4
            << "\" text-anchor=\"end\" font-size=\"12\">" << detail::fmt_short(ys[i])
            << "</text>\n";
    }
    svg << "<text x=\"" << margin + cell_w * static_cast<int>(xs.size()) / 2 << "\" y=\""
        << height - 12 << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
    svg << "<text x=\"16\" y=\"" << top + cell_h * static_cast<int>(ys.size()) / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
        << top + cell_h * static_cast<int>(ys.size()) / 2 << ")\">" << y_label << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

struct LineSeries {
    std::string label;
    std::vector<std::pair<double, double>> points; // sorted by x by the caller
};

inline std::string render_line_plot(const std::vector<LineSeries>& series,
                                    const std::string& title, const std::string& x_label,
                                    const std::string& y_label) {
    bool any = false;
    double x_lo = 0.0, x_hi = 1.0, y_lo = 0.0, y_hi = 1.0;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (!any) {
                x_lo = x_hi = x;
                y_lo = y_hi = y;
                any = true;
            } else {
                x_lo = std::min(x_lo, x);
                x_hi = std::max(x_hi, x);
                y_lo = std::min(y_lo, y);
                y_hi = std::max(y_hi, y);
            }
        }
    }
    if (!any) throw DataError("line plot needs at least one finite point");
    if (x_hi == x_lo) x_hi = x_lo + 1.0;
    if (y_hi == y_lo) y_hi = y_lo + 1.0;

    const int width = 460, height = 320, margin = 60, top = 40;
    const int plot_w = width - margin - 20, plot_h = height - top - 50;
    auto px = [&](double x) { return margin + (x - x_lo) / (x_hi - x_lo) * plot_w; };
    auto py = [&](double y) { return top + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h; };

    const char* palette[] = {"rgb(40,90,160)", "rgb(180,70,40)", "rgb(40,140,70)",
                             "rgb(130,60,150)", "rgb(200,140,0)", "rgb(0,140,140)"};

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\">\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << title << "</text>\n";
    svg << "<rect x=\"" << margin << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";

    for (int i = 0; i <= 4; ++i) {
        const double xv = x_lo + (x_hi - x_lo) * i / 4.0;
        const double yv = y_lo + (y_hi - y_lo) * i / 4.0;
        svg << "<text x=\"" << px(xv) << "\" y=\"" << top + plot_h + 18
            << "\" text-anchor=\"middle\" font-size=\"11\">" << detail::fmt_short(xv)
            << "</text>\n";
        svg << "<text x=\"" << margin - 6 << "\" y=\"" << py(yv) + 4
            << "\" text-anchor=\"end\" font-size=\"11\">" << detail::fmt_short(yv) << "</text>\n";
    }

    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        const char* color = palette[si % 6];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            svg << px(x) << "," << py(y) << " ";
        }
        svg << "\"/>\n";
        for (const auto& [x, y] : s.points) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color
                << "\"/>\n";
        }
        if (!s.label.empty()) {
            svg << "<text x=\"" << margin + 8 << "\" y=\"" << top + 16 + 16 * static_cast<int>(si)
                << "\" font-size=\"12\" fill=\"" << color << "\">" << s.label << "</text>\n";
        }
    }
    svg << "<text x=\"" << margin + plot_w / 2 << "\" y=\"" << height - 10
        << "\" text-anchor=\"middle\" font-size=\"13\">" << x_label << "</text>\n";
    svg << "<text x=\"16\" y=\"" << top + plot_h / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
        << top + plot_h / 2 << ")\">" << y_label << "</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << content;
}

} // namespace abkd

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace qdsb {

struct PlotSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string x_label;
    std::string y_label;
    std::vector<PlotSeries> series;
};

namespace detail {

inline std::string fmt_num(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

// Round tick spacing to 1/2/5 * 10^k covering the range with ~5 ticks.
inline std::vector<double> nice_ticks(double lo, double hi) {
    if (!(hi > lo)) {
        hi = lo + 1.0;
        lo = lo - 1.0;
    }
    const double raw = (hi - lo) / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (const double m : {1.0, 2.0, 5.0, 10.0}) {
        if (m * mag >= raw) {
            step = m * mag;
            break;
        }
    }
    std::vector<double> ticks;
    for (double v = std::ceil(lo / step) * step; v <= hi + step * 1e-9; v += step) {
        ticks.push_back(std::abs(v) < step * 1e-9 ? 0.0 : v);
    }
    return ticks;
}

}  // namespace detail

/// Renders polyline curves into a self-contained SVG 1.1 document with
/// axes, tick labels and a legend. Output is byte-identical for identical
/// inputs.
inline void render_svg_plot(const PlotSpec& spec, const std::string& path) {
    if (spec.series.empty()) throw std::invalid_argument("render_svg_plot: no series");
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = x_lo, y_hi = -x_lo;
    for (const auto& s : spec.series) {
        if (s.x.empty() || s.x.size() != s.y.size()) {
            throw std::invalid_argument("render_svg_plot: series '" + s.name +
                                        "' is empty or ragged");
        }
        for (double v : s.x) {
            x_lo = std::min(x_lo, v);
            x_hi = std::max(x_hi, v);
        }
        for (double v : s.y) {
            y_lo = std::min(y_lo, v);
            y_hi = std::max(y_hi, v);
        }
    }
    if (x_hi <= x_lo) x_hi = x_lo + 1.0;
    if (y_hi <= y_lo) y_hi = y_lo + 1.0;

    const double width = 640.0, height = 420.0;
    const double ml = 64.0, mr = 16.0, mt = 16.0, mb = 48.0;
    const auto sx = [&](double v) {
        return ml + (v - x_lo) / (x_hi - x_lo) * (width - ml - mr);
    };
    const auto sy = [&](double v) {
        return height - mb - (v - y_lo) / (y_hi - y_lo) * (height - mt - mb);
    };

    static const char* palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

    std::ofstream out(path);
    if (!out) throw std::runtime_error("render_svg_plot: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
        << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << height - mb << "\" x2=\"" << width - mr
        << "\" y2=\"" << height - mb << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\""
        << height - mb << "\" stroke=\"black\"/>\n";

    for (double tick : detail::nice_ticks(x_lo, x_hi)) {
        const double px = sx(tick);
        out << "<line x1=\"" << detail::fmt_num(px) << "\" y1=\"" << height - mb << "\" x2=\""
            << detail::fmt_num(px) << "\" y2=\"" << height - mb + 5 << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << detail::fmt_num(px) << "\" y=\"" << height - mb + 18
            << "\" font-size=\"11\" text-anchor=\"middle\">" << detail::fmt_num(tick)
            << "</text>\n";
    }
    for (double tick : detail::nice_ticks(y_lo, y_hi)) {
        const double py = sy(tick);
        out << "<line x1=\"" << ml - 5 << "\" y1=\"" << detail::fmt_num(py) << "\" x2=\"" << ml
            << "\" y2=\"" << detail::fmt_num(py) << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << ml - 8 << "\" y=\"" << detail::fmt_num(py + 4)
            << "\" font-size=\"11\" text-anchor=\"end\">" << detail::fmt_num(tick) << "</text>\n";
    }
    out << "<text x=\"" << (ml + width - mr) / 2 << "\" y=\"" << height - 10
        << "\" font-size=\"13\" text-anchor=\"middle\">" << spec.x_label << "</text>\n";
    out << "<text x=\"14\" y=\"" << (mt + height - mb) / 2
        << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
        << (mt + height - mb) / 2 << ")\">" << spec.y_label << "</text>\n";

    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        const char* color = palette[s % 8];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < spec.series[s].x.size(); ++i) {
            if (i > 0) out << ' ';
            out << detail::fmt_num(sx(spec.series[s].x[i])) << ','
                << detail::fmt_num(sy(spec.series[s].y[i]));
        }
        out << "\"/>\n";
    }

    const double lx = width - mr - 170.0;
    double ly = mt + 8.0;
    for (std::size_t s = 0; s < spec.series.size(); ++s) {
        const char* color = palette[s % 8];
        out << "<line x1=\"" << lx << "\" y1=\"" << detail::fmt_num(ly + 4) << "\" x2=\""
            << lx + 22 << "\" y2=\"" << detail::fmt_num(ly + 4) << "\" stroke=\"" << color
            << "\" stroke-width=\"1.5\"/>\n";
        out << "<text x=\"" << lx + 28 << "\" y=\"" << detail::fmt_num(ly + 8)
            << "\" font-size=\"12\">" << spec.series[s].name << "</text>\n";
        ly += 18.0;
    }
    out << "</svg>\n";
    if (!out) throw std::runtime_error("render_svg_plot: write failed: " + path);
}

}  // namespace qdsb

#pragma once

// Minimal line-plot SVG writer for spectra and sensitivity curves.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "nvsense/error.hpp"

namespace nvsense::cli {

struct SvgSeries {
    std::vector<double> x;
    std::vector<double> y;
    std::string color = "#1f4e9c";
};

struct SvgPlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<SvgSeries> series;
    std::vector<double> markers; ///< vertical marker lines at these x
};

inline std::string render_svg(const SvgPlot& p) {
    const double W = 800, H = 480, L = 80, R = 20, T = 40, B = 60;
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : p.series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!(x1 > x0)) x1 = x0 + 1.0;
    if (!(y1 > y0)) y1 = y0 + 1.0;
    auto px = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\">" << p.title
       << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double m : p.markers) {
        if (m < x0 || m > x1) continue;
        os << "<line x1=\"" << px(m) << "\" y1=\"" << T << "\" x2=\"" << px(m) << "\" y2=\"" << H - B
           << "\" stroke=\"#c0392b\" stroke-dasharray=\"4,3\"/>\n";
    }
    for (const auto& s : p.series) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            if (std::isfinite(s.x[i]) && std::isfinite(s.y[i])) os << px(s.x[i]) << ',' << py(s.y[i]) << ' ';
        os << "\"/>\n";
    }
    os << "<text x=\"" << W / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\" font-family=\"sans-serif\">"
       << p.x_label << " [" << x0 << ", " << x1 << "]</text>\n";
    os << "<text x=\"15\" y=\"" << H / 2 << "\" font-family=\"sans-serif\" transform=\"rotate(-90 15 " << H / 2
       << ")\" text-anchor=\"middle\">" << p.y_label << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

inline void write_svg(const std::string& path, const SvgPlot& p) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw InvalidArgument("cannot open " + path + " for writing");
    f << render_svg(p);
}

} // namespace nvsense::cli

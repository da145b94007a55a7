#pragma once

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "curbsight/stats.hpp"

namespace curbsight {

/// Minimal SVG plotting: scatter with identity line, grouped boxplots. Each
/// plot embeds its data as a CSV table inside an XML comment so tests can
/// check content without rasterizing.
namespace svg {

inline std::string fmt(double v) {
    std::ostringstream ss;
    ss.precision(6);
    ss << v;
    return ss.str();
}

struct Frame {
    double width = 640, height = 480;
    double left = 60, right = 20, top = 40, bottom = 50;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;

    double px(double x) const {
        return left + (x - xmin) / (xmax - xmin) * (width - left - right);
    }
    double py(double y) const {
        return height - bottom - (y - ymin) / (ymax - ymin) * (height - top - bottom);
    }
};

inline void open_svg(std::ostream& out, const Frame& f, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel) {
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\""
        << f.height << "\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << f.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << title << "</text>\n";
    out << "<text x=\"" << f.width / 2 << "\" y=\"" << f.height - 10
        << "\" text-anchor=\"middle\" font-size=\"12\">" << xlabel << "</text>\n";
    out << "<text x=\"15\" y=\"" << f.height / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 15 "
        << f.height / 2 << ")\">" << ylabel << "</text>\n";
    // axes
    out << "<line x1=\"" << f.left << "\" y1=\"" << f.height - f.bottom << "\" x2=\""
        << f.width - f.right << "\" y2=\"" << f.height - f.bottom
        << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left
        << "\" y2=\"" << f.height - f.bottom << "\" stroke=\"black\"/>\n";
    // min/max tick labels
    out << "<text x=\"" << f.left << "\" y=\"" << f.height - f.bottom + 15
        << "\" font-size=\"10\">" << fmt(f.xmin) << "</text>\n";
    out << "<text x=\"" << f.width - f.right << "\" y=\"" << f.height - f.bottom + 15
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(f.xmax) << "</text>\n";
    out << "<text x=\"" << f.left - 5 << "\" y=\"" << f.height - f.bottom
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(f.ymin) << "</text>\n";
    out << "<text x=\"" << f.left - 5 << "\" y=\"" << f.top + 10
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt(f.ymax) << "</text>\n";
}

inline void write_scatter(std::ostream& out, const std::string& title,
                          const std::vector<double>& xs, const std::vector<double>& ys,
                          const std::string& xlabel, const std::string& ylabel,
                          bool identity_line = true) {
    Frame f;
    if (!xs.empty()) {
        f.xmin = *std::min_element(xs.begin(), xs.end());
        f.xmax = *std::max_element(xs.begin(), xs.end());
        f.ymin = *std::min_element(ys.begin(), ys.end());
        f.ymax = *std::max_element(ys.begin(), ys.end());
        if (identity_line) {
            f.xmin = f.ymin = std::min(f.xmin, f.ymin);
            f.xmax = f.ymax = std::max(f.xmax, f.ymax);
        }
        if (f.xmax == f.xmin) f.xmax = f.xmin + 1.0;
        if (f.ymax == f.ymin) f.ymax = f.ymin + 1.0;
    }
    open_svg(out, f, title, xlabel, ylabel);
    if (identity_line)
        out << "<line x1=\"" << f.px(f.xmin) << "\" y1=\"" << f.py(f.xmin) << "\" x2=\""
            << f.px(f.xmax) << "\" y2=\"" << f.py(f.xmax)
            << "\" stroke=\"red\" stroke-dasharray=\"4\"/>\n";
    for (std::size_t i = 0; i < xs.size(); ++i)
        out << "<circle cx=\"" << fmt(f.px(xs[i])) << "\" cy=\"" << fmt(f.py(ys[i]))
            << "\" r=\"2.5\" fill=\"green\" fill-opacity=\"0.6\"/>\n";
    out << "<!-- data\n" << xlabel << "," << ylabel << "\n";
    for (std::size_t i = 0; i < xs.size(); ++i) out << fmt(xs[i]) << "," << fmt(ys[i]) << "\n";
    out << "-->\n</svg>\n";
}

inline void write_boxplot(std::ostream& out, const std::string& title,
                          const std::vector<std::pair<std::string, std::vector<double>>>& groups,
                          const std::string& ylabel) {
    Frame f;
    f.xmin = 0;
    f.xmax = static_cast<double>(groups.size());
    f.ymin = 0;
    f.ymax = 1;
    bool any = false;
    for (const auto& [label, values] : groups) {
        for (double v : values) {
            if (!any) {
                f.ymin = f.ymax = v;
                any = true;
            }
            f.ymin = std::min(f.ymin, v);
            f.ymax = std::max(f.ymax, v);
        }
    }
    if (f.ymax == f.ymin) f.ymax = f.ymin + 1.0;
    open_svg(out, f, title, "", ylabel);
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& values = groups[g].second;
        const double cx = f.px(static_cast<double>(g) + 0.5);
        out << "<text x=\"" << cx << "\" y=\"" << f.height - f.bottom + 15
            << "\" text-anchor=\"middle\" font-size=\"10\">" << groups[g].first
            << "</text>\n";
        if (values.empty()) continue;
        const SummaryRow s = summarize(values);
        const double half = (f.width - f.left - f.right) /
                            (4.0 * static_cast<double>(groups.size()));
        out << "<rect x=\"" << fmt(cx - half) << "\" y=\"" << fmt(f.py(s.q75)) << "\" width=\""
            << fmt(2 * half) << "\" height=\"" << fmt(f.py(s.q25) - f.py(s.q75))
            << "\" fill=\"lightsteelblue\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << fmt(cx - half) << "\" y1=\"" << fmt(f.py(s.median))
            << "\" x2=\"" << fmt(cx + half) << "\" y2=\"" << fmt(f.py(s.median))
            << "\" stroke=\"black\" stroke-width=\"2\"/>\n";
        out << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(f.py(s.min)) << "\" x2=\""
            << fmt(cx) << "\" y2=\"" << fmt(f.py(s.q25)) << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << fmt(cx) << "\" y1=\"" << fmt(f.py(s.q75)) << "\" x2=\""
            << fmt(cx) << "\" y2=\"" << fmt(f.py(s.max)) << "\" stroke=\"black\"/>\n";
    }
    out << "<!-- data\ngroup,value\n";
    for (const auto& [label, values] : groups)
        for (double v : values) out << label << "," << fmt(v) << "\n";
    out << "-->\n</svg>\n";
}

}  // namespace svg
}  // namespace curbsight

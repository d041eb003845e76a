#pragma once

// Minimal static line plots. Output depends only on the data, so plots hash
// as stably as the CSV files they accompany.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

namespace nvcharge::io {

struct PlotSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    int width = 720;
    int height = 420;
};

namespace detail {

inline std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else if (c == '"') o += "&quot;";
        else o += c;
    }
    return o;
}

inline std::string num(double v, const char* f = "%.2f") {
    char b[48];
    std::snprintf(b, sizeof b, f, v);
    return b;
}

} // namespace detail

inline std::string svg_line_plot(const std::vector<PlotSeries>& series, const PlotSpec& spec) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            x0 = std::min(x0, s.x[i]);
            x1 = std::max(x1, s.x[i]);
            y0 = std::min(y0, s.y[i]);
            y1 = std::max(y1, s.y[i]);
        }
    if (!(x1 > x0)) { x0 = std::isfinite(x0) ? x0 - 1 : 0; x1 = x0 + 2; }
    if (!(y1 > y0)) { y0 = std::isfinite(y0) ? y0 - 1 : 0; y1 = y0 + 2; }
    const double ml = 70, mr = 20, mt = 30, mb = 50;
    const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
    auto px = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
    auto py = [&](double y) { return mt + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::string o = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(spec.width) + "\" height=\"" +
                    std::to_string(spec.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o += "<rect x=\"" + detail::num(ml) + "\" y=\"" + detail::num(mt) + "\" width=\"" + detail::num(pw) + "\" height=\"" +
         detail::num(ph) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double xv = x0 + (x1 - x0) * k / 4.0, yv = y0 + (y1 - y0) * k / 4.0;
        o += "<text x=\"" + detail::num(px(xv)) + "\" y=\"" + detail::num(mt + ph + 16) + "\" text-anchor=\"middle\">" +
             detail::num(xv, "%.4g") + "</text>\n";
        o += "<text x=\"" + detail::num(ml - 6) + "\" y=\"" + detail::num(py(yv) + 4) + "\" text-anchor=\"end\">" +
             detail::num(yv, "%.4g") + "</text>\n";
    }
    o += "<text x=\"" + detail::num(ml + pw / 2) + "\" y=\"18\" text-anchor=\"middle\">" + detail::esc(spec.title) + "</text>\n";
    o += "<text x=\"" + detail::num(ml + pw / 2) + "\" y=\"" + detail::num(spec.height - 10.0) + "\" text-anchor=\"middle\">" +
         detail::esc(spec.x_label) + "</text>\n";
    o += "<text x=\"16\" y=\"" + detail::num(mt + ph / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " +
         detail::num(mt + ph / 2) + ")\">" + detail::esc(spec.y_label) + "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* c = colors[k % 6];
        o += "<polyline fill=\"none\" stroke=\"" + std::string(c) + "\" stroke-width=\"1.2\" points=\"";
        for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
            o += detail::num(px(s.x[i])) + "," + detail::num(py(s.y[i])) + " ";
        }
        o += "\"/>\n";
        o += "<text x=\"" + detail::num(ml + pw - 6) + "\" y=\"" + detail::num(mt + 16 + 14.0 * static_cast<double>(k)) +
             "\" text-anchor=\"end\" fill=\"" + c + "\">" + detail::esc(s.label) + "</text>\n";
    }
    o += "</svg>\n";
    return o;
}

} // namespace nvcharge::io

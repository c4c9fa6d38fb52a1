#pragma once

// ============================================================================
// Minimal self-contained SVG line charts for training curves
// ============================================================================

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace taprec {

struct PlotSeries {
    std::string label;
    std::vector<double> y;  // plotted against index 0..n-1
};

// A fixed-size line chart: series against their sample index, light grid,
// legend in the top-right corner. Returns the complete SVG document.
inline std::string line_chart_svg(const std::string& title, const std::string& x_label,
                                  const std::string& y_label,
                                  const std::vector<PlotSeries>& series) {
    static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b"};
    const double W = 640, H = 400;
    const double L = 64, R = 16, T = 40, B = 48;  // margins
    const double pw = W - L - R, ph = H - T - B;

    size_t n_max = 0;
    double y_lo = 0.0, y_hi = 1.0;
    bool any = false;
    for (const PlotSeries& s : series)
        for (double v : s.y) {
            if (!std::isfinite(v)) continue;
            if (!any) {
                y_lo = y_hi = v;
                any = true;
            }
            y_lo = std::min(y_lo, v);
            y_hi = std::max(y_hi, v);
        }
    for (const PlotSeries& s : series) n_max = std::max(n_max, s.y.size());
    if (!any || y_hi == y_lo) {
        y_lo -= 0.5;
        y_hi += 0.5;
    } else {
        const double pad = 0.06 * (y_hi - y_lo);
        y_lo -= pad;
        y_hi += pad;
    }
    const double x_max = n_max > 1 ? static_cast<double>(n_max - 1) : 1.0;

    auto px = [&](double x) { return L + pw * (x / x_max); };
    auto py = [&](double y) { return T + ph * (1.0 - (y - y_lo) / (y_hi - y_lo)); };
    auto fmt = [](double v) {
        char b[32];
        std::snprintf(b, sizeof(b), "%.4g", v);
        return std::string(b);
    };

    std::string svg;
    char buf[512];
    std::snprintf(buf, sizeof(buf),
                  "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
                  "viewBox=\"0 0 %g %g\" font-family=\"sans-serif\" font-size=\"12\">\n"
                  "<rect width=\"%g\" height=\"%g\" fill=\"white\"/>\n",
                  W, H, W, H, W, H);
    svg += buf;
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">%s</text>\n",
                  L + pw / 2, title.c_str());
    svg += buf;

    // grid and tick labels
    const int n_ticks = 5;
    for (int i = 0; i <= n_ticks; ++i) {
        const double fy = y_lo + (y_hi - y_lo) * i / n_ticks;
        const double gy = py(fy);
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"#ddd\"/>\n"
                      "<text x=\"%g\" y=\"%g\" text-anchor=\"end\">%s</text>\n",
                      L, gy, L + pw, gy, L - 6, gy + 4, fmt(fy).c_str());
        svg += buf;
        const double fx = x_max * i / n_ticks;
        const double gx = px(fx);
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"#ddd\"/>\n"
                      "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%s</text>\n",
                      gx, T, gx, T + ph, gx, T + ph + 16, fmt(fx).c_str());
        svg += buf;
    }
    std::snprintf(buf, sizeof(buf),
                  "<text x=\"%g\" y=\"%g\" text-anchor=\"middle\">%s</text>\n"
                  "<text x=\"16\" y=\"%g\" text-anchor=\"middle\" "
                  "transform=\"rotate(-90 16 %g)\">%s</text>\n",
                  L + pw / 2, H - 10, x_label.c_str(), T + ph / 2, T + ph / 2, y_label.c_str());
    svg += buf;

    // series polylines and legend
    for (size_t si = 0; si < series.size(); ++si) {
        const char* color = kColors[si % (sizeof(kColors) / sizeof(kColors[0]))];
        std::string pts;
        for (size_t i = 0; i < series[si].y.size(); ++i) {
            if (!std::isfinite(series[si].y[i])) continue;
            std::snprintf(buf, sizeof(buf), "%g,%g ", px(static_cast<double>(i)),
                          py(series[si].y[i]));
            pts += buf;
        }
        std::snprintf(buf, sizeof(buf),
                      "<polyline points=\"%s\" fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\"/>\n",
                      pts.c_str(), color);
        svg += buf;
        const double ly = T + 14 + 16 * static_cast<double>(si);
        std::snprintf(buf, sizeof(buf),
                      "<line x1=\"%g\" y1=\"%g\" x2=\"%g\" y2=\"%g\" stroke=\"%s\" "
                      "stroke-width=\"2\"/>\n<text x=\"%g\" y=\"%g\">%s</text>\n",
                      L + pw - 120, ly, L + pw - 96, ly, color, L + pw - 90, ly + 4,
                      series[si].label.c_str());
        svg += buf;
    }
    svg += "</svg>\n";
    return svg;
}

}  // namespace taprec

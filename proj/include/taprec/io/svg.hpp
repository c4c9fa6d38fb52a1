#pragma once

// Dependency-free SVG line/bar charts for metric curves, temporal error
// profiles, and reliability diagrams.

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "taprec/core/errors.hpp"

namespace taprec {

class SvgPlot {
public:
    SvgPlot(std::string title, std::string xlabel, std::string ylabel, int width = 640,
            int height = 420)
        : title_(std::move(title)),
          xlabel_(std::move(xlabel)),
          ylabel_(std::move(ylabel)),
          w_(width),
          h_(height) {}

    void add_line(const std::string& name, const std::vector<double>& x,
                  const std::vector<double>& y) {
        if (x.size() != y.size()) throw DimensionError("SvgPlot: x/y length mismatch");
        series_.push_back({name, x, y, false, 0.0});
        extend_range(x, y);
    }

    // Bars centred on x values with the given data-space width.
    void add_bars(const std::string& name, const std::vector<double>& x,
                  const std::vector<double>& y, double bar_width) {
        if (x.size() != y.size()) throw DimensionError("SvgPlot: x/y length mismatch");
        series_.push_back({name, x, y, true, bar_width});
        extend_range(x, y);
        ymin_ = std::min(ymin_, 0.0);
    }

    // y = x reference line across the current x-range.
    void add_diagonal() { diagonal_ = true; }

    void set_ylim(double lo, double hi) {
        ymin_ = lo;
        ymax_ = hi;
        ylim_fixed_ = true;
    }

    std::string render() const {
        double x0 = xmin_, x1 = xmax_, y0 = ymin_, y1 = ymax_;
        if (!(x1 > x0)) {
            x0 -= 0.5;
            x1 += 0.5;
        }
        if (!(y1 > y0)) {
            y0 -= 0.5;
            y1 += 0.5;
        }
        if (!ylim_fixed_) {
            const double pad = 0.06 * (y1 - y0);
            y0 -= pad;
            y1 += pad;
        }
        const double ml = 62, mr = 16, mt = 34, mb = 46;
        const double pw = w_ - ml - mr, ph = h_ - mt - mb;
        auto X = [&](double x) { return ml + (x - x0) / (x1 - x0) * pw; };
        auto Y = [&](double y) { return mt + ph - (y - y0) / (y1 - y0) * ph; };

        std::ostringstream s;
        s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w_ << "\" height=\"" << h_
          << "\" viewBox=\"0 0 " << w_ << " " << h_ << "\">\n";
        s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        s << "<text x=\"" << w_ / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\" "
          << "font-family=\"sans-serif\">" << escape(title_) << "</text>\n";

        // axes + ticks
        s << "<g stroke=\"#444\" stroke-width=\"1\">";
        s << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
          << mt + ph << "\"/>";
        s << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
          << "\"/></g>\n";
        for (int i = 0; i <= 5; ++i) {
            const double fx = x0 + (x1 - x0) * i / 5.0;
            const double fy = y0 + (y1 - y0) * i / 5.0;
            s << "<text x=\"" << X(fx) << "\" y=\"" << mt + ph + 16
              << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">"
              << fmt(fx) << "</text>\n";
            s << "<text x=\"" << ml - 6 << "\" y=\"" << Y(fy) + 3
              << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << fmt(fy)
              << "</text>\n";
            s << "<line x1=\"" << ml << "\" y1=\"" << Y(fy) << "\" x2=\"" << ml + pw << "\" y2=\""
              << Y(fy) << "\" stroke=\"#ddd\" stroke-width=\"0.5\"/>\n";
        }
        s << "<text x=\"" << ml + pw / 2 << "\" y=\"" << h_ - 8
          << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
          << escape(xlabel_) << "</text>\n";
        s << "<text x=\"14\" y=\"" << mt + ph / 2
          << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
          << "transform=\"rotate(-90 14 " << mt + ph / 2 << ")\">" << escape(ylabel_)
          << "</text>\n";

        if (diagonal_) {
            s << "<line x1=\"" << X(std::max(x0, y0)) << "\" y1=\"" << Y(std::max(x0, y0))
              << "\" x2=\"" << X(std::min(x1, y1)) << "\" y2=\"" << Y(std::min(x1, y1))
              << "\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>\n";
        }

        static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                        "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};
        for (size_t k = 0; k < series_.size(); ++k) {
            const Series& sr = series_[k];
            const char* color = palette[k % 8];
            if (sr.bars) {
                for (size_t i = 0; i < sr.x.size(); ++i) {
                    const double bx0 = X(sr.x[i] - sr.bar_width / 2);
                    const double bx1 = X(sr.x[i] + sr.bar_width / 2);
                    const double by = Y(sr.y[i]);
                    const double base = Y(std::max(0.0, y0));
                    s << "<rect x=\"" << bx0 << "\" y=\"" << std::min(by, base) << "\" width=\""
                      << bx1 - bx0 << "\" height=\"" << std::abs(base - by) << "\" fill=\""
                      << color << "\" fill-opacity=\"0.65\"/>\n";
                }
            } else {
                s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
                for (size_t i = 0; i < sr.x.size(); ++i)
                    s << X(sr.x[i]) << "," << Y(sr.y[i]) << " ";
                s << "\"/>\n";
            }
            // legend
            const double ly = mt + 14 + 15 * static_cast<double>(k);
            s << "<rect x=\"" << ml + pw - 130 << "\" y=\"" << ly - 8
              << "\" width=\"12\" height=\"6\" fill=\"" << color << "\"/>";
            s << "<text x=\"" << ml + pw - 114 << "\" y=\"" << ly
              << "\" font-size=\"10\" font-family=\"sans-serif\">" << escape(sr.name)
              << "</text>\n";
        }
        s << "</svg>\n";
        return s.str();
    }

private:
    struct Series {
        std::string name;
        std::vector<double> x, y;
        bool bars;
        double bar_width;
    };

    void extend_range(const std::vector<double>& x, const std::vector<double>& y) {
        for (double v : x) {
            xmin_ = std::min(xmin_, v);
            xmax_ = std::max(xmax_, v);
        }
        if (ylim_fixed_) return;
        for (double v : y) {
            ymin_ = std::min(ymin_, v);
            ymax_ = std::max(ymax_, v);
        }
    }

    static std::string fmt(double v) {
        std::ostringstream os;
        if (std::abs(v) >= 1000 || (std::abs(v) < 0.01 && v != 0.0))
            os.precision(2), os << std::scientific << v;
        else
            os.precision(4), os << v;
        return os.str();
    }

    static std::string escape(const std::string& s) {
        std::string out;
        for (char c : s) {
            if (c == '<')
                out += "&lt;";
            else if (c == '>')
                out += "&gt;";
            else if (c == '&')
                out += "&amp;";
            else
                out.push_back(c);
        }
        return out;
    }

    std::string title_, xlabel_, ylabel_;
    int w_, h_;
    std::vector<Series> series_;
    bool diagonal_ = false;
    bool ylim_fixed_ = false;
    double xmin_ = std::numeric_limits<double>::infinity();
    double xmax_ = -std::numeric_limits<double>::infinity();
    double ymin_ = std::numeric_limits<double>::infinity();
    double ymax_ = -std::numeric_limits<double>::infinity();
};

}  // namespace taprec

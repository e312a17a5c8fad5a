#include "freeflow/cli/svg.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

namespace freeflow::cli {

namespace {

constexpr double kWidth = 800.0;
constexpr double kHeight = 500.0;
constexpr double kLeft = 80.0;
constexpr double kRight = 170.0;  // room for the legend
constexpr double kTop = 40.0;
constexpr double kBottom = 60.0;

const char* const kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();

    void add(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void finish() {
        if (!(lo <= hi)) lo = 0.0, hi = 1.0;
        if (hi - lo < 1e-12 * std::max(1.0, std::abs(hi))) {
            lo -= 0.5;
            hi += 0.5;
        }
    }
};

std::string tick(double v) {
    std::ostringstream out;
    out << std::setprecision(3) << v;
    return out.str();
}

}  // namespace

std::string line_plot_svg(const std::string& title, const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series, bool normalize) {
    Range xr, yr;
    std::vector<Range> own(series.size());
    for (std::size_t s = 0; s < series.size(); ++s) {
        for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i) {
            if (!std::isfinite(series[s].y[i])) continue;
            xr.add(series[s].x[i]);
            own[s].add(series[s].y[i]);
            yr.add(series[s].y[i]);
        }
        own[s].finish();
    }
    xr.finish();
    if (normalize) {
        yr.lo = 0.0;
        yr.hi = 1.0;
    }
    yr.finish();

    const double pw = kWidth - kLeft - kRight;
    const double ph = kHeight - kTop - kBottom;
    auto px = [&](double x) { return kLeft + (x - xr.lo) / (xr.hi - xr.lo) * pw; };
    auto py = [&](double y) { return kTop + ph - (y - yr.lo) / (yr.hi - yr.lo) * ph; };

    std::ostringstream out;
    out << std::fixed << std::setprecision(2);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"800\" height=\"500\" viewBox=\"0 0 800 500\">\n";
    out << "<rect width=\"800\" height=\"500\" fill=\"white\"/>\n";
    out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"16\">" << escape(title) << "</text>\n";
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 5; ++k) {
        const double fx = xr.lo + (xr.hi - xr.lo) * k / 5.0;
        const double fy = yr.lo + (yr.hi - yr.lo) * k / 5.0;
        out << "<line x1=\"" << px(fx) << "\" y1=\"" << kTop + ph << "\" x2=\"" << px(fx) << "\" y2=\"" << kTop + ph + 5
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << px(fx) << "\" y=\"" << kTop + ph + 20
            << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" << tick(fx) << "</text>\n";
        out << "<line x1=\"" << kLeft - 5 << "\" y1=\"" << py(fy) << "\" x2=\"" << kLeft << "\" y2=\"" << py(fy)
            << "\" stroke=\"black\"/>\n";
        out << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(fy) + 4
            << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">" << tick(fy) << "</text>\n";
    }
    out << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kHeight - 15
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << escape(x_label) << "</text>\n";
    out << "<text x=\"20\" y=\"" << kTop + ph / 2 << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
        << "font-size=\"13\" transform=\"rotate(-90 20 " << kTop + ph / 2 << ")\">" << escape(y_label) << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        const char* color = kColors[s % std::size(kColors)];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < series[s].x.size() && i < series[s].y.size(); ++i) {
            double y = series[s].y[i];
            if (!std::isfinite(y) || !std::isfinite(series[s].x[i])) continue;
            if (normalize) y = (y - own[s].lo) / (own[s].hi - own[s].lo);
            out << (first ? "" : " ") << px(series[s].x[i]) << ',' << py(y);
            first = false;
        }
        out << "\"/>\n";
        const double ly = kTop + 15 + 20 * static_cast<double>(s);
        out << "<line x1=\"" << kWidth - kRight + 15 << "\" y1=\"" << ly << "\" x2=\"" << kWidth - kRight + 40
            << "\" y2=\"" << ly << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        std::string label = series[s].label;
        if (normalize) label += " [" + tick(own[s].lo) + ", " + tick(own[s].hi) + "]";
        out << "<text x=\"" << kWidth - kRight + 45 << "\" y=\"" << ly + 4
            << "\" font-family=\"sans-serif\" font-size=\"11\">" << escape(label) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

}  // namespace freeflow::cli

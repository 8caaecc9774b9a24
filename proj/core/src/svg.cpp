#include "hts/svg.hpp"

#include "hts/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace hts {

namespace {

constexpr const char *kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string &s) {
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

std::string header(double width, double height) {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(width) << "\" height=\"" << num(height)
        << "\" viewBox=\"0 0 " << num(width) << ' ' << num(height) << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    return out.str();
}

// Round tick step: 1, 2 or 5 times a power of ten.
double tick_step(double span, int target) {
    if (!(span > 0.0)) return 1.0;
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double f : {1.0, 2.0, 5.0, 10.0}) {
        if (f * mag >= raw) return f * mag;
    }
    return 10.0 * mag;
}

} // namespace

std::string nemenyi_svg(const NemenyiResult &r, const std::vector<std::string> &methods, const std::string &title) {
    if (methods.size() != r.mean_ranks.size()) {
        throw DataError("nemenyi plot: method names do not match the ranks");
    }
    const double k = static_cast<double>(methods.size());
    const double left = 140.0, right = 30.0, top = 50.0, row = 28.0;
    const double plot_w = 420.0;
    const double width = left + plot_w + right;
    const double height = top + row * k + 50.0;
    double lo = 1.0, hi = k;
    for (const auto &[a, b] : r.intervals) {
        lo = std::min(lo, a);
        hi = std::max(hi, b);
    }
    lo = std::floor(lo * 2.0) / 2.0;
    hi = std::ceil(hi * 2.0) / 2.0;
    auto x = [&](double v) { return left + (v - lo) / (hi - lo) * plot_w; };

    std::ostringstream out;
    out << header(width, height);
    const std::string heading = title.empty() ? "Nemenyi test" : title;
    out << "<text x=\"" << num(width / 2) << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << escape(heading)
        << "</text>\n";
    out << "<text x=\"" << num(width / 2) << "\" y=\"36\" text-anchor=\"middle\">alpha = " << num(r.alpha)
        << ", critical distance = " << num(r.critical_distance)
        << (r.friedman_rejected ? ", Friedman rejects" : ", Friedman does not reject") << "</text>\n";
    const double axis_y = top + row * k + 10.0;
    out << "<line x1=\"" << num(x(lo)) << "\" y1=\"" << num(axis_y) << "\" x2=\"" << num(x(hi)) << "\" y2=\""
        << num(axis_y) << "\" stroke=\"black\"/>\n";
    for (double v = lo; v <= hi + 1e-9; v += 0.5) {
        out << "<line x1=\"" << num(x(v)) << "\" y1=\"" << num(top - 5) << "\" x2=\"" << num(x(v)) << "\" y2=\""
            << num(axis_y) << "\" stroke=\"#dddddd\"/>\n";
        out << "<text x=\"" << num(x(v)) << "\" y=\"" << num(axis_y + 16) << "\" text-anchor=\"middle\">" << num(v)
            << "</text>\n";
    }
    out << "<text x=\"" << num(left + plot_w / 2) << "\" y=\"" << num(axis_y + 34)
        << "\" text-anchor=\"middle\">mean rank</text>\n";
    for (std::size_t i = 0; i < r.order.size(); ++i) {
        const std::size_t j = r.order[i];
        const double y = top + row * (static_cast<double>(i) + 0.5);
        const auto &[a, b] = r.intervals[j];
        out << "<text x=\"" << num(left - 10) << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">"
            << escape(methods[j]) << " - " << num(r.mean_ranks[j]) << "</text>\n";
        out << "<line x1=\"" << num(x(a)) << "\" y1=\"" << num(y) << "\" x2=\"" << num(x(b)) << "\" y2=\"" << num(y)
            << "\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
        out << "<circle cx=\"" << num(x(r.mean_ranks[j])) << "\" cy=\"" << num(y) << "\" r=\"4\" fill=\"#1f77b4\"/>\n";
    }
    out << "</svg>\n";
    return out.str();
}

std::string line_plot_svg(const std::string &title, const std::vector<Timestamp> &timestamps,
                          const std::vector<PlotSeries> &series) {
    const std::size_t n = timestamps.size();
    if (n == 0 || series.empty()) {
        throw DataError("line plot: nothing to draw");
    }
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto &s : series) {
        if (s.values.size() != n) {
            throw DataError("line plot: series '" + s.label + "' does not match the time axis");
        }
        for (double v : s.values) {
            if (std::isfinite(v)) {
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
    }
    if (!(hi > lo)) {
        hi = lo + 1.0;
        lo -= 1.0;
    }
    const double pad = 0.05 * (hi - lo);
    lo -= pad;
    hi += pad;
    const double left = 70.0, right = 20.0, top = 40.0, bottom = 60.0;
    const double plot_w = 760.0, plot_h = 300.0;
    const double width = left + plot_w + right, height = top + plot_h + bottom;
    auto x = [&](std::size_t i) { return left + (n > 1 ? static_cast<double>(i) / static_cast<double>(n - 1) : 0.5) * plot_w; };
    auto y = [&](double v) { return top + (hi - v) / (hi - lo) * plot_h; };

    std::ostringstream out;
    out << header(width, height);
    out << "<text x=\"" << num(width / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
        << "</text>\n";
    out << "<rect x=\"" << num(left) << "\" y=\"" << num(top) << "\" width=\"" << num(plot_w) << "\" height=\""
        << num(plot_h) << "\" fill=\"none\" stroke=\"black\"/>\n";
    const double step = tick_step(hi - lo, 5);
    for (double v = std::ceil(lo / step) * step; v <= hi; v += step) {
        out << "<line x1=\"" << num(left) << "\" y1=\"" << num(y(v)) << "\" x2=\"" << num(left + plot_w) << "\" y2=\""
            << num(y(v)) << "\" stroke=\"#eeeeee\"/>\n";
        out << "<text x=\"" << num(left - 6) << "\" y=\"" << num(y(v) + 4) << "\" text-anchor=\"end\">" << num(v)
            << "</text>\n";
    }
    const std::size_t ticks = std::min<std::size_t>(n, 6);
    for (std::size_t k = 0; k < ticks; ++k) {
        const std::size_t i = ticks > 1 ? k * (n - 1) / (ticks - 1) : 0;
        out << "<text x=\"" << num(x(i)) << "\" y=\"" << num(top + plot_h + 18) << "\" text-anchor=\"middle\">"
            << escape(format_timestamp(timestamps[i])) << "</text>\n";
    }
    for (std::size_t s = 0; s < series.size(); ++s) {
        const char *colour = kPalette[s % std::size(kPalette)];
        out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        bool first = true;
        for (std::size_t i = 0; i < n; ++i) {
            if (!std::isfinite(series[s].values[i])) continue;
            out << (first ? "" : " ") << num(x(i)) << ',' << num(y(series[s].values[i]));
            first = false;
        }
        out << "\"/>\n";
        const double ly = top + plot_h + 38;
        const double lx = left + 150.0 * static_cast<double>(s);
        out << "<line x1=\"" << num(lx) << "\" y1=\"" << num(ly) << "\" x2=\"" << num(lx + 20) << "\" y2=\"" << num(ly)
            << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << num(lx + 25) << "\" y=\"" << num(ly + 4) << "\">" << escape(series[s].label) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
}

} // namespace hts

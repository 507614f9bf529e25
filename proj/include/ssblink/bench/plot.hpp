#pragma once

// Minimal SVG line plots of BER against whichever axis the sweep varies.

#include "ssblink/bench/runner.hpp"

#include <fstream>
#include <set>

namespace ssblink::bench {

struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;  // (x, ber)
};

inline void write_svg_plot(std::ostream& os, const std::string& title, const std::string& x_label,
                           const std::vector<PlotSeries>& series) {
    constexpr double W = 720, H = 480, L = 80, R = 200, T = 40, B = 60;
    double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
    double y_lo = 0.0, y_hi = -12.0;
    for (const auto& s : series)
        for (const auto& [x, ber] : s.points) {
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            if (ber > 0) {
                y_lo = std::min(y_lo, std::floor(std::log10(ber)));
                y_hi = std::max(y_hi, std::ceil(std::log10(ber)));
            }
        }
    if (!std::isfinite(x_lo)) x_lo = 0, x_hi = 1;
    if (x_hi <= x_lo) x_hi = x_lo + 1;
    y_lo = std::max(y_lo, -8.0);
    if (y_hi <= y_lo) y_hi = y_lo + 1;
    const auto px = [&](double x) { return L + (x - x_lo) / (x_hi - x_lo) * (W - L - R); };
    const auto py = [&](double ber) {
        const double ly = std::clamp(std::log10(std::max(ber, 1e-12)), y_lo, y_hi);
        return T + (y_hi - ly) / (y_hi - y_lo) * (H - T - B);
    };
    static const char* kColours[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    os << "<rect x=\"" << L << "\" y=\"" << T << "\" width=\"" << W - L - R << "\" height=\"" << H - T - B
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double d = y_lo; d <= y_hi; d += 1.0) {
        const double y = T + (y_hi - d) / (y_hi - y_lo) * (H - T - B);
        os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << y << "\" y2=\"" << y
           << "\" stroke=\"#ddd\"/><text x=\"" << L - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">1e" << d
           << "</text>\n";
    }
    for (int k = 0; k <= 5; ++k) {
        const double x = x_lo + (x_hi - x_lo) * k / 5.0;
        os << "<text x=\"" << px(x) << "\" y=\"" << H - B + 18 << "\" text-anchor=\"middle\">" << detail::fmt("%.4g", x)
           << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
    os << "<text x=\"20\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 20 " << (T + H - B) / 2
       << ")\" text-anchor=\"middle\">BER</text>\n";
    const double fec = py(3.8e-3);
    os << "<line x1=\"" << L << "\" x2=\"" << W - R << "\" y1=\"" << fec << "\" y2=\"" << fec
       << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const char* col = kColours[i % std::size(kColours)];
        os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, ber] : series[i].points) os << px(x) << ',' << py(ber) << ' ';
        os << "\"/>\n";
        for (const auto& [x, ber] : series[i].points)
            os << "<circle cx=\"" << px(x) << "\" cy=\"" << py(ber) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
        os << "<text x=\"" << W - R + 10 << "\" y=\"" << T + 16 * (i + 1) << "\" fill=\"" << col << "\">"
           << series[i].label << "</text>\n";
    }
    os << "</svg>\n";
}

/// Picks the swept axis (OSNR, then bitrate, then phase, then fibre) and
/// draws one series per combination of the remaining columns.
inline void write_ber_plot(const std::filesystem::path& path, const ScenarioResult& r, const std::string& title) {
    std::set<double> osnr, rate, phase, fiber;
    for (const auto& row : r.rows) {
        osnr.insert(row.osnr_db);
        rate.insert(row.bitrate_bps);
        phase.insert(row.phase_deg);
        fiber.insert(row.fiber_km);
    }
    enum class Axis { osnr, rate, phase, fiber } axis = Axis::osnr;
    if (osnr.size() > 1) axis = Axis::osnr;
    else if (rate.size() > 1) axis = Axis::rate;
    else if (phase.size() > 1) axis = Axis::phase;
    else if (fiber.size() > 1) axis = Axis::fiber;

    std::map<std::string, PlotSeries> series;
    for (const auto& row : r.rows) {
        if (row.failed) continue;
        std::string key = to_string(row.stage);
        double x = 0.0;
        if (row.has_flag("alpha-auto")) key += " auto-alpha";
        else if (row.alpha) key += " a=" + detail::fmt("%.2f", *row.alpha);
        if (axis != Axis::fiber) key += " " + detail::fmt("%g", row.fiber_km) + "km";
        if (axis != Axis::phase && phase.size() > 1) key += " " + detail::fmt("%g", row.phase_deg) + "deg";
        if (axis != Axis::rate && rate.size() > 1) key += " " + detail::fmt("%g", row.bitrate_bps / 1e9) + "G";
        if (axis != Axis::osnr && osnr.size() > 1) key += " " + detail::fmt("%g", row.osnr_db) + "dB";
        switch (axis) {
            case Axis::osnr: x = std::isfinite(row.osnr_db) ? row.osnr_db : 60.0; break;
            case Axis::rate: x = row.bitrate_bps / 1e9; break;
            case Axis::phase: x = row.phase_deg; break;
            case Axis::fiber: x = row.fiber_km; break;
        }
        auto& s = series[key];
        s.label = key;
        s.points.emplace_back(x, row.ber.ber);
    }
    std::vector<PlotSeries> out;
    for (auto& [_, s] : series) {
        std::sort(s.points.begin(), s.points.end());
        out.push_back(std::move(s));
    }
    static const char* kLabels[] = {"OSNR (dB / 0.1 nm)", "bitrate (Gb/s)", "phase rotation (deg)", "fibre length (km)"};
    std::ofstream f(path);
    if (!f) throw Error("cannot write " + path.string());
    write_svg_plot(f, title, kLabels[static_cast<int>(axis)], out);
}

}  // namespace ssblink::bench

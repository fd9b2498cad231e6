#include "ocvtrack/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "ocvtrack/io.hpp"

namespace ocvtrack::svg {

namespace {

constexpr double kWidth = 800, kHeight = 500;
constexpr double kLeft = 70, kRight = 160, kTop = 40, kBottom = 55;
const char* const kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) { return format_fixed(v, 2); }

std::string escape(const std::string& s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

// 1-2-5 tick step giving roughly `target` ticks.
double tick_step(double span, int target) {
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (const double m : {1.0, 2.0, 5.0, 10.0})
        if (raw <= m * mag) return m * mag;
    return 10.0 * mag;
}

std::string tick_label(double v, double step) {
    const int decimals = std::max(0, static_cast<int>(-std::floor(std::log10(step) + 1e-9)));
    return format_fixed(std::fabs(v) < step * 1e-9 ? 0.0 : v, decimals);
}

}  // namespace

std::string render(const Plot& plot) {
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : plot.series)
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (!std::isfinite(s.x[k]) || !std::isfinite(s.y[k])) continue;
            x0 = std::min(x0, s.x[k]);
            x1 = std::max(x1, s.x[k]);
            y0 = std::min(y0, s.y[k]);
            y1 = std::max(y1, s.y[k]);
        }
    if (!(x1 > x0)) {
        x0 = 0;
        x1 = 1;
    }
    if (!(y1 > y0)) {
        y0 = std::isfinite(y0) ? y0 - 1 : 0;
        y1 = y0 + 2;
    }
    const double pad = 0.05 * (y1 - y0);
    y0 -= pad;
    y1 += pad;
    const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
    auto sx = [&](double x) { return kLeft + (x - x0) / (x1 - x0) * pw; };
    auto sy = [&](double y) { return kTop + (1.0 - (y - y0) / (y1 - y0)) * ph; };

    std::string o;
    o += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(kWidth) + "\" height=\"" + num(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    o += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    o += "<text x=\"" + num(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(plot.title) +
         "</text>\n";
    for (const auto& b : plot.bands) {
        const double a = sx(std::clamp(b.lo, x0, x1)), c = sx(std::clamp(b.hi, x0, x1));
        if (c <= a) continue;
        o += "<rect x=\"" + num(a) + "\" y=\"" + num(kTop) + "\" width=\"" + num(c - a) + "\" height=\"" + num(ph) +
             "\" fill=\"#000\" fill-opacity=\"0.05\"/>\n";
        o += "<text x=\"" + num(0.5 * (a + c)) + "\" y=\"" + num(kTop + 12) + "\" text-anchor=\"middle\" fill=\"#555\">" +
             escape(b.label) + "</text>\n";
    }
    o += "<rect x=\"" + num(kLeft) + "\" y=\"" + num(kTop) + "\" width=\"" + num(pw) + "\" height=\"" + num(ph) +
         "\" fill=\"none\" stroke=\"#333\"/>\n";
    const double xs = tick_step(x1 - x0, 8), ys = tick_step(y1 - y0, 6);
    for (double t = std::ceil(x0 / xs) * xs; t <= x1 + 1e-9 * xs; t += xs) {
        o += "<line x1=\"" + num(sx(t)) + "\" y1=\"" + num(kTop + ph) + "\" x2=\"" + num(sx(t)) + "\" y2=\"" +
             num(kTop + ph + 5) + "\" stroke=\"#333\"/>\n";
        o += "<text x=\"" + num(sx(t)) + "\" y=\"" + num(kTop + ph + 18) + "\" text-anchor=\"middle\">" +
             tick_label(t, xs) + "</text>\n";
    }
    for (double t = std::ceil(y0 / ys) * ys; t <= y1 + 1e-9 * ys; t += ys) {
        o += "<line x1=\"" + num(kLeft - 5) + "\" y1=\"" + num(sy(t)) + "\" x2=\"" + num(kLeft) + "\" y2=\"" +
             num(sy(t)) + "\" stroke=\"#333\"/>\n";
        o += "<text x=\"" + num(kLeft - 8) + "\" y=\"" + num(sy(t) + 4) + "\" text-anchor=\"end\">" +
             tick_label(t, ys) + "</text>\n";
    }
    o += "<text x=\"" + num(kLeft + pw / 2) + "\" y=\"" + num(kHeight - 12) + "\" text-anchor=\"middle\">" +
         escape(plot.x_label) + "</text>\n";
    o += "<text transform=\"translate(18," + num(kTop + ph / 2) + ") rotate(-90)\" text-anchor=\"middle\">" +
         escape(plot.y_label) + "</text>\n";

    for (std::size_t k = 0; k < plot.series.size(); ++k) {
        const auto& s = plot.series[k];
        const char* color = kPalette[k % (sizeof kPalette / sizeof *kPalette)];
        std::string path;
        bool pen_up = true;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) {
                pen_up = true;
                continue;
            }
            path += (pen_up ? "M" : "L") + num(sx(s.x[i])) + "," + num(sy(s.y[i])) + " ";
            pen_up = false;
        }
        if (!path.empty()) path.pop_back();
        o += "<path d=\"" + path + "\" fill=\"none\" stroke=\"" + color + "\" stroke-width=\"1.5\"/>\n";
        const double ly = kTop + 10 + 18.0 * static_cast<double>(k);
        o += "<line x1=\"" + num(kWidth - kRight + 12) + "\" y1=\"" + num(ly) + "\" x2=\"" +
             num(kWidth - kRight + 32) + "\" y2=\"" + num(ly) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        o += "<text x=\"" + num(kWidth - kRight + 38) + "\" y=\"" + num(ly + 4) + "\">" + escape(s.label) + "</text>\n";
    }
    for (const auto& m : plot.markers) {
        if (!std::isfinite(m.x) || !std::isfinite(m.y)) continue;
        o += "<circle cx=\"" + num(sx(m.x)) + "\" cy=\"" + num(sy(m.y)) + "\" r=\"3.5\" fill=\"none\" stroke=\"#000\"/>\n";
        if (!m.label.empty())
            o += "<text x=\"" + num(sx(m.x) + 5) + "\" y=\"" + num(sy(m.y) - 5) + "\" font-size=\"10\">" +
                 escape(m.label) + "</text>\n";
    }
    o += "</svg>\n";
    return o;
}

Plot qocv_overlay(const std::vector<QocvCurve>& curves) {
    Plot p;
    p.title = curves.empty() ? "qOCV" : "qOCV " + curves.front().system_id;
    p.x_label = "SOC (% of nominal)";
    p.y_label = "voltage per cell (V)";
    for (const auto& c : curves) {
        Series s;
        s.label = c.period.str() + " " + to_string(c.direction);
        for (const auto& g : c.grid) {
            s.x.push_back(g.mean_soc);
            s.y.push_back(g.voltage);
        }
        p.series.push_back(std::move(s));
    }
    return p;
}

Plot diff_overlay(const std::vector<DiffCurve>& curves, const std::vector<FoiSpec>& catalog,
                  const std::vector<FoiObservation>& observations) {
    Plot p;
    const bool ic = curves.empty() || curves.front().kind == DiffKind::IncrementalCapacity;
    p.title = ic ? "Incremental capacity" : "Differential voltage";
    p.x_label = ic ? "voltage per cell (V)" : "SOC (% of nominal)";
    p.y_label = ic ? "dQ/dV (%Q/V)" : "dV/dQ (V/%Q)";
    const DiffKind kind = ic ? DiffKind::IncrementalCapacity : DiffKind::DifferentialVoltage;
    for (const auto& spec : catalog) {
        if (spec.curve_kind != kind) continue;
        p.bands.push_back({spec.window.lo, spec.window.hi, "FOI " + std::to_string(spec.foi_id)});
        if (spec.pair_window) p.bands.push_back({spec.pair_window->lo, spec.pair_window->hi, ""});
    }
    for (const auto& c : curves) {
        p.series.push_back({c.source.period.str() + " " + to_string(c.source.direction), c.x, c.y});
        for (const auto& o : observations) {
            if (!o.found() || !(o.period == c.source.period) || std::isnan(o.position)) continue;
            const auto spec = std::find_if(catalog.begin(), catalog.end(),
                                           [&](const FoiSpec& s) { return s.foi_id == o.foi_id; });
            if (spec == catalog.end() || spec->curve_kind != kind) continue;
            p.markers.push_back({o.position, o.intensity, std::to_string(o.foi_id)});
        }
    }
    return p;
}

}  // namespace ocvtrack::svg

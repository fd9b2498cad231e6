#include "ocvtrack/diff.hpp"

#include <algorithm>
#include <cmath>

namespace ocvtrack {

UniformSeries smooth(const UniformSeries& series, double sigma) {
    if (!(series.dx > 0.0)) throw NonMonotonicAxis("smoothing grid must be strictly increasing");
    if (!(sigma >= 0.0)) throw DomainError("sigma must be >= 0");
    if (sigma > 0.1 * series.span()) throw SigmaTooLarge();
    const long radius = static_cast<long>(std::floor(4.0 * sigma / series.dx));
    if (radius == 0 || series.y.size() < 2) return series;

    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (long k = -radius; k <= radius; ++k) {
        const double u = static_cast<double>(k) * series.dx / sigma;
        kernel[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * u * u);
        ksum += kernel[static_cast<std::size_t>(k + radius)];
    }
    for (double& w : kernel) w /= ksum;

    const long n = static_cast<long>(series.y.size());
    const std::vector<double>& y = series.y;
    auto padded = [&](long k) -> double {
        // Point reflection about each end; repeated for radii beyond the length.
        if (k < 0) {
            const long m = std::min(-k, n - 1);
            return 2.0 * y[0] - y[static_cast<std::size_t>(m)];
        }
        if (k >= n) {
            const long m = std::max(2 * (n - 1) - k, 0L);
            return 2.0 * y[static_cast<std::size_t>(n - 1)] - y[static_cast<std::size_t>(m)];
        }
        return y[static_cast<std::size_t>(k)];
    };
    UniformSeries out = series;
    for (long i = 0; i < n; ++i) {
        double acc = 0.0;
        for (long k = -radius; k <= radius; ++k)
            acc += kernel[static_cast<std::size_t>(k + radius)] * padded(i + k);
        out.y[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

namespace {

void require_uniform_voltage(const QocvCurve& curve) {
    if (curve.grid.size() < 3) throw InsufficientData("curve needs at least 3 grid points");
    const double dx = curve.grid[1].voltage - curve.grid[0].voltage;
    if (!(dx > 0.0)) throw NonMonotonicVoltage("voltage grid not strictly increasing");
    for (std::size_t k = 1; k < curve.grid.size(); ++k) {
        const double d = curve.grid[k].voltage - curve.grid[k - 1].voltage;
        if (!(d > 0.0)) throw NonMonotonicVoltage("voltage grid not strictly increasing");
        if (std::fabs(d - dx) > 1e-6 * dx) throw NonMonotonicVoltage("voltage grid not uniform");
    }
}

}  // namespace

QocvCurve smooth(const QocvCurve& curve, double sigma_v) {
    require_uniform_voltage(curve);
    UniformSeries s;
    s.x0 = curve.grid.front().voltage;
    s.dx = (curve.grid.back().voltage - curve.grid.front().voltage) / static_cast<double>(curve.grid.size() - 1);
    for (const auto& p : curve.grid) s.y.push_back(p.mean_soc);
    const UniformSeries sm = smooth(s, sigma_v);
    QocvCurve out = curve;
    for (std::size_t k = 0; k < out.grid.size(); ++k) out.grid[k].mean_soc = sm.y[k];
    return out;
}

std::vector<double> gradient(const std::vector<double>& y, double dx) {
    const std::size_t n = y.size();
    if (n < 2) throw InsufficientData("gradient needs at least 2 points");
    std::vector<double> g(n);
    g[0] = (y[1] - y[0]) / dx;
    g[n - 1] = (y[n - 1] - y[n - 2]) / dx;
    for (std::size_t k = 1; k + 1 < n; ++k) g[k] = (y[k + 1] - y[k - 1]) / (2.0 * dx);
    return g;
}

std::string to_string(DiffKind k) { return k == DiffKind::IncrementalCapacity ? "IC" : "DV"; }

DiffKind diff_kind_from_string(const std::string& text) {
    if (text == "IC" || text == "IncrementalCapacity") return DiffKind::IncrementalCapacity;
    if (text == "DV" || text == "DifferentialVoltage") return DiffKind::DifferentialVoltage;
    throw DataError("unknown curve kind '" + text + "'");
}

DiffCurve ica(const QocvCurve& curve, double smoothing_sigma) {
    require_uniform_voltage(curve);
    const double dx =
        (curve.grid.back().voltage - curve.grid.front().voltage) / static_cast<double>(curve.grid.size() - 1);
    std::vector<double> soc;
    DiffCurve out;
    out.kind = DiffKind::IncrementalCapacity;
    for (const auto& p : curve.grid) {
        soc.push_back(p.mean_soc);
        out.x.push_back(p.voltage);
    }
    out.y = gradient(soc, dx);
    out.smoothing_sigma = smoothing_sigma;
    out.source = {curve.system_id, curve.period, curve.direction};
    return out;
}

UniformSeries voltage_vs_soc(const QocvCurve& curve, double soc_step) {
    if (!(soc_step > 0.0)) throw ConfigError("SOC step must be > 0");
    if (curve.grid.size() < 2) throw InsufficientData("curve needs at least 2 grid points");
    // Collapse runs of equal SOC so the inverse is a function.
    std::vector<double> s, v;
    for (std::size_t k = 0; k < curve.grid.size();) {
        std::size_t m = k;
        while (m < curve.grid.size() && curve.grid[m].mean_soc == curve.grid[k].mean_soc) ++m;
        if (k > 0 && curve.grid[k].mean_soc < s.back()) throw NonMonotonicSoc("qOCV SOC decreases with voltage");
        s.push_back(curve.grid[k].mean_soc);
        v.push_back(0.5 * (curve.grid[k].voltage + curve.grid[m - 1].voltage));
        k = m;
    }
    if (s.size() < 2) throw NonMonotonicSoc("qOCV curve has no SOC extent");
    const long g0 = static_cast<long>(std::ceil(s.front() / soc_step - 1e-9));
    const long g1 = static_cast<long>(std::floor(s.back() / soc_step + 1e-9));
    UniformSeries out;
    out.x0 = static_cast<double>(g0) * soc_step;
    out.dx = soc_step;
    std::size_t seg = 0;
    for (long g = g0; g <= g1; ++g) {
        const double x = std::clamp(static_cast<double>(g) * soc_step, s.front(), s.back());
        while (seg + 2 < s.size() && s[seg + 1] < x) ++seg;
        const double w = (x - s[seg]) / (s[seg + 1] - s[seg]);
        out.y.push_back(v[seg] + w * (v[seg + 1] - v[seg]));
    }
    return out;
}

DiffCurve dva(const UniformSeries& voltage_by_soc, double smoothing_sigma) {
    if (!(voltage_by_soc.dx > 0.0)) throw NonMonotonicSoc("SOC grid not strictly increasing");
    DiffCurve out;
    out.kind = DiffKind::DifferentialVoltage;
    for (std::size_t k = 0; k < voltage_by_soc.y.size(); ++k) out.x.push_back(voltage_by_soc.x(k));
    out.y = gradient(voltage_by_soc.y, voltage_by_soc.dx);
    out.smoothing_sigma = smoothing_sigma;
    return out;
}

DiffCurve ic_curve(const QocvCurve& curve, const DiffOptions& options) {
    const double span = curve.grid.back().voltage - curve.grid.front().voltage;
    const double sigma = std::min(options.ic_sigma_v, 0.1 * span);
    return ica(smooth(curve, sigma), sigma);
}

DiffCurve dv_curve(const QocvCurve& curve, const DiffOptions& options) {
    UniformSeries vs = voltage_vs_soc(curve, options.dv_soc_step);
    const double sigma = std::min(options.dv_sigma_soc, 0.1 * vs.span());
    DiffCurve out = dva(smooth(vs, sigma), sigma);
    out.source = {curve.system_id, curve.period, curve.direction};
    return out;
}

}  // namespace ocvtrack

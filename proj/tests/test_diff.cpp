#include <doctest.h>

#include <random>

#include "ocvtrack/diff.hpp"
#include "ocvtrack/sim.hpp"

using namespace ocvtrack;

namespace {

// Curve on a uniform voltage grid from an inverse OCV soc(v).
QocvCurve curve_from(double v0, double v1, double step, const std::function<double(double)>& soc_of_v) {
    QocvCurve c;
    const long n = std::lround((v1 - v0) / step);
    for (long k = 0; k <= n; ++k) {
        const double v = v0 + step * static_cast<double>(k);
        c.grid.push_back({v, soc_of_v(v), 5, 0.0});
    }
    c.voltage_step = step;
    return c;
}

UniformSeries series_from(double x0, double x1, double dx, const std::function<double(double)>& f) {
    UniformSeries s;
    s.x0 = x0;
    s.dx = dx;
    const long n = std::lround((x1 - x0) / dx);
    for (long k = 0; k <= n; ++k) s.y.push_back(f(x0 + dx * static_cast<double>(k)));
    return s;
}

double interp(const std::vector<double>& x, const std::vector<double>& y, double at) {
    auto it = std::upper_bound(x.begin(), x.end(), at);
    std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(it - x.begin()), 1, x.size() - 1);
    const double w = (at - x[k - 1]) / (x[k] - x[k - 1]);
    return y[k - 1] + w * (y[k] - y[k - 1]);
}

std::size_t argmax(const std::vector<double>& y) {
    return static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
}

// Quadratic OCV 3.0 + 0.01 s + 1e-5 s^2 and its inverse.
double quad_v(double s) { return 3.0 + 0.01 * s + 1e-5 * s * s; }
double quad_s(double v) { return (-0.01 + std::sqrt(1e-4 + 4e-5 * (v - 3.0))) / 2e-5; }

}  // namespace

TEST_CASE("linear OCV gives constant IC and DV") {
    const QocvCurve c = curve_from(3.0, 4.0, 0.005, [](double v) { return (v - 3.0) * 100.0; });
    const DiffCurve ic = ica(c);
    for (const double y : ic.y) CHECK(y == doctest::Approx(100.0).epsilon(1e-9));
    const DiffCurve dv = dva(voltage_vs_soc(c, 0.25));
    for (const double y : dv.y) CHECK(y == doctest::Approx(0.01).epsilon(1e-9));
    const DiffCurve smoothed = ic_curve(c);
    for (const double y : smoothed.y) CHECK(y == doctest::Approx(100.0).epsilon(1e-9));
}

TEST_CASE("central differences match analytic derivatives of the quadratic OCV") {
    const DiffCurve ic = ica(curve_from(3.0, 4.1, 0.005, quad_s));
    for (std::size_t k = 1; k + 1 < ic.x.size(); ++k) {
        const double s = quad_s(ic.x[k]);
        CHECK(ic.y[k] == doctest::Approx(1.0 / (0.01 + 2e-5 * s)).epsilon(1e-3));
    }
    const DiffCurve dv = dva(series_from(0, 100, 0.25, quad_v));
    for (std::size_t k = 1; k + 1 < dv.x.size(); ++k)
        CHECK(dv.y[k] == doctest::Approx(0.01 + 2e-5 * dv.x[k]).epsilon(1e-3));
}

TEST_CASE("gradient converges at second order") {
    auto err_at = [](double h) {
        std::vector<double> y;
        for (double x = 0; x <= 3.0 + 1e-12; x += h) y.push_back(std::sin(x));
        const auto g = gradient(y, h);
        double e = 0.0;
        for (std::size_t k = 1; k + 1 < g.size(); ++k) e = std::max(e, std::fabs(g[k] - std::cos(k * h)));
        return e;
    };
    const double order = std::log2(err_at(0.02) / err_at(0.01));
    CHECK(order >= 1.8);
    CHECK(gradient({1.0, 3.0}, 0.5) == std::vector<double>{4.0, 4.0});
}

TEST_CASE("smoothing below one grid step is the identity") {
    const UniformSeries s = series_from(0, 1, 0.01, [](double x) { return x * x; });
    CHECK(smooth(s, 0.002).y == s.y);
    CHECK(smooth(s, 0.0).y == s.y);
}

TEST_CASE("impulse response is the normalized sampled Gaussian") {
    UniformSeries s;
    s.dx = 0.01;
    s.y.assign(201, 0.0);
    s.y[100] = 1.0;
    const double sigma = 0.05;
    const UniformSeries out = smooth(s, sigma);
    double sum = 0.0, norm = 0.0;
    for (int k = -20; k <= 20; ++k) norm += std::exp(-0.5 * std::pow(k * 0.01 / sigma, 2));
    for (std::size_t k = 0; k < out.y.size(); ++k) {
        sum += out.y[k];
        const double d = (static_cast<double>(k) - 100.0) * 0.01;
        const double expect = std::fabs(d) <= 4 * sigma + 1e-12 ? std::exp(-0.5 * d * d / (sigma * sigma)) / norm : 0.0;
        CHECK(out.y[k] == doctest::Approx(expect).epsilon(1e-12).scale(1e-12));
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("smoothing suppresses noise at least fivefold without moving peaks") {
    const UniformSeries clean = series_from(0, 2, 0.0005, [](double x) { return 0.05 * std::sin(2 * M_PI * x); });
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0, 0.001);
    UniformSeries noisy = clean;
    for (double& y : noisy.y) y += noise(rng);
    const UniformSeries sm = smooth(noisy, 0.01);
    double before = 0.0, after = 0.0;
    for (std::size_t k = 0; k < clean.y.size(); ++k) {
        before += std::pow(noisy.y[k] - clean.y[k], 2);
        after += std::pow(sm.y[k] - clean.y[k], 2);
    }
    CHECK(std::sqrt(before / after) >= 5.0);

    // Peak positions on noise-free fixtures.
    const long shift_sine = static_cast<long>(argmax(smooth(clean, 0.01).y)) - static_cast<long>(argmax(clean.y));
    CHECK(std::labs(shift_sine) <= 1);
    const UniformSeries peaks = series_from(3.3, 4.2, 0.005, [](double v) {
        return 200 * std::exp(-0.5 * std::pow((v - 3.5) / 0.02, 2)) + 120 * std::exp(-0.5 * std::pow((v - 3.64) / 0.03, 2));
    });
    CHECK(std::labs(static_cast<long>(argmax(smooth(peaks, 0.01).y)) - static_cast<long>(argmax(peaks.y))) <= 1);
}

TEST_CASE("sigma above a tenth of the span is rejected") {
    const UniformSeries s = series_from(0, 1, 0.01, [](double x) { return x; });
    CHECK_THROWS_AS(smooth(s, 0.11), SigmaTooLarge);
    CHECK_NOTHROW(smooth(s, 0.1));
}

TEST_CASE("plateaus become IC peaks and DV valleys") {
    // OCV with a plateau at 3.6 V between 40 % and 60 % SOC.
    auto soc_of_v = [](double v) { return 100.0 * (v - 3.3) / 0.9 + 20.0 * (1.0 + std::tanh((v - 3.6) / 0.004)) / 2.0 - 20.0 * (v - 3.3) / 0.9; };
    const QocvCurve c = curve_from(3.3, 4.2, 0.002, soc_of_v);
    const DiffCurve ic = ic_curve(c, {0.004, 0.5, 0.25});
    CHECK(ic.x[argmax(ic.y)] == doctest::Approx(3.6).epsilon(0.003));
    const DiffCurve dv = dv_curve(c, {0.004, 0.5, 0.25});
    const double dv_plateau = interp(dv.x, dv.y, 40.0);
    const double dv_slope = interp(dv.x, dv.y, 15.0);
    CHECK(dv_plateau < 0.1 * dv_slope);
}

TEST_CASE("reciprocity, area and sign on a smooth monotone fixture") {
    auto v_of_s = [](double s) { return 3.4 + 0.007 * s + 0.05 * std::sin(s / 15.0); };
    // Invert v_of_s by bisection for the voltage-grid curve.
    auto s_of_v = [&](double v) {
        double lo = 0, hi = 100;
        for (int k = 0; k < 200; ++k) {
            const double mid = 0.5 * (lo + hi);
            (v_of_s(mid) < v ? lo : hi) = mid;
        }
        return 0.5 * (lo + hi);
    };
    const QocvCurve c = curve_from(std::ceil(v_of_s(0) / 0.005) * 0.005, std::floor(v_of_s(100) / 0.005) * 0.005, 0.005, s_of_v);
    const DiffOptions opt;
    const DiffCurve ic = ic_curve(c, opt), dv = dv_curve(c, opt);
    for (const double y : ic.y) CHECK((std::isfinite(y) && y >= 0.0));
    for (const double y : dv.y) CHECK((std::isfinite(y) && y >= 0.0));
    for (double s = 10; s <= 90; s += 2.5) {
        const double v = v_of_s(s);
        CHECK(interp(ic.x, ic.y, v) * interp(dv.x, dv.y, s) == doctest::Approx(1.0).epsilon(0.01));
    }
    double area = 0.0;
    for (std::size_t k = 1; k < ic.x.size(); ++k) area += 0.5 * (ic.y[k] + ic.y[k - 1]) * (ic.x[k] - ic.x[k - 1]);
    CHECK(std::fabs(area - (c.grid.back().mean_soc - c.grid.front().mean_soc)) <= 0.5);
}

TEST_CASE("IC area equals the SOC span on the simulator preset") {
    for (const Chemistry chem : {Chemistry::LmoNmcBlend, Chemistry::Nmc, Chemistry::Lfp}) {
        const sim::OcvCurve ocv = sim::integrate_preset(sim::ocv_preset(chem), {});
        const double v0 = std::ceil(ocv.v_min() / 0.005) * 0.005, v1 = std::floor(ocv.v_max() / 0.005) * 0.005;
        const QocvCurve c = curve_from(v0, v1, 0.005, [&](double v) { return ocv.soc_at(v); });
        const DiffCurve ic = ic_curve(c);
        double area = 0.0;
        for (std::size_t k = 1; k < ic.x.size(); ++k) area += 0.5 * (ic.y[k] + ic.y[k - 1]) * (ic.x[k] - ic.x[k - 1]);
        CHECK(std::fabs(area - (c.grid.back().mean_soc - c.grid.front().mean_soc)) <= 0.5);
    }
}

TEST_CASE("non-monotonic inputs are rejected") {
    QocvCurve c = curve_from(3.0, 3.1, 0.005, [](double v) { return v * 100; });
    c.grid[5].voltage = c.grid[4].voltage;
    CHECK_THROWS_AS(ica(c), NonMonotonicVoltage);
    QocvCurve d = curve_from(3.0, 3.1, 0.005, [](double v) { return v * 100; });
    d.grid[5].mean_soc = 0.0;
    CHECK_THROWS_AS(voltage_vs_soc(d, 0.25), NonMonotonicSoc);
    CHECK(diff_kind_from_string(to_string(DiffKind::DifferentialVoltage)) == DiffKind::DifferentialVoltage);
}

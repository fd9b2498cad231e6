#include "ocvtrack/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ocvtrack {

double pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw LengthMismatch();
    const std::size_t n = x.size();
    if (n < 3) throw InsufficientData("pearson needs n >= 3");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (!(sxx > 0.0) || !(syy > 0.0)) throw ZeroVariance();
    return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_continued_fraction(double a, double b, double x) {
    constexpr int max_iter = 500;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw DomainError("incomplete_beta requires a, b > 0");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double dof) {
    if (!(dof > 0.0)) throw DomainError("student_t_cdf requires dof > 0");
    const double x = dof / (dof + t * t);
    const double tail = 0.5 * incomplete_beta(0.5 * dof, 0.5, x);
    return t >= 0.0 ? 1.0 - tail : tail;
}

double p_value(double r, std::size_t n) {
    if (n < 3) throw InsufficientData("p_value needs n >= 3");
    if (!(std::fabs(r) <= 1.0)) throw DomainError("correlation outside [-1, 1]");
    if (std::fabs(r) == 1.0) throw DegenerateR();
    const double dof = static_cast<double>(n) - 2.0;
    // Two-tailed: P(|T| >= |t|) = I_{dof/(dof+t^2)}(dof/2, 1/2), and dof/(dof+t^2) = 1 - r^2.
    const double x = 1.0 - r * r;
    return std::clamp(incomplete_beta(0.5 * dof, 0.5, x), 0.0, 1.0);
}

LinearFit least_squares(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw LengthMismatch();
    const std::size_t n = x.size();
    if (n < 2) throw InsufficientData("least squares needs >= 2 points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if (!(sxx > 0.0)) throw ZeroVariance();
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    return fit;
}

std::string to_string(FoiQuantity q) {
    switch (q) {
        case FoiQuantity::Intensity: return "Int";
        case FoiQuantity::Position: return "Pos";
        case FoiQuantity::Distance: return "Dist";
    }
    return "?";
}

FoiQuantity foi_quantity_from_string(const std::string& text) {
    if (text == "Int" || text == "intensity") return FoiQuantity::Intensity;
    if (text == "Pos" || text == "position") return FoiQuantity::Position;
    if (text == "Dist" || text == "distance") return FoiQuantity::Distance;
    throw DataError("unknown FOI quantity '" + text + "'");
}

CorrelationReport correlate_tracks(const std::vector<TrackSeries>& tracks, const std::map<PeriodTag, double>& soh,
                                   std::size_t min_overlap) {
    CorrelationReport report;
    for (const auto& track : tracks) {
        std::vector<double> x, y;
        for (const auto& [period, value] : track.values) {
            const auto it = soh.find(period);
            if (it == soh.end()) continue;
            x.push_back(value);
            y.push_back(it->second);
        }
        const std::string label = "FOI" + std::to_string(track.foi_id) + " " + to_string(track.feature);
        if (x.size() < std::max<std::size_t>(min_overlap, 3)) {
            report.skipped.push_back(label + ": InsufficientOverlap (" + std::to_string(x.size()) + " periods)");
            continue;
        }
        CorrelationResult res;
        res.foi_id = track.foi_id;
        res.feature = track.feature;
        res.n = x.size();
        try {
            res.r = pearson(x, y);
        } catch (const ZeroVariance&) {
            report.skipped.push_back(label + ": ZeroVariance");
            continue;
        }
        try {
            res.p_value = p_value(res.r, res.n);
        } catch (const DegenerateR& e) {
            res.p_value = e.p_value();
            res.degenerate = true;
        }
        report.results.push_back(res);
    }
    return report;
}

}  // namespace ocvtrack

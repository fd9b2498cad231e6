#include "ocvtrack/qocv.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace ocvtrack {

std::vector<double> isotonic_fit(const std::vector<double>& y, const std::vector<double>& w) {
    struct Block {
        double mean, weight;
        std::size_t count;
    };
    std::vector<Block> blocks;
    blocks.reserve(y.size());
    for (std::size_t k = 0; k < y.size(); ++k) {
        blocks.push_back({y[k], w[k], 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].mean > blocks.back().mean) {
            Block b = blocks.back();
            blocks.pop_back();
            Block& a = blocks.back();
            const double wt = a.weight + b.weight;
            a.mean = (a.mean * a.weight + b.mean * b.weight) / wt;
            a.weight = wt;
            a.count += b.count;
        }
    }
    std::vector<double> out;
    out.reserve(y.size());
    for (const auto& b : blocks) out.insert(out.end(), b.count, b.mean);
    return out;
}

MonotoneProfile::MonotoneProfile(const std::vector<PartialPoint>& points) {
    std::vector<PartialPoint> p(points);
    std::sort(p.begin(), p.end(), [](const PartialPoint& a, const PartialPoint& b) { return a.soc < b.soc; });
    std::vector<double> v(p.size()), w(p.size(), 1.0);
    for (std::size_t k = 0; k < p.size(); ++k) v[k] = p[k].voltage;
    const std::vector<double> fit = isotonic_fit(v, w);
    for (std::size_t k = 0; k < p.size();) {
        std::size_t m = k;
        while (m < p.size() && fit[m] == fit[k]) ++m;
        v_.push_back(fit[k]);
        s_.push_back(0.5 * (p[k].soc + p[m - 1].soc));
        k = m;
    }
}

double MonotoneProfile::soc_at(double v) const {
    if (v_.size() == 1) return s_.front();
    auto it = std::upper_bound(v_.begin(), v_.end(), v);
    std::size_t k = static_cast<std::size_t>(it - v_.begin());
    if (k == 0) k = 1;
    if (k >= v_.size()) k = v_.size() - 1;
    const double w = (v - v_[k - 1]) / (v_[k] - v_[k - 1]);
    return s_[k - 1] + w * (s_[k] - s_[k - 1]);
}

namespace {

struct Grid {
    long g0 = 0, g1 = -1;
    double step = 0.0;
    double at(long g) const { return static_cast<double>(g) * step; }
};

Grid grid_over(const std::vector<MonotoneProfile>& profiles, double step) {
    Grid grid;
    grid.step = step;
    bool first = true;
    for (const auto& p : profiles) {
        if (p.empty()) continue;
        const long lo = static_cast<long>(std::ceil(p.v_min() / step - 1e-9));
        const long hi = static_cast<long>(std::floor(p.v_max() / step + 1e-9));
        if (first) {
            grid.g0 = lo;
            grid.g1 = hi;
            first = false;
        } else {
            grid.g0 = std::min(grid.g0, lo);
            grid.g1 = std::max(grid.g1, hi);
        }
    }
    return grid;
}

// Grid index range [lo, hi] inside one profile, using the same tolerance as grid_over.
std::pair<long, long> profile_range(const MonotoneProfile& p, double step) {
    return {static_cast<long>(std::ceil(p.v_min() / step - 1e-9)),
            static_cast<long>(std::floor(p.v_max() / step + 1e-9))};
}

double profile_soc(const MonotoneProfile& p, double v) {
    return p.soc_at(std::clamp(v, p.v_min(), p.v_max()));
}

}  // namespace

AlignResult align_partials(const std::vector<PartialQocvCurve>& partials, const AlignOptions& options) {
    if (!(options.voltage_step > 0.0) || options.max_iterations < 1) throw ConfigError("bad alignment options");
    AlignResult result;
    std::vector<std::size_t> active(partials.size());
    for (std::size_t k = 0; k < active.size(); ++k) active[k] = k;

    for (int pass = 0; pass < 2; ++pass) {
        std::vector<MonotoneProfile> profiles;
        for (const std::size_t k : active) profiles.emplace_back(partials[k].points);
        const std::size_t n = profiles.size();
        std::vector<double> offset(n, 0.0);
        std::vector<char> overlap(n, 0);
        const Grid grid = grid_over(profiles, options.voltage_step);
        const long len = grid.g1 - grid.g0 + 1;
        result.iterations = 0;
        result.converged = n < 2;
        if (n >= 2 && len > 0) {
            // Raw SOC of each profile on its grid points, computed once.
            std::vector<std::pair<long, long>> range(n);
            std::vector<std::vector<double>> raw(n);
            std::vector<long> count(static_cast<std::size_t>(len), 0);
            for (std::size_t i = 0; i < n; ++i) {
                if (profiles[i].empty()) {
                    range[i] = {1, 0};
                    continue;
                }
                range[i] = profile_range(profiles[i], options.voltage_step);
                for (long g = range[i].first; g <= range[i].second; ++g) {
                    raw[i].push_back(profile_soc(profiles[i], grid.at(g)));
                    ++count[static_cast<std::size_t>(g - grid.g0)];
                }
            }
            for (std::size_t i = 0; i < n; ++i)
                for (long g = range[i].first; g <= range[i].second; ++g)
                    if (count[static_cast<std::size_t>(g - grid.g0)] >= 2) overlap[i] = 1;

            std::vector<double> sum(static_cast<std::size_t>(len));
            for (int it = 0; it < options.max_iterations; ++it) {
                ++result.iterations;
                std::fill(sum.begin(), sum.end(), 0.0);
                for (std::size_t i = 0; i < n; ++i)
                    for (long g = range[i].first; g <= range[i].second; ++g)
                        sum[static_cast<std::size_t>(g - grid.g0)] +=
                            raw[i][static_cast<std::size_t>(g - range[i].first)] - offset[i];
                double change = 0.0;
                std::vector<double> delta(n, 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    if (!overlap[i]) continue;
                    double acc = 0.0;
                    long used = 0;
                    for (long g = range[i].first; g <= range[i].second; ++g) {
                        const std::size_t gi = static_cast<std::size_t>(g - grid.g0);
                        if (count[gi] < 2) continue;
                        const double mean = sum[gi] / static_cast<double>(count[gi]);
                        acc += raw[i][static_cast<std::size_t>(g - range[i].first)] - offset[i] - mean;
                        ++used;
                    }
                    delta[i] = acc / static_cast<double>(used);
                    change = std::max(change, std::fabs(delta[i]));
                }
                for (std::size_t i = 0; i < n; ++i) offset[i] += delta[i];
                if (change < options.tolerance) {
                    result.converged = true;
                    break;
                }
            }
        }

        std::vector<std::size_t> keep;
        for (std::size_t i = 0; i < n; ++i)
            if (std::fabs(offset[i]) <= options.outlier_limit) keep.push_back(i);
        if (keep.size() == n || pass == 1) {
            result.partials.clear();
            result.offsets.clear();
            result.no_overlap = 0;
            for (const std::size_t i : keep) {
                PartialQocvCurve c = partials[active[i]];
                for (auto& pt : c.points) pt.soc -= offset[i];
                result.partials.push_back(std::move(c));
                result.offsets.push_back(offset[i]);
                if (!overlap[i] && n >= 2) ++result.no_overlap;
            }
            result.dropped_outliers += n - keep.size();
            break;
        }
        // Outliers bias the cross-partial mean: drop them and solve again once.
        result.dropped_outliers += n - keep.size();
        std::vector<std::size_t> next;
        for (const std::size_t i : keep) next.push_back(active[i]);
        active.swap(next);
    }
    return result;
}

bool QocvCurve::covers(double v) const {
    return !grid.empty() && v >= grid.front().voltage - 1e-12 && v <= grid.back().voltage + 1e-12;
}

double QocvCurve::soc_at(double v) const {
    if (!covers(v)) throw VoltageOutOfRange(v);
    if (grid.size() == 1) return grid.front().mean_soc;
    auto it = std::upper_bound(grid.begin(), grid.end(), v,
                               [](double x, const QocvPoint& p) { return x < p.voltage; });
    std::size_t k = static_cast<std::size_t>(it - grid.begin());
    k = std::clamp<std::size_t>(k, 1, grid.size() - 1);
    const QocvPoint& a = grid[k - 1];
    const QocvPoint& b = grid[k];
    const double w = std::clamp((v - a.voltage) / (b.voltage - a.voltage), 0.0, 1.0);
    return a.mean_soc + w * (b.mean_soc - a.mean_soc);
}

QocvCurve fuse(const std::vector<PartialQocvCurve>& aligned, const FuseOptions& options) {
    if (!(options.voltage_step > 0.0) || options.min_phases_per_point < 1) throw ConfigError("bad fuse options");
    if (aligned.size() < options.min_phases_per_period) throw InsufficientPhases(aligned.size());
    std::vector<MonotoneProfile> profiles;
    for (const auto& p : aligned) profiles.emplace_back(p.points);
    const Grid grid = grid_over(profiles, options.voltage_step);

    std::vector<QocvPoint> all;
    for (long g = grid.g0; g <= grid.g1; ++g) {
        const double v = grid.at(g);
        double sum = 0.0;
        std::size_t n = 0;
        std::vector<double> vals;
        for (const auto& p : profiles) {
            if (p.empty()) continue;
            const auto [lo, hi] = profile_range(p, options.voltage_step);
            if (g < lo || g > hi) continue;
            const double s = profile_soc(p, v);
            vals.push_back(s);
            sum += s;
            ++n;
        }
        QocvPoint pt;
        pt.voltage = v;
        pt.n_contributing = n;
        if (n > 0) {
            pt.mean_soc = sum / static_cast<double>(n);
            double ss = 0.0;
            for (const double s : vals) ss += (s - pt.mean_soc) * (s - pt.mean_soc);
            pt.soc_std = std::sqrt(ss / static_cast<double>(n));
        }
        all.push_back(pt);
    }

    // Longest contiguous run of well-covered points.
    std::size_t best_begin = 0, best_len = 0;
    for (std::size_t k = 0; k < all.size();) {
        if (all[k].n_contributing < options.min_phases_per_point) {
            ++k;
            continue;
        }
        std::size_t m = k;
        while (m < all.size() && all[m].n_contributing >= options.min_phases_per_point) ++m;
        if (m - k > best_len) {
            best_len = m - k;
            best_begin = k;
        }
        k = m;
    }
    QocvCurve curve;
    curve.voltage_step = options.voltage_step;
    curve.phase_count = aligned.size();
    if (!aligned.empty()) curve.direction = aligned.front().direction;
    curve.grid.assign(all.begin() + static_cast<std::ptrdiff_t>(best_begin),
                      all.begin() + static_cast<std::ptrdiff_t>(best_begin + best_len));
    if (curve.grid.size() < 2) throw InsufficientPhases(aligned.size());

    // Partials entering and leaving the average can break monotonicity; restore it.
    std::vector<double> y, w;
    for (const auto& p : curve.grid) {
        y.push_back(p.mean_soc);
        w.push_back(static_cast<double>(p.n_contributing));
    }
    const std::vector<double> fit = isotonic_fit(y, w);
    for (std::size_t k = 0; k < fit.size(); ++k) {
        if (fit[k] != curve.grid[k].mean_soc) ++curve.monotone_adjustments;
        curve.grid[k].mean_soc = fit[k];
    }
    return curve;
}

double capacity_fade(const QocvCurve& a, const QocvCurve& b, double at_voltage) {
    return a.soc_at(at_voltage) - b.soc_at(at_voltage);
}

double common_top_voltage(const QocvCurve& a, const QocvCurve& b) {
    const double v = std::min(a.v_max(), b.v_max());
    if (v < std::max(a.v_min(), b.v_min())) throw VoltageOutOfRange(v);
    return v;
}

}  // namespace ocvtrack

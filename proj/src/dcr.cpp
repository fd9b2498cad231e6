#include "ocvtrack/dcr.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ocvtrack/stats.hpp"

namespace ocvtrack {

double estimate_dcr(const DcrPulse& p) {
    if (p.i2 == p.i1) throw ZeroCurrentDelta();
    return (p.v2 - p.v1) / (p.i2 - p.i1);
}

PulseDetector::PulseDetector(PulseOptions options, double one_c_current) : options_(options) {
    min_delta_ = options_.min_delta_i > 0.0 ? options_.min_delta_i : options_.min_delta_c * one_c_current;
    if (!(min_delta_ > 0.0)) throw ConfigError("pulse min_delta_i must be > 0");
    if (options_.min_hold_s > options_.max_hold_s) throw ConfigError("pulse min hold exceeds max hold");
}

void PulseDetector::close_hold() {
    if (holding_ && last_.t - step_.t >= options_.min_hold_s) {
        done_.push_back({step_.t, last_.t, pre_.v, last_.v, pre_.i, last_.i, pre_.soc, pre_.temp});
    }
    holding_ = false;
}

bool PulseDetector::try_start(const Sample& s) {
    if (recent_.size() < 2) return false;
    for (std::size_t k = recent_.size() - 1; k-- > 0;) {
        const Sample& p = recent_[k];
        if (std::fabs(s.i - p.i) < min_delta_) continue;
        bool pos = false, neg = false;
        for (std::size_t m = k; m < recent_.size(); ++m) {
            pos = pos || recent_[m].i > 0.0;
            neg = neg || recent_[m].i < 0.0;
        }
        if (pos && neg) continue;
        pre_ = p;
        step_ = s;
        last_ = s;
        delta_ = s.i - p.i;
        holding_ = true;
        return true;
    }
    return false;
}

void PulseDetector::push(const TelemetryRecord& r, double soc) {
    const Sample s{r.timestamp, r.voltage, r.current, soc, r.temperature};
    recent_.push_back(s);
    while (recent_.size() > 1 && s.t - recent_.front().t > options_.max_step_s) recent_.pop_front();

    if (holding_) {
        const bool level = std::fabs(s.i - step_.i) <= options_.hold_tolerance * std::fabs(delta_);
        const bool same_sign = s.i * pre_.i >= 0.0 && s.i * step_.i >= 0.0;
        if (level && same_sign && s.t - step_.t <= options_.max_hold_s) {
            last_ = s;
            if (s.t - step_.t == options_.max_hold_s) close_hold();
            return;
        }
        close_hold();
    }
    try_start(s);
}

void PulseDetector::mark_gap() {
    close_hold();
    recent_.clear();
}

void PulseDetector::finish() { close_hold(); }

std::vector<DcrPulse> PulseDetector::take() {
    std::vector<DcrPulse> out;
    out.swap(done_);
    return out;
}

std::vector<DcrPulse> detect_pulses(const std::vector<StreamItem>& stream, const std::vector<double>& soc,
                                    PulseOptions options, double one_c_current) {
    PulseDetector det(options, one_c_current);
    std::size_t k = 0;
    for (const auto& item : stream) {
        if (std::holds_alternative<GapMarker>(item)) {
            det.mark_gap();
            continue;
        }
        if (k >= soc.size()) throw DataError("detect_pulses: SOC series shorter than stream");
        det.push(std::get<TelemetryRecord>(item), soc[k++]);
    }
    det.finish();
    return det.take();
}

std::size_t bin_index(const std::vector<double>& edges, double value) {
    const std::size_t bins = edges.size() - 1;
    if (value <= edges.front()) return 0;
    if (value >= edges.back()) return bins - 1;
    const auto it = std::upper_bound(edges.begin(), edges.end(), value);
    return static_cast<std::size_t>(it - edges.begin()) - 1;
}

static void validate_edges(const std::vector<double>& edges, const char* name) {
    if (edges.size() < 2) throw ConfigError(std::string(name) + " needs at least two edges");
    for (std::size_t i = 1; i < edges.size(); ++i)
        if (!(edges[i] > edges[i - 1])) throw ConfigError(std::string(name) + " must be strictly increasing");
}

DcrTable::DcrTable(std::vector<double> soc_edges, std::vector<double> temp_edges, std::vector<DcrCell> cells,
                   std::size_t min_samples, Instant valid_from, Instant valid_to)
    : soc_edges_(std::move(soc_edges)),
      temp_edges_(std::move(temp_edges)),
      cells_(std::move(cells)),
      min_samples_(min_samples),
      valid_from_(valid_from),
      valid_to_(valid_to) {
    validate_edges(soc_edges_, "soc_edges");
    validate_edges(temp_edges_, "temp_edges");
    if (cells_.size() != soc_bins() * temp_bins()) throw DataError("DCR table cell count does not match edges");
    fill();
}

const DcrCell& DcrTable::cell(std::size_t i, std::size_t j) const { return cells_.at(i * temp_bins() + j); }

bool DcrTable::reported(std::size_t i, std::size_t j) const {
    const DcrCell& c = cell(i, j);
    return c.sample_count >= min_samples_ && c.sample_count > 0 && c.median_dcr > 0.0;
}

void DcrTable::fill() {
    const std::size_t ns = soc_bins(), nt = temp_bins();
    filled_.assign(ns * nt, 0.0);
    filled_flag_.assign(ns * nt, 0);
    bool any = false;
    for (std::size_t i = 0; i < ns; ++i)
        for (std::size_t j = 0; j < nt; ++j) any = any || reported(i, j);
    if (!any) throw EmptyTable();
    for (std::size_t i = 0; i < ns; ++i) {
        for (std::size_t j = 0; j < nt; ++j) {
            if (reported(i, j)) {
                filled_[i * nt + j] = cell(i, j).median_dcr;
                continue;
            }
            long best = std::numeric_limits<long>::max();
            double value = 0.0;
            for (std::size_t a = 0; a < ns; ++a) {
                for (std::size_t b = 0; b < nt; ++b) {
                    if (!reported(a, b)) continue;
                    const long di = static_cast<long>(a) - static_cast<long>(i);
                    const long dj = static_cast<long>(b) - static_cast<long>(j);
                    const long d2 = di * di + dj * dj;
                    if (d2 < best) {
                        best = d2;
                        value = cell(a, b).median_dcr;
                    }
                }
            }
            filled_[i * nt + j] = value;
            filled_flag_[i * nt + j] = 1;
        }
    }
}

namespace {

struct AxisPos {
    std::size_t lo, hi;
    double w;  // weight of hi
};

AxisPos locate_center(const std::vector<double>& edges, double x) {
    const std::size_t n = edges.size() - 1;
    auto center = [&](std::size_t k) { return 0.5 * (edges[k] + edges[k + 1]); };
    if (n == 1 || x <= center(0)) return {0, 0, 0.0};
    if (x >= center(n - 1)) return {n - 1, n - 1, 0.0};
    std::size_t k = 0;
    while (k + 1 < n && center(k + 1) <= x) ++k;
    const double c0 = center(k), c1 = center(k + 1);
    return {k, k + 1, (x - c0) / (c1 - c0)};
}

}  // namespace

DcrLookup DcrTable::lookup(double soc, double temp) const {
    const AxisPos ps = locate_center(soc_edges_, soc);
    const AxisPos pt = locate_center(temp_edges_, temp);
    const std::size_t nt = temp_bins();
    const std::size_t is[2] = {ps.lo, ps.hi};
    const std::size_t js[2] = {pt.lo, pt.hi};
    const double ws[2] = {1.0 - ps.w, ps.w};
    const double wt[2] = {1.0 - pt.w, pt.w};
    DcrLookup out;
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            const double w = ws[a] * wt[b];
            if (w == 0.0) continue;
            const std::size_t idx = is[a] * nt + js[b];
            out.ohms += w * filled_[idx];
            out.extrapolated = out.extrapolated || filled_flag_[idx] != 0;
        }
    }
    return out;
}

static double median_of(std::vector<double>& v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

DcrTable build_table(const std::vector<DcrPulse>& pulses, Instant valid_from, Instant valid_to,
                     const DcrTableOptions& options, DcrTableTally* tally) {
    validate_edges(options.soc_edges, "soc_edges");
    validate_edges(options.temp_edges, "temp_edges");
    if (options.min_samples < 1) throw ConfigError("min_samples must be >= 1");
    const std::size_t ns = options.soc_edges.size() - 1, nt = options.temp_edges.size() - 1;
    std::vector<std::vector<double>> values(ns * nt);
    DcrTableTally local;
    for (const auto& p : pulses) {
        if (p.t_start < valid_from || p.t_start >= valid_to) {
            ++local.outside_period;
            continue;
        }
        double r = 0.0;
        try {
            r = estimate_dcr(p);
        } catch (const ZeroCurrentDelta&) {
            ++local.zero_current_delta;
            continue;
        }
        if (!(r > 0.0) || !std::isfinite(r)) {
            ++local.negative_resistance;
            continue;
        }
        ++local.accepted;
        const std::size_t i = bin_index(options.soc_edges, p.soc_at_pulse);
        const std::size_t j = bin_index(options.temp_edges, p.temp_at_pulse);
        values[i * nt + j].push_back(r);
    }
    if (tally) *tally = local;
    std::vector<DcrCell> cells(ns * nt);
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (values[k].empty()) continue;
        cells[k].sample_count = values[k].size();
        cells[k].median_dcr = median_of(values[k]);
    }
    return DcrTable(options.soc_edges, options.temp_edges, std::move(cells), options.min_samples, valid_from,
                    valid_to);
}

void to_json(nlohmann::json& j, const DcrTable& t) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < t.soc_bins(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t k = 0; k < t.temp_bins(); ++k) {
            const DcrCell& c = t.cell(i, k);
            nlohmann::json cell = {{"n", c.sample_count}};
            cell["dcr_ohm"] = t.reported(i, k) ? nlohmann::json(c.median_dcr) : nlohmann::json(nullptr);
            row.push_back(cell);
        }
        rows.push_back(row);
    }
    j = {{"soc_edges", t.soc_edges()},
         {"temp_edges", t.temp_edges()},
         {"min_samples", t.min_samples()},
         {"cells", rows},
         {"period", {{"start", format_rfc3339(t.valid_from())}, {"end", format_rfc3339(t.valid_to())}}}};
}

DcrTable dcr_table_from_json(const nlohmann::json& j) {
    auto soc_edges = j.at("soc_edges").get<std::vector<double>>();
    auto temp_edges = j.at("temp_edges").get<std::vector<double>>();
    const std::size_t min_samples = j.value("min_samples", std::size_t{5});
    std::vector<DcrCell> cells;
    for (const auto& row : j.at("cells")) {
        for (const auto& c : row) {
            DcrCell cell;
            cell.sample_count = c.at("n").get<std::size_t>();
            if (!c.at("dcr_ohm").is_null()) cell.median_dcr = c.at("dcr_ohm").get<double>();
            cells.push_back(cell);
        }
    }
    const auto from = parse_rfc3339(j.at("period").at("start").get<std::string>());
    const auto to = parse_rfc3339(j.at("period").at("end").get<std::string>());
    if (!from || !to) throw DataError("bad DCR table period");
    return DcrTable(std::move(soc_edges), std::move(temp_edges), std::move(cells), min_samples, *from, *to);
}

double trend_gradient(const std::vector<double>& years, const std::vector<double>& relative_pct) {
    return least_squares(years, relative_pct).slope;
}

DcrTrend fit_trend(const std::vector<DcrTable>& yearly, Range soc_range, Range temp_range) {
    if (yearly.empty()) throw InsufficientYears();
    const DcrTable& ref = yearly.front();
    auto inside = [](const std::vector<double>& e, std::size_t k, Range r) {
        return e[k] >= r.lo && e[k + 1] <= r.hi;
    };
    std::vector<const DcrTable*> usable;
    for (const auto& t : yearly) {
        if (t.soc_edges() != ref.soc_edges() || t.temp_edges() != ref.temp_edges())
            throw DataError("fit_trend: tables use different bin edges");
        bool any = false;
        for (std::size_t i = 0; i < t.soc_bins(); ++i)
            for (std::size_t k = 0; k < t.temp_bins(); ++k)
                any = any || (inside(t.soc_edges(), i, soc_range) && inside(t.temp_edges(), k, temp_range) &&
                              t.reported(i, k));
        if (any) usable.push_back(&t);
    }
    if (usable.size() < 2) throw InsufficientYears();
    std::sort(usable.begin(), usable.end(),
              [](const DcrTable* a, const DcrTable* b) { return a->valid_from() < b->valid_from(); });

    std::vector<std::pair<std::size_t, std::size_t>> common;
    for (std::size_t i = 0; i < ref.soc_bins(); ++i) {
        if (!inside(ref.soc_edges(), i, soc_range)) continue;
        for (std::size_t k = 0; k < ref.temp_bins(); ++k) {
            if (!inside(ref.temp_edges(), k, temp_range)) continue;
            bool all = true;
            for (const DcrTable* t : usable) all = all && t->reported(i, k);
            if (all) common.emplace_back(i, k);
        }
    }
    if (common.empty()) throw InsufficientYears();

    DcrTrend trend;
    trend.soc_range = soc_range;
    trend.temp_range = temp_range;
    trend.cells_used = common.size();
    std::vector<double> means, years;
    const double y0 = decimal_year(usable.front()->valid_from());
    for (const DcrTable* t : usable) {
        double sum = 0.0;
        for (const auto& [i, k] : common) sum += t->cell(i, k).median_dcr;
        means.push_back(sum / static_cast<double>(common.size()));
        years.push_back(decimal_year(t->valid_from()) - y0);
        trend.year_starts.push_back(t->valid_from());
    }
    for (const double m : means) trend.relative_pct.push_back(m / means.front() * 100.0);
    trend.gradient_pp_per_year = trend_gradient(years, trend.relative_pct);
    return trend;
}

}  // namespace ocvtrack

#include "ocvtrack/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>

#include "ocvtrack/io.hpp"

namespace ocvtrack::sim {

namespace {

constexpr double kPi = 3.14159265358979323846;

}  // namespace

double OcvPreset::ic(double v, const std::vector<double>& peak_scale) const {
    if (v <= v_low || v >= v_high) return 0.0;
    double y = baseline * (1.0 - std::exp(-(v - v_low) / edge_v)) * (1.0 - std::exp(-3.0 * (v_high - v) / edge_v));
    for (std::size_t k = 0; k < peaks.size(); ++k) {
        const double scale = k < peak_scale.size() ? peak_scale[k] : 1.0;
        const double z = (v - peaks[k].centre_v) / peaks[k].width_v;
        y += scale * peaks[k].amplitude * std::exp(-0.5 * z * z);
    }
    return y;
}

OcvPreset ocv_preset(Chemistry chemistry) {
    OcvPreset p;
    switch (chemistry) {
        case Chemistry::LmoNmcBlend:
            p.v_low = 3.40;
            p.v_high = 4.15;
            p.baseline = 35.0;
            p.edge_v = 0.03;
            p.peaks = {{3.50, 190.0, 0.025}, {3.64, 230.0, 0.042}, {3.84, 190.0, 0.026}, {4.00, 210.0, 0.055}};
            break;
        case Chemistry::Nmc:
            p.v_low = 3.30;
            p.v_high = 4.10;
            p.baseline = 25.0;
            p.edge_v = 0.03;
            p.peaks = {{3.45, 60.0, 0.04}, {3.60, 330.0, 0.045}, {3.74, 150.0, 0.035}, {3.90, 150.0, 0.04},
                       {4.04, 90.0, 0.03}};
            break;
        case Chemistry::Lfp:
            p.v_low = 3.00;
            p.v_high = 3.45;
            p.baseline = 15.0;
            p.edge_v = 0.02;
            p.peaks = {{3.20, 150.0, 0.02}, {3.29, 1500.0, 0.012}, {3.33, 900.0, 0.008}};
            break;
    }
    return p;
}

OcvCurve::OcvCurve(double soc_step, std::vector<double> volts) : step_(soc_step), volts_(std::move(volts)) {
    if (!(step_ > 0.0) || volts_.size() < 2) throw ConfigOutOfRange("OCV table needs two points and a positive step");
    for (std::size_t k = 1; k < volts_.size(); ++k)
        if (!(volts_[k] > volts_[k - 1])) throw ConfigOutOfRange("OCV table must be strictly increasing");
}

OcvCurve OcvCurve::linear(double v0, double v1, double soc_max, double soc_step) {
    const auto n = static_cast<std::size_t>(std::llround(soc_max / soc_step));
    std::vector<double> v(n + 1);
    for (std::size_t k = 0; k <= n; ++k) v[k] = v0 + (v1 - v0) * static_cast<double>(k) / static_cast<double>(n);
    return OcvCurve(soc_max / static_cast<double>(n), std::move(v));
}

double OcvCurve::voltage(double soc) const {
    const double pos = soc / step_;
    if (pos <= 0.0) return volts_.front();
    const auto last = static_cast<double>(volts_.size() - 1);
    if (pos >= last) return volts_.back();
    const auto k = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(k);
    return volts_[k] + f * (volts_[k + 1] - volts_[k]);
}

double OcvCurve::soc_at(double v) const {
    if (v <= volts_.front()) return 0.0;
    if (v >= volts_.back()) return soc_max();
    const auto it = std::upper_bound(volts_.begin(), volts_.end(), v);
    const auto k = static_cast<std::size_t>(it - volts_.begin()) - 1;
    const double f = (v - volts_[k]) / (volts_[k + 1] - volts_[k]);
    return (static_cast<double>(k) + f) * step_;
}

namespace {

// Cumulative charge over a fine voltage grid, percent of the unscaled total.
struct ChargeTable {
    std::vector<double> v;
    std::vector<double> q;

    double total() const { return q.back(); }

    double voltage_at(double charge) const {
        if (charge <= 0.0) return v.front();
        if (charge >= q.back()) return v.back();
        const auto it = std::upper_bound(q.begin(), q.end(), charge);
        const auto k = static_cast<std::size_t>(it - q.begin()) - 1;
        const double f = (charge - q[k]) / (q[k + 1] - q[k]);
        return v[k] + f * (v[k + 1] - v[k]);
    }
};

ChargeTable charge_table(const OcvPreset& p, const std::vector<double>& scale) {
    constexpr double dv = 0.0002;
    const auto n = static_cast<std::size_t>(std::ceil((p.v_high - p.v_low) / dv));
    const double step = (p.v_high - p.v_low) / static_cast<double>(n);
    std::vector<double> raw(n + 1), fresh(n + 1);
    const std::vector<double> ones;
    for (std::size_t k = 0; k <= n; ++k) {
        const double v = p.v_low + step * static_cast<double>(k);
        raw[k] = p.ic(v, scale);
        fresh[k] = p.ic(v, ones);
    }
    double fresh_total = 0.0;
    for (std::size_t k = 1; k <= n; ++k) fresh_total += 0.5 * (fresh[k] + fresh[k - 1]) * step;
    ChargeTable t;
    t.v.resize(n + 1);
    t.q.resize(n + 1);
    double acc = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
        if (k) acc += 0.5 * (raw[k] + raw[k - 1]) * step;
        t.v[k] = p.v_low + step * static_cast<double>(k);
        t.q[k] = acc / fresh_total * 100.0;
    }
    // Peaks scaled to zero leave flat stretches only where the baseline is
    // also zero, i.e. at the very ends; nudge them to keep q strictly rising.
    for (std::size_t k = 1; k <= n; ++k)
        if (!(t.q[k] > t.q[k - 1])) t.q[k] = std::nextafter(t.q[k - 1], 1e300);
    return t;
}

OcvCurve tabulate(const std::function<double(double)>& f, double soc_max, double target_step) {
    const auto n = static_cast<std::size_t>(std::ceil(soc_max / target_step - 1e-9));
    const double step = soc_max / static_cast<double>(n);
    std::vector<double> v(n + 1);
    for (std::size_t k = 0; k <= n; ++k) v[k] = f(step * static_cast<double>(k));
    return OcvCurve(step, std::move(v));
}

}  // namespace

OcvCurve integrate_preset(const OcvPreset& preset, const std::vector<double>& peak_scale, double soc_step) {
    const ChargeTable t = charge_table(preset, peak_scale);
    return tabulate([&](double s) { return t.voltage_at(s); }, t.total(), soc_step);
}

DcrSurface::DcrSurface(std::vector<double> soc, std::vector<double> temp, std::vector<double> ohms)
    : soc_(std::move(soc)), temp_(std::move(temp)), ohms_(std::move(ohms)) {
    if (soc_.empty() || temp_.empty() || ohms_.size() != soc_.size() * temp_.size())
        throw ConfigOutOfRange("DCR surface grid does not match its values");
    for (const double r : ohms_)
        if (!(r > 0.0)) throw ConfigOutOfRange("DCR surface must be positive everywhere");
}

DcrSurface DcrSurface::reference() {
    std::vector<double> soc, temp, ohms;
    for (int s = 0; s <= 100; s += 5) soc.push_back(s);
    for (int t = -20; t <= 60; t += 5) temp.push_back(t);
    for (const double s : soc)
        for (const double t : temp)
            ohms.push_back(0.005 * (1.0 + 0.3416 * std::exp(-s / 12.0)) * (1.0 + 0.3416 * std::exp(-t / 8.0)));
    return DcrSurface(std::move(soc), std::move(temp), std::move(ohms));
}

DcrSurface DcrSurface::constant(double ohms) { return DcrSurface({0.0}, {0.0}, {ohms}); }

namespace {

// Index and fraction of x between grid nodes, clamped.
std::pair<std::size_t, double> locate_node(const std::vector<double>& nodes, double x) {
    if (nodes.size() == 1 || x <= nodes.front()) return {0, 0.0};
    if (x >= nodes.back()) return {nodes.size() - 2, 1.0};
    const auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    const auto k = static_cast<std::size_t>(it - nodes.begin()) - 1;
    return {k, (x - nodes[k]) / (nodes[k + 1] - nodes[k])};
}

}  // namespace

double DcrSurface::at(double soc, double temp) const {
    if (ohms_.size() == 1) return ohms_[0];
    const std::size_t nt = temp_.size();
    const auto [i, fs] = locate_node(soc_, soc);
    const auto [j, ft] = locate_node(temp_, temp);
    const std::size_t i1 = soc_.size() == 1 ? i : i + 1;
    const std::size_t j1 = nt == 1 ? j : j + 1;
    const double r00 = ohms_[i * nt + j], r01 = ohms_[i * nt + j1];
    const double r10 = ohms_[i1 * nt + j], r11 = ohms_[i1 * nt + j1];
    return (1 - fs) * ((1 - ft) * r00 + ft * r01) + fs * ((1 - ft) * r10 + ft * r11);
}

SimBattery make_battery(Chemistry chemistry, int cells_series, double nominal_capacity_ah,
                        const Degradation& degradation, DcrSurface dcr) {
    if (cells_series < 1) throw ConfigOutOfRange("cells_series must be at least 1");
    if (!(nominal_capacity_ah > 0.0)) throw ConfigOutOfRange("capacity must be positive");
    SimBattery b;
    b.chemistry = chemistry;
    b.cells_series = cells_series;
    b.nominal_capacity_ah = nominal_capacity_ah;
    b.preset = ocv_preset(chemistry);
    b.degradation = degradation;
    b.base_dcr = std::move(dcr);
    b.fresh_ocv = integrate_preset(b.preset, {});
    return age(b, 0.0);
}

SimBattery make_custom_battery(OcvCurve ocv, int cells_series, double nominal_capacity_ah, DcrSurface dcr) {
    if (cells_series < 1) throw ConfigOutOfRange("cells_series must be at least 1");
    if (!(nominal_capacity_ah > 0.0)) throw ConfigOutOfRange("capacity must be positive");
    SimBattery b;
    b.cells_series = cells_series;
    b.nominal_capacity_ah = nominal_capacity_ah;
    b.fresh_ocv = ocv;
    b.ocv = std::move(ocv);
    b.usable_pct = b.ocv.soc_max();
    b.base_dcr = std::move(dcr);
    return b;
}

SimBattery age(const SimBattery& battery, double years) {
    if (!(years >= 0.0)) throw ConfigOutOfRange("age must be non-negative");
    SimBattery b = battery;
    years += battery.age_years;
    b.age_years = years;
    const Degradation& d = b.degradation;
    const double g = d.dcr_growth_pct_per_year / 100.0;
    b.dcr_factor = d.dcr_growth == DcrGrowth::Compounded ? std::pow(1.0 + g, years) : 1.0 + g * years;
    if (!(b.dcr_factor > 0.0)) throw DegradationExceedsCapacity("DCR growth drives the resistance to zero");
    if (b.preset.peaks.empty()) {
        // Custom curve: only resistance ageing applies.
        if (d.lli_shift_pp_per_year != 0.0 || d.capacity_fade_pp_per_year != 0.0 || !d.lam_peak_loss_per_year.empty())
            throw ConfigOutOfRange("custom OCV batteries support DCR growth only");
        return b;
    }

    std::vector<double> scale(b.preset.peaks.size(), 1.0);
    for (std::size_t k = 0; k < scale.size() && k < d.lam_peak_loss_per_year.size(); ++k)
        scale[k] = std::max(0.0, 1.0 - d.lam_peak_loss_per_year[k] * years);
    const ChargeTable base = charge_table(b.preset, scale);
    const double domain = base.total();
    const double lli = d.lli_shift_pp_per_year * years;
    const double fade = std::max(d.capacity_fade_pp_per_year * years, 100.0 - domain + lli);
    const double usable = 100.0 - fade;
    if (lli < 0.0 || usable <= 10.0 || lli >= domain)
        throw DegradationExceedsCapacity("degradation after " + std::to_string(years) + " years leaves " +
                                         std::to_string(usable) + " % usable capacity");
    const double top_loss = domain - lli - usable;
    const double bottom_tail = std::min(lli, 3.0);
    const double top_tail = std::min(top_loss, 3.0);
    const double v_bottom = base.voltage_at(0.0);
    const double v_top = base.voltage_at(domain);

    auto aged = [&](double s) {
        if (bottom_tail > 0.0 && s < bottom_tail)
            return v_bottom + (base.voltage_at(bottom_tail + lli) - v_bottom) * s / bottom_tail;
        if (top_tail > 0.0 && s > usable - top_tail) {
            const double a = base.voltage_at(usable - top_tail + lli);
            return a + (v_top - a) * (s - (usable - top_tail)) / top_tail;
        }
        return base.voltage_at(s + lli);
    };
    b.ocv = tabulate(aged, usable, 0.01);
    b.usable_pct = usable;
    return b;
}

SimBattery default_battery(Chemistry chemistry, const Degradation& degradation) {
    switch (chemistry) {
        case Chemistry::LmoNmcBlend: return make_battery(chemistry, 14, 40.0, degradation);
        case Chemistry::Nmc: return make_battery(chemistry, 14, 60.0, degradation);
        case Chemistry::Lfp: return make_battery(chemistry, 16, 100.0, degradation);
    }
    throw ConfigOutOfRange("unknown chemistry");
}

SystemConfig system_config_for(const SimBattery& battery, const std::string& system_id) {
    SystemConfig c;
    c.system_id = system_id;
    c.chemistry = battery.chemistry;
    c.nominal_capacity_ah = battery.nominal_capacity_ah;
    c.cell_count_series = battery.cells_series;
    c.nominal_voltage = battery.cells_series * battery.fresh_ocv.voltage(50.0);
    c.eoc_voltage = battery.cells_series * (battery.fresh_ocv.v_max() - 0.005);
    c.eoc_taper_current = 0.025 * battery.nominal_capacity_ah;
    c.eod_voltage = {{0, battery.cells_series * battery.fresh_ocv.v_min()}};
    return c;
}

void LoadScenario::validate() const {
    if (days < 1) throw ConfigOutOfRange("scenario needs at least one day");
    if (!(initial_soc >= 0.0 && initial_soc <= 100.0)) throw ConfigOutOfRange("initial SOC outside [0, 100]");
    if (noise_v < 0.0 || noise_i < 0.0 || noise_t < 0.0) throw ConfigOutOfRange("noise must be non-negative");
    if (!(charge_limit_c > 0.0) || !(termination_c > 0.0) || termination_c >= charge_limit_c)
        throw ConfigOutOfRange("charger limits invalid");
    if (pulse_c_high < pulse_c_low || pulse_hold_high_s < pulse_hold_low_s || pulse_hold_low_s < 1)
        throw ConfigOutOfRange("pulse ranges invalid");
    if (spike_len_high_s < spike_len_low_s || spike_len_low_s < 1) throw ConfigOutOfRange("spike ranges invalid");
    if (cloudy_fraction < 0.0 || cloudy_fraction > 1.0) throw ConfigOutOfRange("cloudy fraction outside [0, 1]");
    for (const auto& seg : programmed)
        if (seg.to <= seg.from) throw ConfigOutOfRange("programmed segment is empty");
}

nlohmann::json to_json(const LoadScenario& s) {
    nlohmann::json prog = nlohmann::json::array();
    for (const auto& seg : s.programmed) prog.push_back({{"from", seg.from}, {"to", seg.to}, {"current_a", seg.current_a}});
    nlohmann::json j = {{"start", format_rfc3339(s.start)},
                        {"days", s.days},
                        {"initial_soc_pct", s.initial_soc},
                        {"household", s.household},
                        {"programmed", prog},
                        {"pv_peak_c", s.pv_peak_c},
                        {"cloudy_fraction", s.cloudy_fraction},
                        {"base_load_c", s.base_load_c},
                        {"appliance_pulses_per_night", s.appliance_pulses_per_night},
                        {"pulse_c", {s.pulse_c_low, s.pulse_c_high}},
                        {"pulse_hold_s", {s.pulse_hold_low_s, s.pulse_hold_high_s}},
                        {"spikes_per_day", s.spikes_per_day},
                        {"spike_c", s.spike_c},
                        {"spike_len_s", {s.spike_len_low_s, s.spike_len_high_s}},
                        {"charge_limit_c", s.charge_limit_c},
                        {"termination_c", s.termination_c},
                        {"temperature_c", {{"mean", s.temp_mean}, {"seasonal", s.temp_seasonal}, {"daily", s.temp_daily}}},
                        {"noise", {{"voltage_v", s.noise_v}, {"current_a", s.noise_i}, {"temperature_c", s.noise_t}}}};
    if (s.constant_temperature) j["temperature_c"]["constant"] = *s.constant_temperature;
    return j;
}

namespace {

// Portable variates: the standard distributions are implementation-defined,
// these are not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int integer(int lo, int hi) { return lo + static_cast<int>(uniform() * (hi - lo + 1)); }
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * kPi * u2);
        have_spare_ = true;
        return r * std::cos(2.0 * kPi * u2);
    }

private:
    std::mt19937_64 eng_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

struct LoadBurst {
    int start = 0;  // second of day
    int length = 0;
    double amps = 0.0;
    bool spike = false;
};

struct CloudStep {
    int start = 0;
    double factor = 1.0;
};

struct DayPlan {
    Instant midnight = 0;
    double sunrise = 0.0;  // seconds of day
    double sunset = 0.0;
    bool cloudy = false;
    std::vector<CloudStep> clouds;
    std::vector<LoadBurst> bursts;  // sorted, non-overlapping
};

}  // namespace

struct Generator::State {
    SimBattery battery;
    LoadScenario scenario;
    Rng rng;
    EventLog log;
    std::uint64_t seed = 0;

    Instant t = 0;
    Instant end = 0;
    double charge_ah = 0.0;  // from empty
    bool full = false;
    bool empty = false;
    DayPlan day;
    std::size_t burst_cursor = 0;
    std::size_t cloud_cursor = 0;
    double one_c = 0.0;
    double phase1 = 0.0;
    double phase2 = 0.0;
    double prev_current = 0.0;
    bool prev_limited = false;
    Instant open_until = -1;  // first sample after the burst being logged
    bool open_is_spike = false;
    std::size_t open_event = 0;

    State(SimBattery b, LoadScenario s, std::uint64_t sd)
        : battery(std::move(b)), scenario(std::move(s)), rng(sd), seed(sd) {}

    double capacity() const { return battery.capacity_ah(); }
    double soc() const { return charge_ah / capacity() * 100.0; }
    double nominal_soc() const { return charge_ah / battery.nominal_capacity_ah * 100.0; }

    double temperature(Instant at) const {
        if (scenario.constant_temperature) return *scenario.constant_temperature;
        const double doy = day_of_year(at);
        const double hour = static_cast<double>(((at % 86400) + 86400) % 86400) / 3600.0;
        return scenario.temp_mean + scenario.temp_seasonal * std::cos(2.0 * kPi * (doy - 200.0) / 365.0) +
               scenario.temp_daily * std::sin(2.0 * kPi * (hour - 9.0) / 24.0);
    }

    bool in_night(const DayPlan& d, int sec) const { return sec < d.sunrise - 1800.0 || sec >= d.sunset + 1800.0; }

    void plan_day(Instant midnight) {
        day = DayPlan{};
        day.midnight = midnight;
        burst_cursor = 0;
        cloud_cursor = 0;
        const double doy = day_of_year(midnight);
        const double length_h = 12.0 + 4.0 * std::cos(2.0 * kPi * (doy - 172.0) / 365.0);
        day.sunrise = (12.0 - 0.5 * length_h) * 3600.0;
        day.sunset = (12.0 + 0.5 * length_h) * 3600.0;
        day.cloudy = rng.uniform() < scenario.cloudy_fraction;
        if (day.cloudy) {
            int at = static_cast<int>(day.sunrise);
            while (at < day.sunset) {
                day.clouds.push_back({at, rng.uniform(0.15, 0.9)});
                at += rng.integer(30, 300);
            }
        }
        // Bursts go into the dark hours, spaced so every edge has a clean hold.
        std::vector<LoadBurst> wanted;
        auto draw_start = [&]() {
            while (true) {
                const int sec = rng.integer(60, 86400 - 120);
                if (in_night(day, sec) && in_night(day, sec + 60)) return sec;
            }
        };
        for (int k = 0; k < scenario.appliance_pulses_per_night; ++k) {
            LoadBurst b;
            b.start = draw_start();
            b.length = rng.integer(scenario.pulse_hold_low_s, scenario.pulse_hold_high_s);
            b.amps = rng.uniform(scenario.pulse_c_low, scenario.pulse_c_high) * one_c;
            wanted.push_back(b);
        }
        for (int k = 0; k < scenario.spikes_per_day; ++k) {
            LoadBurst b;
            b.start = draw_start();
            b.length = rng.integer(scenario.spike_len_low_s, scenario.spike_len_high_s);
            b.amps = scenario.spike_c * one_c;
            b.spike = true;
            wanted.push_back(b);
        }
        std::stable_sort(wanted.begin(), wanted.end(),
                         [](const LoadBurst& a, const LoadBurst& b) { return a.start < b.start; });
        int free_from = 0;
        for (auto& b : wanted) {
            if (b.start < free_from) continue;
            day.bursts.push_back(b);
            free_from = b.start + b.length + 30;
        }
    }

    double pv(int sec) {
        if (sec <= day.sunrise || sec >= day.sunset) return 0.0;
        const double clear =
            scenario.pv_peak_c * one_c * std::sin(kPi * (sec - day.sunrise) / (day.sunset - day.sunrise));
        if (!day.cloudy) return clear;
        while (cloud_cursor + 1 < day.clouds.size() && day.clouds[cloud_cursor + 1].start <= sec) ++cloud_cursor;
        const double f = day.clouds.empty() || sec < day.clouds.front().start ? 1.0 : day.clouds[cloud_cursor].factor;
        return clear * f;
    }

    double base_load(Instant at) const {
        const double x = static_cast<double>(at);
        return scenario.base_load_c * one_c *
               (1.0 + 0.15 * std::sin(2.0 * kPi * x / 5400.0 + phase1) + 0.10 * std::sin(2.0 * kPi * x / 1800.0 + phase2));
    }

    // Active burst at `sec`, if any.
    const LoadBurst* burst_at(int sec) {
        while (burst_cursor < day.bursts.size() &&
               day.bursts[burst_cursor].start + day.bursts[burst_cursor].length <= sec)
            ++burst_cursor;
        if (burst_cursor < day.bursts.size() && day.bursts[burst_cursor].start <= sec) return &day.bursts[burst_cursor];
        return nullptr;
    }

    double requested_current(Instant at, const LoadBurst** burst) {
        *burst = nullptr;
        if (!scenario.household) {
            double i = 0.0;
            for (const auto& seg : scenario.programmed)
                if (at >= seg.from && at < seg.to) i += seg.current_a;
            return i;
        }
        const int sec = static_cast<int>(at - day.midnight);
        *burst = burst_at(sec);
        double net = pv(sec) - base_load(at);
        if (*burst) net -= (*burst)->amps;
        return net;
    }
};

Generator::Generator(SimBattery battery, LoadScenario scenario, std::uint64_t seed)
    : s_(std::make_unique<State>(std::move(battery), std::move(scenario), seed)) {
    s_->scenario.validate();
    s_->t = s_->scenario.start;
    s_->end = s_->scenario.start + static_cast<Instant>(s_->scenario.days) * 86400;
    s_->one_c = s_->battery.nominal_capacity_ah;
    s_->charge_ah = s_->scenario.initial_soc / 100.0 * s_->capacity();
    s_->phase1 = s_->rng.uniform(0.0, 2.0 * kPi);
    s_->phase2 = s_->rng.uniform(0.0, 2.0 * kPi);
    s_->plan_day(s_->t - ((s_->t % 86400) + 86400) % 86400);
}

Generator::~Generator() = default;

const EventLog& Generator::events() const { return s_->log; }
const SimBattery& Generator::battery() const { return s_->battery; }

bool Generator::next(SimSample& out) {
    State& s = *s_;
    if (s.t >= s.end) return false;
    if (s.t >= s.day.midnight + 86400) s.plan_day(s.day.midnight + 86400);

    const SimBattery& b = s.battery;
    const double cells = b.cells_series;
    const double temp = s.temperature(s.t);
    const double ocv = b.ocv_cell(s.nominal_soc());
    const double r = b.dcr(s.soc(), temp);
    const double idle = 0.01 * s.one_c;
    const LoadBurst* burst = nullptr;
    const double req = s.requested_current(s.t, &burst);

    double current = 0.0;
    bool limited = false;
    if (req > 0.0 && s.full) {
        limited = req > idle;
    } else if (req < 0.0 && s.empty) {
        limited = req < -idle;
    } else if (req > 0.0) {
        s.empty = false;
        const double v_cv = cells * b.v_full() + s.scenario.termination_c * s.one_c * r;
        const double i_cv = (v_cv - cells * ocv) / r;
        const double i_cc = s.scenario.charge_limit_c * s.one_c;
        current = std::min({req, i_cc, i_cv});
        limited = current < req;
        if (i_cv <= s.scenario.termination_c * s.one_c * 1.05 && req >= i_cv) {
            s.full = true;
            s.charge_ah = s.capacity();
            s.log.full_charges.push_back(s.t);
            current = 0.0;
        }
    } else if (req < 0.0) {
        s.full = false;
        const double eod = cells * b.v_empty();
        const double i_clip = -(cells * ocv - eod) / r;
        current = std::max(req, i_clip);
        limited = current > req;
        if (s.soc() <= 0.5 || (limited && -current < s.scenario.termination_c * s.one_c)) {
            s.empty = true;
            s.log.empties.push_back(s.t);
            current = 0.0;
            limited = true;
        }
    }

    // Burst edges are logged from the realised stream; an edge is void when
    // a charge or discharge limit touched the burst.
    const int sec = static_cast<int>(s.t - s.day.midnight);
    if (burst && sec == burst->start) {
        PulseEvent on;
        on.step_at = s.t;
        on.hold_end = s.t + burst->length - 1;
        on.current_before = s.prev_current;
        on.current_after = current;
        on.dcr = r;
        on.soc = s.soc();
        on.temperature = temp;
        on.effective = !limited && !s.prev_limited;
        if (burst->spike) {
            s.log.spikes.push_back({s.t, s.t + burst->length, burst->amps, on.effective});
            s.open_is_spike = true;
            s.open_event = s.log.spikes.size() - 1;
        } else {
            s.log.pulses.push_back(on);
            s.open_is_spike = false;
            s.open_event = s.log.pulses.size() - 1;
        }
        s.open_until = s.t + burst->length;
    } else if (burst && limited) {
        if (s.open_is_spike)
            s.log.spikes[s.open_event].effective = false;
        else
            s.log.pulses[s.open_event].effective = false;
    }
    if (s.open_until == s.t) {
        s.open_until = -1;
        if (!s.open_is_spike) {
            PulseEvent off;
            off.step_at = s.t;
            off.hold_end = s.t + 9;
            off.current_before = s.prev_current;
            off.current_after = current;
            off.dcr = r;
            off.soc = s.soc();
            off.temperature = temp;
            off.effective = s.log.pulses[s.open_event].effective && !limited;
            s.log.pulses.push_back(off);
        } else if (limited) {
            s.log.spikes[s.open_event].effective = false;
        }
    }
    s.prev_current = current;
    s.prev_limited = limited;

    const double v = cells * ocv + current * r;
    out.truth = {s.t, s.soc(), s.nominal_soc(), current, ocv, r, temp};
    out.measured.timestamp = s.t;
    out.measured.voltage = v + s.scenario.noise_v * s.rng.normal();
    out.measured.current = current + s.scenario.noise_i * s.rng.normal();
    out.measured.temperature = temp + s.scenario.noise_t * s.rng.normal();
    out.measured.power = out.measured.voltage * out.measured.current;

    s.charge_ah = std::clamp(s.charge_ah + current / 3600.0, 0.0, s.capacity());
    if (current > 0.0)
        s.log.charge_ah += current / 3600.0;
    else
        s.log.discharge_ah -= current / 3600.0;
    ++s.log.rows;
    ++s.t;
    return true;
}

nlohmann::json Generator::event_log_json() const {
    const State& s = *s_;
    const SimBattery& b = s.battery;
    nlohmann::json soc_axis = nlohmann::json::array(), volt_axis = nlohmann::json::array();
    const auto n = static_cast<std::size_t>(std::floor(b.ocv.soc_max() / 0.25 + 1e-9));
    for (std::size_t k = 0; k <= n; ++k) {
        const double soc = 0.25 * static_cast<double>(k);
        soc_axis.push_back(soc);
        volt_axis.push_back(b.ocv.voltage(soc));
    }
    nlohmann::json dcr_rows = nlohmann::json::array();
    const std::size_t nt = b.base_dcr.temp_nodes().size();
    for (std::size_t i = 0; i < b.base_dcr.soc_nodes().size(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (std::size_t j = 0; j < nt; ++j) row.push_back(b.base_dcr.values()[i * nt + j] * b.dcr_factor);
        dcr_rows.push_back(row);
    }
    nlohmann::json pulses = nlohmann::json::array();
    for (const auto& p : s.log.pulses)
        pulses.push_back({{"step_at", p.step_at},
                          {"hold_end", p.hold_end},
                          {"current_before_a", p.current_before},
                          {"current_after_a", p.current_after},
                          {"dcr_ohm", p.dcr},
                          {"soc_pct", p.soc},
                          {"temperature_c", p.temperature},
                          {"effective", p.effective}});
    nlohmann::json spikes = nlohmann::json::array();
    for (const auto& p : s.log.spikes)
        spikes.push_back({{"start", p.start}, {"end", p.end}, {"amplitude_a", p.amplitude}, {"effective", p.effective}});
    const Degradation& d = b.degradation;
    return {{"schema", "ocvtrack.sim_event_log"},
            {"version", 1},
            {"seed", s.seed},
            {"system", system_config_for(b)},
            {"battery",
             {{"chemistry", to_string(b.chemistry)},
              {"cells_series", b.cells_series},
              {"nominal_capacity_ah", b.nominal_capacity_ah},
              {"age_years", b.age_years},
              {"soh_pct", b.usable_pct},
              {"dcr_factor", b.dcr_factor},
              {"degradation",
               {{"lli_shift_pp_per_year", d.lli_shift_pp_per_year},
                {"capacity_fade_pp_per_year", d.capacity_fade_pp_per_year},
                {"dcr_growth_pct_per_year", d.dcr_growth_pct_per_year},
                {"dcr_growth", d.dcr_growth == DcrGrowth::Compounded ? "compounded" : "linear"},
                {"lam_peak_loss_per_year", d.lam_peak_loss_per_year}}}}},
            {"scenario", to_json(s.scenario)},
            {"true_ocv", {{"nominal_soc_pct", soc_axis}, {"voltage_cell_v", volt_axis}}},
            {"dcr_surface",
             {{"soc_pct", b.base_dcr.soc_nodes()}, {"temperature_c", b.base_dcr.temp_nodes()}, {"ohm", dcr_rows}}},
            {"events",
             {{"pulses", pulses}, {"spikes", spikes}, {"full_charge", s.log.full_charges}, {"empty", s.log.empties}}},
            {"totals",
             {{"rows", s.log.rows}, {"charge_ah", s.log.charge_ah}, {"discharge_ah", s.log.discharge_ah}}}};
}

namespace {

// Buffered line writer; the file is renamed into place on commit.
class StagedFile {
public:
    explicit StagedFile(std::filesystem::path path) : path_(std::move(path)), tmp_(path_) {
        tmp_ += ".tmp";
        f_ = std::fopen(tmp_.c_str(), "wb");
        if (!f_) throw Error(ErrorKind::Internal, "cannot write " + tmp_.string());
        buf_.reserve(1 << 20);
    }
    ~StagedFile() {
        if (f_) {
            std::fclose(f_);
            std::filesystem::remove(tmp_);
        }
    }
    void put(std::string_view text) {
        buf_ += text;
        if (buf_.size() >= (1 << 20)) flush();
    }
    void put(double v) {
        char tmp[32];
        const auto [p, ec] = std::to_chars(tmp, tmp + sizeof tmp, v);
        (void)ec;
        buf_.append(tmp, p);
    }
    void put_fixed(double v, int decimals) {
        char tmp[48];
        const auto [p, ec] = std::to_chars(tmp, tmp + sizeof tmp, v, std::chars_format::fixed, decimals);
        (void)ec;
        // "-0.000" and "0.000" must not differ by sign alone.
        if (tmp[0] == '-' && std::all_of(tmp + 1, p, [](char c) { return c == '0' || c == '.'; }))
            buf_.append(tmp + 1, p);
        else
            buf_.append(tmp, p);
    }
    void put(long long v) {
        char tmp[24];
        const auto [p, ec] = std::to_chars(tmp, tmp + sizeof tmp, v);
        (void)ec;
        buf_.append(tmp, p);
    }
    void commit() {
        flush();
        if (std::fclose(f_) != 0) throw Error(ErrorKind::Internal, "close failed: " + tmp_.string());
        f_ = nullptr;
        std::filesystem::rename(tmp_, path_);
    }

private:
    void flush() {
        if (!buf_.empty() && std::fwrite(buf_.data(), 1, buf_.size(), f_) != buf_.size())
            throw Error(ErrorKind::Internal, "write failed: " + tmp_.string());
        buf_.clear();
    }
    std::filesystem::path path_, tmp_;
    std::FILE* f_ = nullptr;
    std::string buf_;
};

}  // namespace

SimOutputs write_simulation(const SimBattery& battery, const LoadScenario& scenario, std::uint64_t seed,
                            const std::filesystem::path& dir, bool write_truth, const std::string& stem) {
    std::filesystem::create_directories(dir);
    SimOutputs out;
    out.telemetry = dir / (stem + "telemetry.csv");
    out.event_log = dir / (stem + "event_log.json");
    Generator gen(battery, scenario, seed);
    StagedFile tel(out.telemetry);
    tel.put("timestamp,voltage_v,current_a,power_w,temperature_c\n");
    std::optional<StagedFile> truth;
    if (write_truth) {
        out.truth = dir / (stem + "truth.csv");
        truth.emplace(*out.truth);
        truth->put(truth_header);
        truth->put("\n");
    }
    SimSample smp;
    while (gen.next(smp)) {
        const auto& m = smp.measured;
        tel.put(static_cast<long long>(m.timestamp));
        tel.put(",");
        tel.put_fixed(m.voltage, 4);
        tel.put(",");
        tel.put_fixed(m.current, 3);
        tel.put(",");
        tel.put_fixed(m.power, 2);
        tel.put(",");
        tel.put_fixed(m.temperature, 2);
        tel.put("\n");
        if (truth) {
            const auto& t = smp.truth;
            truth->put(static_cast<long long>(t.t));
            for (const double v : {t.soc, t.nominal_soc, t.current, t.ocv_cell, t.dcr, t.temperature}) {
                truth->put(",");
                truth->put(v);
            }
            truth->put("\n");
        }
    }
    tel.commit();
    if (truth) truth->commit();
    write_json_atomic(out.event_log, gen.event_log_json());
    out.rows = gen.events().rows;
    return out;
}

std::vector<CampaignYear> write_campaign(const SimBattery& fresh, const LoadScenario& scenario, int years,
                                         std::uint64_t seed, const std::filesystem::path& dir, bool write_truth) {
    if (years < 0) throw ConfigOutOfRange("campaign years must be non-negative");
    std::vector<CampaignYear> out;
    CsvWriter soh({"period", "soh_pct"});
    int y0 = 0;
    unsigned m0 = 0, d0 = 0;
    {
        const auto days = static_cast<std::int64_t>(std::floor(static_cast<double>(scenario.start) / 86400.0));
        const auto civil = civil_from_days(days);
        y0 = civil.year;
        m0 = civil.month;
        d0 = civil.day;
    }
    const Instant tod = scenario.start - instant_from_civil(y0, m0, d0);
    for (int k = 0; k <= years; ++k) {
        CampaignYear cy;
        cy.index = k;
        const SimBattery aged = age(fresh, static_cast<double>(k));
        LoadScenario sc = scenario;
        sc.start = instant_from_civil(y0 + k, m0, d0) + tod;
        char stem[32];
        std::snprintf(stem, sizeof stem, "year%d_", k);
        cy.outputs = write_simulation(aged, sc, seed + static_cast<std::uint64_t>(k), dir, write_truth, stem);
        cy.soh_pct = aged.usable_pct;
        cy.period = period_of(sc.start, PeriodKind::Year);
        soh.cell(cy.period.str()).cell(cy.soh_pct).end_row();
        out.push_back(std::move(cy));
    }
    write_file_atomic(dir / "soh.csv", soh.str());
    return out;
}

}  // namespace ocvtrack::sim

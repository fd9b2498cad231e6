#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "ocvtrack/error.hpp"
#include "ocvtrack/telemetry.hpp"
#include "ocvtrack/time.hpp"

namespace ocvtrack::sim {

class ConfigOutOfRange : public Error {
public:
    explicit ConfigOutOfRange(const std::string& what) : Error(ErrorKind::Config, what) {}
};

class DegradationExceedsCapacity : public Error {
public:
    explicit DegradationExceedsCapacity(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

// Incremental-capacity shape of one cell: a smooth baseline between the
// voltage limits plus Gaussian peaks. Integrated over voltage it gives the
// OCV curve; each peak is a voltage plateau.
struct IcPeak {
    double centre_v = 0.0;
    double amplitude = 0.0;  // relative IC height
    double width_v = 0.0;    // Gaussian sigma
};

struct OcvPreset {
    double v_low = 0.0;
    double v_high = 0.0;
    double baseline = 0.0;
    double edge_v = 0.03;  // baseline roll-off width at both ends
    std::vector<IcPeak> peaks;

    double ic(double v, const std::vector<double>& peak_scale) const;
};

OcvPreset ocv_preset(Chemistry chemistry);

// Per-cell OCV tabulated on a uniform SOC grid starting at 0 %; SOC is
// percent of nominal capacity. Voltage is strictly increasing.
class OcvCurve {
public:
    OcvCurve() = default;
    OcvCurve(double soc_step, std::vector<double> volts);
    static OcvCurve linear(double v0, double v1, double soc_max, double soc_step = 0.01);

    double voltage(double soc) const;  // clamped to the domain
    double soc_at(double v) const;     // clamped to the range
    double soc_max() const { return step_ * static_cast<double>(volts_.size() - 1); }
    double v_min() const { return volts_.front(); }
    double v_max() const { return volts_.back(); }
    double step() const { return step_; }
    const std::vector<double>& volts() const { return volts_; }

private:
    double step_ = 0.01;
    std::vector<double> volts_;
};

// OCV with the given peak scaling, in percent of the unscaled total.
OcvCurve integrate_preset(const OcvPreset& preset, const std::vector<double>& peak_scale, double soc_step = 0.01);

// Resistance over (reference SOC, temperature), bilinear between grid
// nodes, clamped outside.
class DcrSurface {
public:
    DcrSurface(std::vector<double> soc, std::vector<double> temp, std::vector<double> ohms);
    static DcrSurface reference();  // 5 mOhm floor, rising toward low SOC and low temperature
    static DcrSurface constant(double ohms);

    double at(double soc, double temp) const;
    const std::vector<double>& soc_nodes() const { return soc_; }
    const std::vector<double>& temp_nodes() const { return temp_; }
    const std::vector<double>& values() const { return ohms_; }  // row-major soc x temp

private:
    std::vector<double> soc_, temp_, ohms_;
};

enum class DcrGrowth { Compounded, Linear };

struct Degradation {
    double lli_shift_pp_per_year = 0.0;
    double capacity_fade_pp_per_year = 0.0;  // total; 0 derives it from LLI and LAM
    double dcr_growth_pct_per_year = 0.0;
    DcrGrowth dcr_growth = DcrGrowth::Compounded;
    std::vector<double> lam_peak_loss_per_year;  // amplitude fraction lost per year, per preset peak
};

struct SimBattery {
    Chemistry chemistry = Chemistry::LmoNmcBlend;
    int cells_series = 1;
    double nominal_capacity_ah = 0.0;
    OcvPreset preset;
    Degradation degradation;
    double age_years = 0.0;
    OcvCurve fresh_ocv;
    OcvCurve ocv;               // aged, over [0, usable_pct]
    double usable_pct = 100.0;  // state of health, percent of nominal
    DcrSurface base_dcr = DcrSurface::reference();
    double dcr_factor = 1.0;

    double capacity_ah() const { return nominal_capacity_ah * usable_pct / 100.0; }
    double ocv_cell(double nominal_soc) const { return ocv.voltage(nominal_soc); }
    double dcr(double reference_soc, double temp) const { return base_dcr.at(reference_soc, temp) * dcr_factor; }
    double v_full() const { return ocv.v_max(); }
    double v_empty() const { return ocv.v_min(); }
};

SimBattery make_battery(Chemistry chemistry, int cells_series, double nominal_capacity_ah,
                        const Degradation& degradation = {}, DcrSurface dcr = DcrSurface::reference());
// Custom OCV without degradation support; used for closed-form checks.
SimBattery make_custom_battery(OcvCurve ocv, int cells_series, double nominal_capacity_ah, DcrSurface dcr);
// Adds `years` to the current age and rebuilds from the fresh state, so
// composition is additive.
SimBattery age(const SimBattery& battery, double years);

// Suggested pack for each chemistry (cells, Ah).
SimBattery default_battery(Chemistry chemistry, const Degradation& degradation = {});

SystemConfig system_config_for(const SimBattery& battery, const std::string& system_id = "sim");

struct CurrentSegment {
    Instant from = 0;
    Instant to = 0;  // exclusive
    double current_a = 0.0;
};

struct LoadScenario {
    Instant start = 1609459200;  // 2021-01-01T00:00:00Z
    int days = 365;
    double initial_soc = 50.0;   // percent of actual capacity
    bool household = true;       // false: only `programmed` drives the current
    std::vector<CurrentSegment> programmed;

    double pv_peak_c = 0.6;
    double cloudy_fraction = 0.3;
    double base_load_c = 0.12;
    int appliance_pulses_per_night = 12;
    double pulse_c_low = 0.6;
    double pulse_c_high = 0.9;
    int pulse_hold_low_s = 3;
    int pulse_hold_high_s = 8;
    int spikes_per_day = 2;
    double spike_c = 0.25;
    int spike_len_low_s = 1;
    int spike_len_high_s = 3;

    double charge_limit_c = 0.5;
    double termination_c = 0.02;

    double temp_mean = 17.0;
    double temp_seasonal = 7.0;
    double temp_daily = 2.0;
    std::optional<double> constant_temperature;

    double noise_v = 0.005;
    double noise_i = 0.05;
    double noise_t = 0.1;

    void validate() const;
};

nlohmann::json to_json(const LoadScenario& s);

struct TruthSample {
    Instant t = 0;
    double soc = 0.0;          // percent of actual capacity
    double nominal_soc = 0.0;  // percent of nominal capacity
    double current = 0.0;
    double ocv_cell = 0.0;
    double dcr = 0.0;
    double temperature = 0.0;
};

struct SimSample {
    TelemetryRecord measured;
    TruthSample truth;
};

// A current step held for a few seconds: both edges are logged, with
// `step_at` the first sample at the new level.
struct PulseEvent {
    Instant step_at = 0;
    Instant hold_end = 0;  // last sample at the new level
    double current_before = 0.0;
    double current_after = 0.0;
    double dcr = 0.0;
    double soc = 0.0;
    double temperature = 0.0;
    bool effective = true;  // not suppressed by a charge/discharge limit
};

struct SpikeEvent {
    Instant start = 0;
    Instant end = 0;  // first sample back at the base level
    double amplitude = 0.0;
    bool effective = true;
};

struct EventLog {
    std::vector<PulseEvent> pulses;
    std::vector<SpikeEvent> spikes;
    std::vector<Instant> full_charges;
    std::vector<Instant> empties;
    std::uint64_t rows = 0;
    double charge_ah = 0.0;
    double discharge_ah = 0.0;
};

// 1 Hz generator; pulls one sample at a time so a system-year never has to
// sit in memory.
class Generator {
public:
    Generator(SimBattery battery, LoadScenario scenario, std::uint64_t seed);
    ~Generator();
    Generator(const Generator&) = delete;
    Generator& operator=(const Generator&) = delete;

    bool next(SimSample& out);
    const EventLog& events() const;
    const SimBattery& battery() const;
    nlohmann::json event_log_json() const;

private:
    struct State;
    std::unique_ptr<State> s_;
};

struct SimOutputs {
    std::filesystem::path telemetry;
    std::filesystem::path event_log;
    std::optional<std::filesystem::path> truth;
    std::uint64_t rows = 0;
};

inline const char* truth_header = "timestamp,soc_pct,nominal_soc_pct,current_a,ocv_cell_v,dcr_ohm,temperature_c";

// Writes `<stem>telemetry.csv`, `<stem>event_log.json` and optionally
// `<stem>truth.csv` into `dir`, each atomically.
SimOutputs write_simulation(const SimBattery& battery, const LoadScenario& scenario, std::uint64_t seed,
                            const std::filesystem::path& dir, bool write_truth, const std::string& stem = "");

struct CampaignYear {
    int index = 0;
    SimOutputs outputs;
    double soh_pct = 100.0;
    PeriodTag period;
};

// One scenario per battery age 0..years, each starting a calendar year
// after the previous. Writes `soh.csv` with the programmed state of health.
std::vector<CampaignYear> write_campaign(const SimBattery& fresh, const LoadScenario& scenario, int years,
                                         std::uint64_t seed, const std::filesystem::path& dir, bool write_truth);

}  // namespace ocvtrack::sim

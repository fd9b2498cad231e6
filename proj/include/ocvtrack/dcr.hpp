#pragma once

#include <array>
#include <deque>
#include <optional>
#include <vector>

#include <json.hpp>

#include "ocvtrack/error.hpp"
#include "ocvtrack/telemetry.hpp"

namespace ocvtrack {

struct DcrPulse {
    Instant t_start = 0;  // first sample at the new current level
    Instant t_end = 0;    // hold end
    double v1 = 0.0, v2 = 0.0;
    double i1 = 0.0, i2 = 0.0;
    double soc_at_pulse = 0.0;  // reference-capacity percent, sampled before the step
    double temp_at_pulse = 0.0;
};

class ZeroCurrentDelta : public Error {
public:
    ZeroCurrentDelta() : Error(ErrorKind::Domain, "pulse has i2 == i1") {}
};

// (v2 - v1) / (i2 - i1). The caller discards results <= 0.
double estimate_dcr(const DcrPulse& pulse);

struct PulseOptions {
    double min_delta_i = 0.0;      // A; 0 selects min_delta_c * I_1C
    double min_delta_c = 0.5;
    Instant max_step_s = 2;
    double hold_tolerance = 0.10;  // fraction of the step
    Instant min_hold_s = 2;
    Instant max_hold_s = 10;
};

// Streaming step-and-hold detector. Feed records in order; completed pulses
// accumulate until taken.
class PulseDetector {
public:
    PulseDetector(PulseOptions options, double one_c_current);

    void push(const TelemetryRecord& r, double soc);
    void mark_gap();
    void finish();
    std::vector<DcrPulse> take();
    const std::vector<DcrPulse>& pending() const { return done_; }

private:
    struct Sample {
        Instant t;
        double v, i, soc, temp;
    };
    void close_hold();
    bool try_start(const Sample& s);

    PulseOptions options_;
    double min_delta_ = 0.0;
    std::deque<Sample> recent_;
    bool holding_ = false;
    Sample pre_{}, step_{}, last_{};
    double delta_ = 0.0;
    std::vector<DcrPulse> done_;
};

std::vector<DcrPulse> detect_pulses(const std::vector<StreamItem>& stream, const std::vector<double>& soc,
                                    PulseOptions options, double one_c_current);

struct DcrCell {
    double median_dcr = 0.0;  // ohms; meaningful when sample_count > 0
    std::size_t sample_count = 0;
};

struct DcrTableOptions {
    std::vector<double> soc_edges{0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100};
    std::vector<double> temp_edges{0, 5, 10, 15, 20, 25, 30, 35, 40};
    std::size_t min_samples = 5;
};

struct DcrTableTally {
    std::size_t accepted = 0;
    std::size_t negative_resistance = 0;
    std::size_t zero_current_delta = 0;
    std::size_t outside_period = 0;
};

struct DcrLookup {
    double ohms = 0.0;
    bool extrapolated = false;  // a nearest-neighbour filled cell contributed
};

class DcrTable {
public:
    DcrTable() = default;
    DcrTable(std::vector<double> soc_edges, std::vector<double> temp_edges, std::vector<DcrCell> cells,
             std::size_t min_samples, Instant valid_from, Instant valid_to);

    const std::vector<double>& soc_edges() const { return soc_edges_; }
    const std::vector<double>& temp_edges() const { return temp_edges_; }
    std::size_t soc_bins() const { return soc_edges_.size() - 1; }
    std::size_t temp_bins() const { return temp_edges_.size() - 1; }
    const DcrCell& cell(std::size_t soc_bin, std::size_t temp_bin) const;
    bool reported(std::size_t soc_bin, std::size_t temp_bin) const;
    std::size_t min_samples() const { return min_samples_; }
    Instant valid_from() const { return valid_from_; }
    Instant valid_to() const { return valid_to_; }  // exclusive
    bool covers(Instant t) const { return t >= valid_from_ && t < valid_to_; }

    // Bilinear interpolation over bin centres; empty cells take the value
    // of the nearest reported cell.
    DcrLookup lookup(double soc, double temp) const;

private:
    void fill();

    std::vector<double> soc_edges_, temp_edges_;
    std::vector<DcrCell> cells_;
    std::size_t min_samples_ = 5;
    Instant valid_from_ = 0, valid_to_ = 0;
    std::vector<double> filled_;
    std::vector<char> filled_flag_;
};

class EmptyTable : public Error {
public:
    EmptyTable() : Error(ErrorKind::InsufficientData, "no qualifying pulses in period") {}
};

std::size_t bin_index(const std::vector<double>& edges, double value);  // clamps to the outer bins

DcrTable build_table(const std::vector<DcrPulse>& pulses, Instant valid_from, Instant valid_to,
                     const DcrTableOptions& options = {}, DcrTableTally* tally = nullptr);

void to_json(nlohmann::json& j, const DcrTable& t);
DcrTable dcr_table_from_json(const nlohmann::json& j);

struct Range {
    double lo = 0.0;
    double hi = 0.0;
};

struct DcrTrend {
    Range soc_range, temp_range;
    std::vector<Instant> year_starts;
    std::vector<double> relative_pct;  // first year = 100
    double gradient_pp_per_year = 0.0;
    std::size_t cells_used = 0;
};

class InsufficientYears : public Error {
public:
    InsufficientYears() : Error(ErrorKind::InsufficientData, "fewer than two yearly tables with data in range") {}
};

// Averages the cells inside the ranges that are reported in every table.
DcrTrend fit_trend(const std::vector<DcrTable>& yearly, Range soc_range, Range temp_range);

// Least-squares slope of already normalized yearly values against year index.
double trend_gradient(const std::vector<double>& years, const std::vector<double>& relative_pct);

}  // namespace ocvtrack

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ocvtrack/phases.hpp"

namespace ocvtrack {

// SOC as a non-decreasing function of voltage, built from one partial curve.
// Voltage inversions from noise are removed by isotonic regression; flat
// runs collapse to their SOC midpoint.
class MonotoneProfile {
public:
    explicit MonotoneProfile(const std::vector<PartialPoint>& points);
    bool covers(double v) const { return !v_.empty() && v >= v_.front() && v <= v_.back(); }
    double soc_at(double v) const;  // requires covers(v)
    double v_min() const { return v_.front(); }
    double v_max() const { return v_.back(); }
    bool empty() const { return v_.size() < 2; }

private:
    std::vector<double> v_, s_;
};

struct AlignOptions {
    double voltage_step = 0.005;  // per cell
    double tolerance = 0.01;      // pp
    int max_iterations = 20;
    double outlier_limit = 10.0;  // pp
};

struct AlignResult {
    std::vector<PartialQocvCurve> partials;  // aligned, outliers removed
    std::vector<double> offsets;             // subtracted SOC offset per returned partial
    std::size_t dropped_outliers = 0;
    std::size_t no_overlap = 0;              // returned unshifted
    int iterations = 0;
    bool converged = true;
};

AlignResult align_partials(const std::vector<PartialQocvCurve>& partials, const AlignOptions& options = {});

struct QocvPoint {
    double voltage = 0.0;
    double mean_soc = 0.0;
    std::size_t n_contributing = 0;
    double soc_std = 0.0;
};

struct QocvCurve {
    std::string system_id;
    Direction direction = Direction::Discharge;
    PeriodTag period;
    std::vector<QocvPoint> grid;
    std::size_t phase_count = 0;
    double voltage_step = 0.005;
    int cells_series = 1;
    std::size_t monotone_adjustments = 0;

    double v_min() const { return grid.front().voltage; }
    double v_max() const { return grid.back().voltage; }
    bool covers(double v) const;
    double soc_at(double v) const;  // linear interpolation; throws VoltageOutOfRange
};

struct FuseOptions {
    double voltage_step = 0.005;  // per cell
    std::size_t min_phases_per_point = 3;
    std::size_t min_phases_per_period = 20;
};

class InsufficientPhases : public Error {
public:
    explicit InsufficientPhases(std::size_t n)
        : Error(ErrorKind::InsufficientData, "only " + std::to_string(n) + " partial curves in period") {}
};

class VoltageOutOfRange : public Error {
public:
    explicit VoltageOutOfRange(double v)
        : Error(ErrorKind::Domain, "voltage " + std::to_string(v) + " V outside curve range") {}
};

QocvCurve fuse(const std::vector<PartialQocvCurve>& aligned, const FuseOptions& options = {});

// SOC_a(v) - SOC_b(v) in percentage points of nominal capacity.
double capacity_fade(const QocvCurve& a, const QocvCurve& b, double at_voltage);
// Highest voltage covered by both curves: the end-of-charge comparison point.
double common_top_voltage(const QocvCurve& a, const QocvCurve& b);

// Weighted pool-adjacent-violators fit, non-decreasing. Returns the fitted values.
std::vector<double> isotonic_fit(const std::vector<double>& y, const std::vector<double>& w);

}  // namespace ocvtrack

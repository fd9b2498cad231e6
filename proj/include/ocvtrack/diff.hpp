#pragma once

#include <string>
#include <vector>

#include "ocvtrack/qocv.hpp"

namespace ocvtrack {

// Values on a uniform grid x_k = x0 + k * dx.
struct UniformSeries {
    double x0 = 0.0;
    double dx = 1.0;
    std::vector<double> y;

    double x(std::size_t k) const { return x0 + static_cast<double>(k) * dx; }
    double span() const { return y.empty() ? 0.0 : dx * static_cast<double>(y.size() - 1); }
};

class SigmaTooLarge : public Error {
public:
    SigmaTooLarge() : Error(ErrorKind::Domain, "smoothing sigma exceeds 10 % of the curve span") {}
};

class NonMonotonicAxis : public Error {
public:
    explicit NonMonotonicAxis(const std::string& what) : Error(ErrorKind::Domain, what) {}
};

class NonMonotonicVoltage : public NonMonotonicAxis {
public:
    explicit NonMonotonicVoltage(const std::string& what) : NonMonotonicAxis(what) {}
};

class NonMonotonicSoc : public NonMonotonicAxis {
public:
    explicit NonMonotonicSoc(const std::string& what) : NonMonotonicAxis(what) {}
};

// Gaussian convolution, kernel truncated at +-4 sigma. Edges are padded by
// point reflection (2 y0 - y_k), which keeps boundary slopes intact.
UniformSeries smooth(const UniformSeries& series, double sigma);

// Smooths mean SOC along the voltage grid; sigma in volts.
QocvCurve smooth(const QocvCurve& curve, double sigma_v);

// Central differences, one-sided at the two ends.
std::vector<double> gradient(const std::vector<double>& y, double dx);

enum class DiffKind { IncrementalCapacity, DifferentialVoltage };
std::string to_string(DiffKind k);
DiffKind diff_kind_from_string(const std::string& text);

struct DiffSource {
    std::string system_id;
    PeriodTag period;
    Direction direction = Direction::Discharge;
};

struct DiffCurve {
    DiffKind kind = DiffKind::IncrementalCapacity;
    std::vector<double> x;  // volts per cell (IC) or percent SOC (DV)
    std::vector<double> y;  // %Q/V (IC) or V/%Q (DV)
    double smoothing_sigma = 0.0;
    DiffSource source;
};

// dSOC/dV on the curve's uniform voltage grid.
DiffCurve ica(const QocvCurve& curve, double smoothing_sigma = 0.0);

// Voltage resampled onto a uniform SOC grid by inverting the curve; flat SOC
// runs take their midpoint voltage.
UniformSeries voltage_vs_soc(const QocvCurve& curve, double soc_step = 0.25);

// dV/dSOC on a uniform SOC grid.
DiffCurve dva(const UniformSeries& voltage_by_soc, double smoothing_sigma = 0.0);

struct DiffOptions {
    double ic_sigma_v = 0.010;  // per cell
    double dv_sigma_soc = 1.0;  // percent
    double dv_soc_step = 0.25;
};

// Smooth + differentiate with defaults; sigmas shrink to 10 % of the span when needed.
DiffCurve ic_curve(const QocvCurve& curve, const DiffOptions& options = {});
DiffCurve dv_curve(const QocvCurve& curve, const DiffOptions& options = {});

}  // namespace ocvtrack

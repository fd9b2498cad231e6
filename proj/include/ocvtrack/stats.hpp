#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ocvtrack/error.hpp"
#include "ocvtrack/time.hpp"

namespace ocvtrack {

class ZeroVariance : public Error {
public:
    ZeroVariance() : Error(ErrorKind::Domain, "series has zero variance") {}
};

class LengthMismatch : public Error {
public:
    LengthMismatch() : Error(ErrorKind::Domain, "series lengths differ") {}
};

// |r| == 1: the test statistic is unbounded; p is 0 by convention.
class DegenerateR : public Error {
public:
    DegenerateR() : Error(ErrorKind::Domain, "degenerate correlation |r| = 1 (p = 0 by convention)") {}
    double p_value() const { return 0.0; }
};

// Sample Pearson correlation, n >= 3, clamped to [-1, 1].
double pearson(std::span<const double> x, std::span<const double> y);

// Two-tailed p-value of the Pearson t-test with n - 2 degrees of freedom.
double p_value(double r, std::size_t n);

// Regularized incomplete beta I_x(a, b).
double incomplete_beta(double a, double b, double x);
// Student t cumulative distribution.
double student_t_cdf(double t, double dof);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
};

// Ordinary least squares with a fixed summation order (bit-reproducible).
LinearFit least_squares(std::span<const double> x, std::span<const double> y);

enum class FoiQuantity { Intensity, Position, Distance };
std::string to_string(FoiQuantity q);       // "Int", "Pos", "Dist"
FoiQuantity foi_quantity_from_string(const std::string& text);

struct CorrelationResult {
    int foi_id = 0;
    FoiQuantity feature = FoiQuantity::Intensity;
    double r = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    bool degenerate = false;
};

struct TrackSeries {
    int foi_id = 0;
    FoiQuantity feature = FoiQuantity::Intensity;
    std::map<PeriodTag, double> values;  // normalized value per period
};

struct CorrelationReport {
    std::vector<CorrelationResult> results;
    std::vector<std::string> skipped;  // InsufficientOverlap and degenerate-variance notes
};

CorrelationReport correlate_tracks(const std::vector<TrackSeries>& tracks, const std::map<PeriodTag, double>& soh,
                                   std::size_t min_overlap = 3);

}  // namespace ocvtrack

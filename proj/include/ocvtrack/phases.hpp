#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ocvtrack/dcr.hpp"
#include "ocvtrack/soc.hpp"
#include "ocvtrack/telemetry.hpp"

namespace ocvtrack {

struct PhaseSample {
    Instant t = 0;
    double v = 0.0;
    double i = 0.0;
    double soc = 0.0;  // reference-capacity percent
    double temp = 0.0;
};

enum class SpanBasis { Nominal, Reference };

struct OperationalPhase {
    std::string id;
    Direction direction = Direction::Discharge;
    std::vector<PhaseSample> samples;
    double nominal_scale = 1.0;  // reference percent -> nominal percent
    bool anchored = true;

    Instant start() const { return samples.front().t; }
    Instant end() const { return samples.back().t; }
    double soc_span(SpanBasis basis = SpanBasis::Nominal) const;
    // Largest |dI/dt| between consecutive samples, A/s.
    double max_dynamic() const;
    PeriodTag period_tag() const { return period_of(start(), PeriodKind::Month); }
};

struct PhaseOptions {
    double idle_fraction = 0.01;  // of I_1C; |I| below this ends a phase
    double min_soc_span = 5.0;    // percent, inclusive
    SpanBasis span_basis = SpanBasis::Nominal;
    double max_dynamic_fraction = 0.10;  // of I_1C per second, inclusive
    double grid_step = 0.25;             // percent SOC
};

// Streaming sign splitter. Closed phases are appended to `closed`.
class PhaseSplitter {
public:
    explicit PhaseSplitter(double idle_threshold_a);

    void push(const TelemetryRecord& r, const SocSample& soc, double nominal_scale,
              std::vector<OperationalPhase>& closed);
    void mark_gap(std::vector<OperationalPhase>& closed);
    void finish(std::vector<OperationalPhase>& closed);
    bool open() const { return open_.has_value(); }

private:
    void close(std::vector<OperationalPhase>& closed);

    double idle_ = 0.0;
    std::optional<OperationalPhase> open_;
    std::uint64_t next_id_ = 1;
};

std::vector<OperationalPhase> split_by_sign(const std::vector<StreamItem>& stream, const std::vector<double>& soc,
                                            const SystemConfig& config, const PhaseOptions& options = {});

std::vector<OperationalPhase> filter_throughput(const std::vector<OperationalPhase>& phases, double min_soc_span = 5.0,
                                                SpanBasis basis = SpanBasis::Nominal);

// Phases whose dynamics stay within the limit pass unchanged; the others are
// cut at each violating sample into fragments, which are returned in order.
std::vector<OperationalPhase> filter_dynamics(const std::vector<OperationalPhase>& phases, double one_c_current,
                                              double max_dynamic_fraction = 0.10);

struct PhaseAuditRow {
    std::string phase_id;
    Direction direction = Direction::Discharge;
    Instant start = 0, end = 0;
    double soc_span = 0.0;
    double max_dynamic = 0.0;
    bool kept = false;
    std::string reason;
};

struct FilterOutcome {
    std::vector<OperationalPhase> kept;
    std::vector<PhaseAuditRow> audit;  // rows for dropped phases and fragments only
};

// throughput -> dynamics -> throughput on the fragments.
FilterOutcome apply_phase_filters(OperationalPhase phase, const PhaseOptions& options, double one_c_current);

PhaseAuditRow audit_row(const OperationalPhase& phase, SpanBasis basis, bool kept, std::string reason);

inline double corrected_voltage(double v_bat, double i_bat, double dcr_ohm) { return v_bat - i_bat * dcr_ohm; }

struct PartialPoint {
    double soc = 0.0;      // nominal percent
    double voltage = 0.0;  // corrected, per cell
    bool extrapolated = false;
};

struct PartialQocvCurve {
    std::string source_phase_id;
    Direction direction = Direction::Discharge;
    Instant start = 0;
    std::vector<PartialPoint> points;  // SOC ascending for Charge, descending for Discharge
    double mean_c_rate = 0.0;
};

class MissingDcrTable : public Error {
public:
    MissingDcrTable() : Error(ErrorKind::InsufficientData, "no DCR table covers the phase") {}
};

struct CorrectionOptions {
    double grid_step = 0.25;
    int cells_series = 1;
    double one_c_current = 1.0;
};

PartialQocvCurve correct_overvoltage(const OperationalPhase& phase, const DcrTable* table,
                                     const CorrectionOptions& options);

}  // namespace ocvtrack

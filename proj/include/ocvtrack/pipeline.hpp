#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "ocvtrack/config.hpp"
#include "ocvtrack/dcr.hpp"
#include "ocvtrack/diff.hpp"
#include "ocvtrack/foi.hpp"
#include "ocvtrack/ingest.hpp"
#include "ocvtrack/phases.hpp"
#include "ocvtrack/qocv.hpp"
#include "ocvtrack/soc.hpp"
#include "ocvtrack/stats.hpp"

namespace ocvtrack {

// State of health per period, percent of nominal capacity.
using SohSeries = std::map<PeriodTag, double>;

SohSeries read_soh_csv(const std::filesystem::path& path);
std::vector<CapacityEpoch> capacity_epochs(const SohSeries& soh, double nominal_capacity_ah);

struct SocSummary {
    std::size_t anchors = 0;
    std::vector<double> anchor_drifts;
    std::uint64_t clamp_count = 0;
    std::uint64_t skipped_seconds = 0;
    bool unanchored = true;
};

struct FrontEndCounters {
    std::uint64_t records = 0;
    std::uint64_t gaps = 0;
    std::uint64_t phases_split = 0;
    std::uint64_t phases_kept = 0;  // fragments that passed every filter
    std::uint64_t pulses = 0;
};

// Single streaming pass: ingest -> SOC -> pulse detection and phase
// splitting -> phase filters. Filtered phases and pulses are handed to the
// callbacks as soon as they are final; nothing else is retained.
class FrontEnd {
public:
    using PhaseSink = std::function<void(OperationalPhase&&)>;
    using PulseSink = std::function<void(const DcrPulse&)>;
    using AuditSink = std::function<void(const PhaseAuditRow&)>;
    using RecordHook = std::function<void(const TelemetryRecord&)>;

    FrontEnd(const RunConfig& config, const SohSeries& soh);

    PhaseSink on_phase;
    PulseSink on_pulse;
    AuditSink on_audit;
    RecordHook on_record;  // called before the record enters any stage

    void run(const std::vector<std::filesystem::path>& files);

    const IngestStats& ingest() const { return ingest_; }
    const SocSummary& soc() const { return soc_summary_; }
    const FrontEndCounters& counters() const { return counters_; }

private:
    void handle_closed(std::vector<OperationalPhase>& closed);
    void drain_pulses(PulseDetector& detector);

    RunConfig config_;
    SocOptions soc_options_;
    IngestStats ingest_;
    SocSummary soc_summary_;
    FrontEndCounters counters_;
};

struct CurveKey {
    PeriodTag period;
    Direction direction = Direction::Discharge;
    auto operator<=>(const CurveKey&) const = default;
};

struct CurveFailure {
    CurveKey key;
    std::size_t partials = 0;
    std::string reason;
};

struct QocvStageResult {
    std::vector<QocvCurve> curves;
    std::vector<CurveFailure> failures;
    std::map<CurveKey, std::size_t> partial_counts;
    std::map<CurveKey, AlignResult> alignment;  // offsets and tallies, partials dropped
};

struct ReconstructionResult {
    IngestStats ingest;
    SocSummary soc;
    FrontEndCounters counters;
    std::vector<DcrPulse> pulses;
    DcrTableTally dcr_tally;
    std::map<PeriodTag, DcrTable> dcr_tables;  // per DCR period with data
    std::vector<PhaseAuditRow> audit;
    std::size_t phases_missing_table = 0;
    QocvStageResult qocv;
};

// Everything up to the fused qOCV curves.
ReconstructionResult reconstruct(const std::vector<std::filesystem::path>& files, const RunConfig& config,
                                 const SohSeries& soh = {});

// Groups partials by (period, direction), aligns and fuses each group.
QocvStageResult fuse_partials(std::map<CurveKey, std::vector<PartialQocvCurve>> groups, const RunConfig& config);

// Yearly DCR tables from a pulse list, for the ageing trend.
std::map<PeriodTag, DcrTable> yearly_dcr_tables(const std::vector<DcrPulse>& pulses, const DcrTableOptions& options);

struct TrendRequest {
    std::string label;
    Range soc;
    Range temp;
};
std::vector<TrendRequest> default_trend_requests();

struct DiffStageResult {
    std::vector<DiffCurve> ic;
    std::vector<DiffCurve> dv;
};

DiffStageResult differentiate(const std::vector<QocvCurve>& curves, const DiffOptions& options);

struct FoiStageResult {
    std::vector<FoiObservation> observations;
    std::vector<FoiTrack> tracks;
    std::vector<std::pair<int, std::string>> skipped;  // foi id, reason
    DmReport report;
};

// FOIs of one chemistry over the per-period curves of one direction.
FoiStageResult analyse_fois(const std::vector<FoiSpec>& catalog, const std::vector<DiffCurve>& ic,
                            const std::vector<DiffCurve>& dv, double significance_floor);

std::vector<TrackSeries> track_series(const std::vector<FoiTrack>& tracks);

}  // namespace ocvtrack

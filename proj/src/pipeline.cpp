#include "ocvtrack/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ocvtrack/io.hpp"

namespace ocvtrack {

SohSeries read_soh_csv(const std::filesystem::path& path) {
    SohSeries out;
    for (const auto& row : read_csv(path, {"period", "soh_pct"})) {
        const PeriodTag p = PeriodTag::parse(row[0]);
        const double soh = parse_double_field(row[1], path.string());
        if (!(soh > 0.0 && soh <= 150.0)) throw DataError(path.string() + ": SOH outside (0, 150] for " + row[0]);
        if (!out.emplace(p, soh).second) throw DataError(path.string() + ": duplicate period " + row[0]);
    }
    return out;
}

std::vector<CapacityEpoch> capacity_epochs(const SohSeries& soh, double nominal_capacity_ah) {
    std::vector<CapacityEpoch> out;
    for (const auto& [period, pct] : soh) out.push_back({period.start(), nominal_capacity_ah * pct / 100.0});
    std::sort(out.begin(), out.end(), [](const CapacityEpoch& a, const CapacityEpoch& b) { return a.from < b.from; });
    return out;
}

FrontEnd::FrontEnd(const RunConfig& config, const SohSeries& soh) : config_(config), soc_options_(config.soc) {
    config_.system.validate();
    if (!soh.empty()) soc_options_.capacity = capacity_epochs(soh, config_.system.nominal_capacity_ah);
}

void FrontEnd::drain_pulses(PulseDetector& detector) {
    for (const auto& p : detector.take()) {
        ++counters_.pulses;
        if (on_pulse) on_pulse(p);
    }
}

void FrontEnd::handle_closed(std::vector<OperationalPhase>& closed) {
    const double one_c = config_.system.one_c_current();
    for (auto& phase : closed) {
        ++counters_.phases_split;
        if (!phase.anchored) {
            if (on_audit) on_audit(audit_row(phase, config_.phases.span_basis, false, "unanchored"));
            continue;
        }
        FilterOutcome outcome = apply_phase_filters(std::move(phase), config_.phases, one_c);
        if (on_audit)
            for (const auto& row : outcome.audit) on_audit(row);
        for (auto& kept : outcome.kept) {
            ++counters_.phases_kept;
            if (on_audit) on_audit(audit_row(kept, config_.phases.span_basis, true, "kept"));
            if (on_phase) on_phase(std::move(kept));
        }
    }
    closed.clear();
}

void FrontEnd::run(const std::vector<std::filesystem::path>& files) {
    TelemetryReader reader(files, config_.ingest);
    SocIntegrator soc(config_.system, soc_options_);
    const double one_c = config_.system.one_c_current();
    PulseDetector detector(config_.pulses, one_c);
    PhaseSplitter splitter(config_.phases.idle_fraction * one_c);
    std::vector<OperationalPhase> closed;
    bool detector_live = false;

    while (auto item = reader.next()) {
        if (const auto* gap = std::get_if<GapMarker>(&*item)) {
            (void)gap;
            ++counters_.gaps;
            soc.mark_gap();
            detector.mark_gap();
            splitter.mark_gap(closed);
            handle_closed(closed);
            continue;
        }
        const auto& r = std::get<TelemetryRecord>(*item);
        ++counters_.records;
        if (on_record) on_record(r);
        const SocSample s = soc.update(r);
        if (s.anchored) {
            detector_live = true;
            detector.push(r, s.soc);
            drain_pulses(detector);
        } else if (detector_live) {
            detector.mark_gap();
        }
        splitter.push(r, s, soc.nominal_scale(), closed);
        if (!closed.empty()) handle_closed(closed);
    }
    detector.finish();
    drain_pulses(detector);
    splitter.finish(closed);
    handle_closed(closed);

    ingest_ = reader.stats();
    soc_summary_.anchors = soc.anchors().size();
    soc_summary_.anchor_drifts = soc.anchor_drifts();
    soc_summary_.clamp_count = soc.clamp_count();
    soc_summary_.skipped_seconds = soc.skipped_seconds();
    soc_summary_.unanchored = !soc.anchored();
}

namespace {

// Phases wait for the DCR table of the period they start in. A table is
// built once the stream is past the period end plus a grace interval, so
// pulses completing just after the boundary still count.
class CorrectionStage {
public:
    CorrectionStage(const RunConfig& config, ReconstructionResult& result) : config_(config), result_(result) {}

    void add_pulse(const DcrPulse& p) {
        result_.pulses.push_back(p);
        buckets_[period_of(p.t_start, config_.dcr_period)].push_back(p);
    }

    void add_phase(OperationalPhase&& phase) {
        const PeriodTag p = period_of(phase.start(), config_.dcr_period);
        if (built_.count(p)) {
            correct(phase, p);
            return;
        }
        waiting_[p].push_back(std::move(phase));
    }

    void advance(Instant now) {
        while (true) {
            std::optional<PeriodTag> oldest;
            if (!buckets_.empty()) oldest = buckets_.begin()->first;
            if (!waiting_.empty() && (!oldest || waiting_.begin()->first < *oldest)) oldest = waiting_.begin()->first;
            if (!oldest || now < oldest->end() + kGrace) return;
            build(*oldest);
        }
    }

    void finish() {
        std::set<PeriodTag> all;
        for (const auto& [p, _] : buckets_) all.insert(p);
        for (const auto& [p, _] : waiting_) all.insert(p);
        for (const auto& p : all) build(p);
    }

    std::map<CurveKey, std::vector<PartialQocvCurve>> take_groups() { return std::move(groups_); }

private:
    static constexpr Instant kGrace = 60;

    void build(const PeriodTag& p) {
        built_.insert(p);
        auto it = buckets_.find(p);
        if (it != buckets_.end()) {
            try {
                result_.dcr_tables.emplace(p, build_table(it->second, p.start(), p.end(), config_.dcr_table,
                                                          &result_.dcr_tally));
            } catch (const EmptyTable&) {
            }
            buckets_.erase(it);
        }
        auto w = waiting_.find(p);
        if (w != waiting_.end()) {
            for (auto& phase : w->second) correct(phase, p);
            waiting_.erase(w);
        }
    }

    void correct(const OperationalPhase& phase, const PeriodTag& p) {
        const auto t = result_.dcr_tables.find(p);
        if (t == result_.dcr_tables.end()) {
            ++result_.phases_missing_table;
            result_.audit.push_back(audit_row(phase, config_.phases.span_basis, false, "missing_dcr_table"));
            return;
        }
        CorrectionOptions co;
        co.grid_step = config_.phases.grid_step;
        co.cells_series = config_.system.cell_count_series;
        co.one_c_current = config_.system.one_c_current();
        PartialQocvCurve partial = correct_overvoltage(phase, &t->second, co);
        const bool wanted = config_.direction == DirectionSelection::Both ||
                            (config_.direction == DirectionSelection::Charge) == (phase.direction == Direction::Charge);
        if (!wanted) return;
        groups_[{period_of(phase.start(), config_.qocv_period), phase.direction}].push_back(std::move(partial));
    }

    const RunConfig& config_;
    ReconstructionResult& result_;
    std::map<PeriodTag, std::vector<DcrPulse>> buckets_;
    std::map<PeriodTag, std::vector<OperationalPhase>> waiting_;
    std::set<PeriodTag> built_;
    std::map<CurveKey, std::vector<PartialQocvCurve>> groups_;
};

}  // namespace

QocvStageResult fuse_partials(std::map<CurveKey, std::vector<PartialQocvCurve>> groups, const RunConfig& config) {
    QocvStageResult out;
    for (auto& [key, partials] : groups) {
        out.partial_counts[key] = partials.size();
        try {
            if (partials.size() < config.fuse.min_phases_per_period) throw InsufficientPhases(partials.size());
            AlignResult aligned = align_partials(partials, config.align);
            partials.clear();
            QocvCurve curve = fuse(aligned.partials, config.fuse);
            curve.system_id = config.system.system_id;
            curve.direction = key.direction;
            curve.period = key.period;
            curve.cells_series = config.system.cell_count_series;
            aligned.partials.clear();
            out.alignment.emplace(key, std::move(aligned));
            out.curves.push_back(std::move(curve));
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::InsufficientData && e.kind() != ErrorKind::Domain) throw;
            out.failures.push_back({key, out.partial_counts[key], e.what()});
        }
    }
    return out;
}

ReconstructionResult reconstruct(const std::vector<std::filesystem::path>& files, const RunConfig& config,
                                 const SohSeries& soh) {
    ReconstructionResult result;
    CorrectionStage stage(config, result);
    FrontEnd fe(config, soh);
    fe.on_pulse = [&](const DcrPulse& p) { stage.add_pulse(p); };
    fe.on_phase = [&](OperationalPhase&& p) { stage.add_phase(std::move(p)); };
    fe.on_audit = [&](const PhaseAuditRow& row) { result.audit.push_back(row); };
    Instant next_check = 0;
    fe.on_record = [&](const TelemetryRecord& r) {
        if (r.timestamp >= next_check) {
            stage.advance(r.timestamp);
            next_check = r.timestamp + 3600;
        }
    };
    fe.run(files);
    stage.finish();
    result.ingest = fe.ingest();
    result.soc = fe.soc();
    result.counters = fe.counters();
    std::stable_sort(result.audit.begin(), result.audit.end(), [](const PhaseAuditRow& a, const PhaseAuditRow& b) {
        return a.start != b.start ? a.start < b.start : a.phase_id < b.phase_id;
    });
    result.qocv = fuse_partials(stage.take_groups(), config);
    return result;
}

std::map<PeriodTag, DcrTable> yearly_dcr_tables(const std::vector<DcrPulse>& pulses, const DcrTableOptions& options) {
    std::map<PeriodTag, std::vector<DcrPulse>> by_year;
    for (const auto& p : pulses) by_year[period_of(p.t_start, PeriodKind::Year)].push_back(p);
    std::map<PeriodTag, DcrTable> out;
    for (const auto& [year, list] : by_year) {
        try {
            out.emplace(year, build_table(list, year.start(), year.end(), options));
        } catch (const EmptyTable&) {
        }
    }
    return out;
}

std::vector<TrendRequest> default_trend_requests() {
    return {{"soc_0_10", {0, 10}, {20, 25}},
            {"soc_40_60", {40, 60}, {20, 25}},
            {"soc_90_100", {90, 100}, {20, 25}},
            {"soc_0_100", {0, 100}, {20, 25}}};
}

DiffStageResult differentiate(const std::vector<QocvCurve>& curves, const DiffOptions& options) {
    DiffStageResult out;
    for (const auto& c : curves) {
        out.ic.push_back(ic_curve(c, options));
        out.dv.push_back(dv_curve(c, options));
    }
    return out;
}

FoiStageResult analyse_fois(const std::vector<FoiSpec>& catalog, const std::vector<DiffCurve>& ic,
                            const std::vector<DiffCurve>& dv, double significance_floor) {
    FoiStageResult out;
    for (const auto& spec : catalog) {
        const auto& curves = spec.curve_kind == DiffKind::IncrementalCapacity ? ic : dv;
        for (const auto& c : curves) out.observations.push_back(locate(spec, c));
        for (const auto q : spec.quantities()) {
            try {
                out.tracks.push_back(track(spec, q, curves));
            } catch (const InsufficientObservations& e) {
                out.skipped.emplace_back(spec.foi_id, to_string(q) + ": " + e.what());
            }
        }
    }
    out.report = attribute_dm(out.tracks, catalog, significance_floor);
    return out;
}

std::vector<TrackSeries> track_series(const std::vector<FoiTrack>& tracks) {
    std::vector<TrackSeries> out;
    for (const auto& t : tracks) {
        TrackSeries s;
        s.foi_id = t.foi_id;
        s.feature = t.quantity;
        for (const auto& p : t.points) s.values[p.period] = p.normalized;
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace ocvtrack

#include "ocvtrack/phases.hpp"

#include <algorithm>
#include <cmath>

namespace ocvtrack {

double OperationalPhase::soc_span(SpanBasis basis) const {
    if (samples.empty()) return 0.0;
    const double span = std::fabs(samples.back().soc - samples.front().soc);
    return basis == SpanBasis::Nominal ? span * nominal_scale : span;
}

double OperationalPhase::max_dynamic() const {
    double m = 0.0;
    for (std::size_t k = 1; k < samples.size(); ++k) {
        const double dt = static_cast<double>(samples[k].t - samples[k - 1].t);
        m = std::max(m, std::fabs(samples[k].i - samples[k - 1].i) / dt);
    }
    return m;
}

PhaseSplitter::PhaseSplitter(double idle_threshold_a) : idle_(idle_threshold_a) {
    if (!(idle_ > 0.0)) throw ConfigError("idle threshold must be > 0");
}

void PhaseSplitter::close(std::vector<OperationalPhase>& closed) {
    if (!open_) return;
    closed.push_back(std::move(*open_));
    open_.reset();
}

void PhaseSplitter::push(const TelemetryRecord& r, const SocSample& soc, double nominal_scale,
                         std::vector<OperationalPhase>& closed) {
    if (std::fabs(r.current) < idle_) {
        close(closed);
        return;
    }
    const Direction dir = r.current > 0.0 ? Direction::Charge : Direction::Discharge;
    if (open_ && (open_->direction != dir || open_->nominal_scale != nominal_scale)) close(closed);
    if (!open_) {
        open_.emplace();
        open_->id = std::to_string(next_id_++);
        open_->direction = dir;
        open_->nominal_scale = nominal_scale;
        open_->anchored = soc.anchored;
    }
    open_->samples.push_back({r.timestamp, r.voltage, r.current, soc.soc, r.temperature});
}

void PhaseSplitter::mark_gap(std::vector<OperationalPhase>& closed) { close(closed); }

void PhaseSplitter::finish(std::vector<OperationalPhase>& closed) { close(closed); }

std::vector<OperationalPhase> split_by_sign(const std::vector<StreamItem>& stream, const std::vector<double>& soc,
                                            const SystemConfig& config, const PhaseOptions& options) {
    PhaseSplitter splitter(options.idle_fraction * config.one_c_current());
    std::vector<OperationalPhase> out;
    std::size_t k = 0;
    for (const auto& item : stream) {
        if (std::holds_alternative<GapMarker>(item)) {
            splitter.mark_gap(out);
            continue;
        }
        if (k >= soc.size()) throw DataError("split_by_sign: SOC series shorter than stream");
        const double s = soc[k++];
        splitter.push(std::get<TelemetryRecord>(item), SocSample{s, s, true}, 1.0, out);
    }
    splitter.finish(out);
    return out;
}

std::vector<OperationalPhase> filter_throughput(const std::vector<OperationalPhase>& phases, double min_soc_span,
                                                SpanBasis basis) {
    std::vector<OperationalPhase> out;
    for (const auto& p : phases)
        if (p.soc_span(basis) >= min_soc_span) out.push_back(p);
    return out;
}

namespace {

void split_one(const OperationalPhase& p, double limit, std::vector<OperationalPhase>& out) {
    std::size_t begin = 0;
    int fragment = 0;
    bool split = false;
    auto emit = [&](std::size_t b, std::size_t e) {
        OperationalPhase f;
        f.id = split ? p.id + "." + std::to_string(++fragment) : p.id;
        f.direction = p.direction;
        f.nominal_scale = p.nominal_scale;
        f.anchored = p.anchored;
        f.samples.assign(p.samples.begin() + static_cast<std::ptrdiff_t>(b),
                         p.samples.begin() + static_cast<std::ptrdiff_t>(e));
        out.push_back(std::move(f));
    };
    std::vector<std::size_t> cuts;
    for (std::size_t k = 1; k < p.samples.size(); ++k) {
        const double dt = static_cast<double>(p.samples[k].t - p.samples[k - 1].t);
        if (std::fabs(p.samples[k].i - p.samples[k - 1].i) / dt > limit) cuts.push_back(k);
    }
    if (cuts.empty()) {
        out.push_back(p);
        return;
    }
    split = true;
    for (const std::size_t c : cuts) {
        emit(begin, c);
        begin = c;
    }
    emit(begin, p.samples.size());
}

}  // namespace

std::vector<OperationalPhase> filter_dynamics(const std::vector<OperationalPhase>& phases, double one_c_current,
                                              double max_dynamic_fraction) {
    const double limit = max_dynamic_fraction * one_c_current;
    std::vector<OperationalPhase> out;
    for (const auto& p : phases) split_one(p, limit, out);
    return out;
}

PhaseAuditRow audit_row(const OperationalPhase& phase, SpanBasis basis, bool kept, std::string reason) {
    PhaseAuditRow row;
    row.phase_id = phase.id;
    row.direction = phase.direction;
    row.start = phase.start();
    row.end = phase.end();
    row.soc_span = phase.soc_span(basis);
    row.max_dynamic = phase.max_dynamic();
    row.kept = kept;
    row.reason = std::move(reason);
    return row;
}

FilterOutcome apply_phase_filters(OperationalPhase phase, const PhaseOptions& options, double one_c_current) {
    FilterOutcome out;
    if (phase.soc_span(options.span_basis) < options.min_soc_span) {
        out.audit.push_back(audit_row(phase, options.span_basis, false, "throughput"));
        return out;
    }
    std::vector<OperationalPhase> one;
    one.push_back(std::move(phase));
    auto fragments = filter_dynamics(one, one_c_current, options.max_dynamic_fraction);
    if (fragments.size() > 1)
        out.audit.push_back(audit_row(one.front(), options.span_basis, false, "dynamics_split"));
    for (auto& f : fragments) {
        if (f.soc_span(options.span_basis) < options.min_soc_span) {
            out.audit.push_back(audit_row(f, options.span_basis, false, "throughput"));
            continue;
        }
        out.kept.push_back(std::move(f));
    }
    return out;
}

PartialQocvCurve correct_overvoltage(const OperationalPhase& phase, const DcrTable* table,
                                     const CorrectionOptions& options) {
    if (table == nullptr || phase.samples.empty() || !table->covers(phase.start())) throw MissingDcrTable();
    if (!(options.grid_step > 0.0) || options.cells_series < 1) throw ConfigError("bad correction options");

    struct Pt {
        double soc, v;
        bool extrap;
    };
    std::vector<Pt> pts;
    pts.reserve(phase.samples.size());
    double abs_i = 0.0;
    const double cells = static_cast<double>(options.cells_series);
    for (const auto& s : phase.samples) {
        const DcrLookup dcr = table->lookup(s.soc, s.temp);
        pts.push_back({s.soc * phase.nominal_scale, corrected_voltage(s.v, s.i, dcr.ohms) / cells, dcr.extrapolated});
        abs_i += std::fabs(s.i);
    }
    std::stable_sort(pts.begin(), pts.end(), [](const Pt& a, const Pt& b) { return a.soc < b.soc; });
    // Equal SOC values (e.g. pinned at a full-charge anchor) collapse to their mean voltage.
    std::vector<Pt> uniq;
    for (std::size_t k = 0; k < pts.size();) {
        std::size_t m = k;
        double vs = 0.0;
        bool ex = false;
        while (m < pts.size() && pts[m].soc == pts[k].soc) {
            vs += pts[m].v;
            ex = ex || pts[m].extrap;
            ++m;
        }
        uniq.push_back({pts[k].soc, vs / static_cast<double>(m - k), ex});
        k = m;
    }

    PartialQocvCurve out;
    out.source_phase_id = phase.id;
    out.direction = phase.direction;
    out.start = phase.start();
    out.mean_c_rate = abs_i / static_cast<double>(phase.samples.size()) / options.one_c_current;
    if (uniq.size() < 2) return out;

    const double step = options.grid_step;
    const long g0 = static_cast<long>(std::ceil(uniq.front().soc / step - 1e-9));
    const long g1 = static_cast<long>(std::floor(uniq.back().soc / step + 1e-9));
    std::size_t seg = 0;
    for (long g = g0; g <= g1; ++g) {
        const double x = std::clamp(static_cast<double>(g) * step, uniq.front().soc, uniq.back().soc);
        while (seg + 2 < uniq.size() && uniq[seg + 1].soc < x) ++seg;
        const Pt& a = uniq[seg];
        const Pt& b = uniq[seg + 1];
        const double w = (x - a.soc) / (b.soc - a.soc);
        const double v = a.v + w * (b.v - a.v);
        const bool ex = (w < 1.0 && a.extrap) || (w > 0.0 && b.extrap);
        out.points.push_back({static_cast<double>(g) * step, v, ex});
    }
    if (phase.direction == Direction::Discharge) std::reverse(out.points.begin(), out.points.end());
    return out;
}

}  // namespace ocvtrack

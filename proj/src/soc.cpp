#include "ocvtrack/soc.hpp"

#include <algorithm>
#include <cmath>

#include "ocvtrack/error.hpp"

namespace ocvtrack {

SocIntegrator::SocIntegrator(const SystemConfig& config, SocOptions options)
    : config_(config), options_(std::move(options)) {
    nominal_ = config_.nominal_capacity_ah;
    if (!(nominal_ > 0.0)) throw ConfigError("reference capacity must be > 0");
    std::sort(options_.capacity.begin(), options_.capacity.end(),
              [](const CapacityEpoch& a, const CapacityEpoch& b) { return a.from < b.from; });
    for (const auto& e : options_.capacity)
        if (!(e.capacity_ah > 0.0)) throw ConfigError("reference capacity must be > 0");
    capacity_ = nominal_;
}

double SocIntegrator::capacity_at(Instant t) const {
    double c = nominal_;
    for (const auto& e : options_.capacity) {
        if (e.from > t) break;
        c = e.capacity_ah;
    }
    if (!options_.capacity.empty() && t < options_.capacity.front().from) c = options_.capacity.front().capacity_ah;
    return c;
}

void SocIntegrator::mark_gap() {
    gap_pending_ = true;
    in_hold_ = false;
}

SocSample SocIntegrator::update(const TelemetryRecord& r) {
    const double cap = capacity_at(r.timestamp);
    if (!have_prev_) {
        capacity_ = cap;
        if (options_.initial_soc) {
            soc_ = *options_.initial_soc;
            anchored_ = true;
            anchors_.push_back({r.timestamp, AnchorKind::ManualAnchor, soc_});
        } else {
            soc_ = options_.unanchored_start_soc;
        }
        have_prev_ = true;
    } else {
        const Instant dt = r.timestamp - prev_t_;
        if (gap_pending_) {
            skipped_seconds_ += static_cast<std::uint64_t>(dt);
        } else {
            soc_ += 0.5 * (prev_i_ + r.current) * static_cast<double>(dt) / (3600.0 * capacity_) * 100.0;
        }
        if (cap != capacity_) {
            // A new reference capacity keeps the charge deficit from full.
            soc_ = 100.0 - (100.0 - soc_) * capacity_ / cap;
            capacity_ = cap;
        }
    }
    gap_pending_ = false;
    prev_t_ = r.timestamp;
    prev_i_ = r.current;

    const bool at_full = r.voltage >= config_.eoc_voltage && std::fabs(r.current) <= config_.eoc_taper_current;
    if (at_full) {
        if (!in_hold_) {
            in_hold_ = true;
            hold_anchored_ = false;
            hold_start_ = r.timestamp;
        }
        if (!hold_anchored_ && r.timestamp - hold_start_ >= options_.anchor_hold_s) {
            anchors_.push_back({r.timestamp, AnchorKind::FullChargeAnchor, soc_});
            hold_anchored_ = true;
            anchored_ = true;
        }
        if (hold_anchored_) soc_ = 100.0;  // pinned while the full-charge condition persists
    } else {
        in_hold_ = false;
    }

    if (soc_ < options_.clamp_low || soc_ > options_.clamp_high) {
        soc_ = std::clamp(soc_, options_.clamp_low, options_.clamp_high);
        ++clamp_count_;
    }
    return {soc_, soc_ * capacity_ / nominal_, anchored_};
}

std::vector<double> SocIntegrator::anchor_drifts() const {
    std::vector<double> out;
    for (const auto& a : anchors_)
        if (a.kind == AnchorKind::FullChargeAnchor) out.push_back(a.soc_before - 100.0);
    return out;
}

SocSeries compute_soc(const std::vector<StreamItem>& stream, const SystemConfig& config, SocOptions options) {
    const bool backfill = !options.initial_soc.has_value();
    const double clamp_low = options.clamp_low;
    const double clamp_high = options.clamp_high;
    SocIntegrator integ(config, std::move(options));
    SocSeries out;
    std::size_t first_anchor_index = SIZE_MAX;
    for (const auto& item : stream) {
        if (const auto* gap = std::get_if<GapMarker>(&item)) {
            (void)gap;
            integ.mark_gap();
            continue;
        }
        const auto& r = std::get<TelemetryRecord>(item);
        const SocSample s = integ.update(r);
        if (s.anchored && first_anchor_index == SIZE_MAX) first_anchor_index = out.soc.size();
        out.soc.push_back(s.soc);
    }
    if (out.soc.empty()) throw InsufficientData("compute_soc: empty stream");
    out.anchor_events = integ.anchors();
    out.reference_capacity = integ.reference_capacity();
    out.clamp_count = integ.clamp_count();
    out.anchor_drifts = integ.anchor_drifts();
    out.unanchored = out.anchor_events.empty();
    if (backfill && first_anchor_index != SIZE_MAX && first_anchor_index > 0) {
        const double shift = 100.0 - out.anchor_events.front().soc_before;
        for (std::size_t i = 0; i < first_anchor_index; ++i)
            out.soc[i] = std::clamp(out.soc[i] + shift, clamp_low, clamp_high);
    }
    return out;
}

}  // namespace ocvtrack

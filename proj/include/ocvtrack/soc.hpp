#pragma once

#include <optional>
#include <vector>

#include "ocvtrack/telemetry.hpp"

namespace ocvtrack {

enum class AnchorKind { FullChargeAnchor, ManualAnchor };

struct AnchorEvent {
    Instant timestamp = 0;
    AnchorKind kind = AnchorKind::FullChargeAnchor;
    double soc_before = 0.0;  // value just before the reset; drift = soc_before - 100 for full-charge anchors
};

// Reference capacity in force from `from` on (e.g. an externally estimated SOH).
struct CapacityEpoch {
    Instant from = 0;
    double capacity_ah = 0.0;
};

struct SocOptions {
    std::optional<double> initial_soc;  // known start value; otherwise 50 % and unanchored
    double unanchored_start_soc = 50.0;
    Instant anchor_hold_s = 60;
    double clamp_low = -5.0;
    double clamp_high = 105.0;
    std::vector<CapacityEpoch> capacity;  // empty: reference = nominal
};

struct SocSample {
    double soc = 0.0;          // percent of the reference capacity
    double nominal_soc = 0.0;  // percent of nominal capacity
    bool anchored = false;     // an anchor has been seen at or before this sample
};

// Streaming coulomb counter with full-charge anchoring.
class SocIntegrator {
public:
    SocIntegrator(const SystemConfig& config, SocOptions options);

    SocSample update(const TelemetryRecord& r);
    void mark_gap();

    double reference_capacity() const { return capacity_; }
    double nominal_scale() const { return capacity_ / nominal_; }  // reference -> nominal percent
    const std::vector<AnchorEvent>& anchors() const { return anchors_; }
    std::vector<double> anchor_drifts() const;  // soc_before - 100 per full-charge anchor
    std::uint64_t clamp_count() const { return clamp_count_; }
    std::uint64_t skipped_seconds() const { return skipped_seconds_; }
    bool anchored() const { return anchored_; }

private:
    double capacity_at(Instant t) const;

    SystemConfig config_;
    SocOptions options_;
    double nominal_ = 0.0;
    double capacity_ = 0.0;
    double soc_ = 0.0;
    bool have_prev_ = false;
    bool gap_pending_ = false;
    Instant prev_t_ = 0;
    double prev_i_ = 0.0;
    bool in_hold_ = false;
    bool hold_anchored_ = false;
    Instant hold_start_ = 0;
    bool anchored_ = false;
    std::vector<AnchorEvent> anchors_;
    std::uint64_t clamp_count_ = 0;
    std::uint64_t skipped_seconds_ = 0;
};

struct SocSeries {
    std::vector<double> soc;  // one entry per TelemetryRecord, percent of reference capacity
    std::vector<AnchorEvent> anchor_events;
    double reference_capacity = 0.0;  // at the end of the series
    bool unanchored = true;           // no anchor at all: start value assumed, low confidence
    std::uint64_t clamp_count = 0;
    std::vector<double> anchor_drifts;
};

// Whole-series variant. Records before the first full-charge anchor are
// back-filled from that anchor when no initial SOC is given.
SocSeries compute_soc(const std::vector<StreamItem>& stream, const SystemConfig& config, SocOptions options = {});

}  // namespace ocvtrack

#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ocvtrack/diff.hpp"
#include "ocvtrack/stats.hpp"

namespace ocvtrack {

enum class DegradationMode { LLI, LAM_NE, LAM_PE };
std::string to_string(DegradationMode dm);
DegradationMode degradation_mode_from_string(const std::string& text);

enum class FeatureKind { Peak, Valley, PeakDistance };
enum class DriftSign { Increase, Decrease };

struct Window {
    double lo = 0.0;
    double hi = 0.0;
};

// Expected drift of one tracked quantity and the modes it points to.
struct DmHypothesis {
    FoiQuantity quantity = FoiQuantity::Intensity;
    DriftSign expect = DriftSign::Decrease;
    std::vector<DegradationMode> dms;
};

struct FoiSpec {
    int foi_id = 0;
    Chemistry chemistry = Chemistry::LmoNmcBlend;
    DiffKind curve_kind = DiffKind::IncrementalCapacity;
    FeatureKind feature = FeatureKind::Peak;
    Window window;
    std::optional<Window> pair_window;  // PeakDistance only
    bool pair_accepts_edge = false;     // the pair extremum may be the curve's end step
    std::vector<DmHypothesis> dm_hypothesis;
    bool low_confidence = false;
    std::string note;

    std::vector<FoiQuantity> quantities() const;
    void validate() const;
};

class UnknownChemistry : public Error {
public:
    explicit UnknownChemistry(const std::string& c) : Error(ErrorKind::Config, "no FOI catalog for chemistry " + c) {}
};

std::vector<FoiSpec> parse_catalog(const nlohmann::json& j);
nlohmann::json catalog_to_json(const std::vector<FoiSpec>& specs);
std::vector<FoiSpec> load_catalog(const std::filesystem::path& path);  // JSON or TOML
const std::vector<FoiSpec>& builtin_catalog_all();
std::vector<FoiSpec> builtin_catalog(Chemistry chemistry);
std::vector<FoiSpec> catalog_for(const std::vector<FoiSpec>& all, Chemistry chemistry);

enum class ObservationStatus { Found, NoExtremumFound, WindowOutOfDomain };
std::string to_string(ObservationStatus s);

struct FoiObservation {
    int foi_id = 0;
    PeriodTag period;
    ObservationStatus status = ObservationStatus::NoExtremumFound;
    double intensity = std::numeric_limits<double>::quiet_NaN();
    double position = std::numeric_limits<double>::quiet_NaN();
    double distance = std::numeric_limits<double>::quiet_NaN();

    bool found() const { return status == ObservationStatus::Found; }
    double value(FoiQuantity q) const;
};

// Extremum inside the window; ties take the smallest x; refined by a
// parabola through the extremum and its neighbours. Never fabricated: a
// window-edge extremum is reported as NoExtremumFound.
FoiObservation locate(const FoiSpec& spec, const DiffCurve& curve);

struct TrackPoint {
    PeriodTag period;
    double years = 0.0;  // since the first period
    double raw = 0.0;
    double normalized = 0.0;  // percent
};

struct FoiTrack {
    int foi_id = 0;
    FoiQuantity quantity = FoiQuantity::Intensity;
    std::vector<TrackPoint> points;
    std::vector<PeriodTag> missing;
    double drift_pp_per_year = 0.0;
    double raw_drift_per_year = 0.0;
    double r_squared = 0.0;
    bool low_confidence = false;
};

class InsufficientObservations : public Error {
public:
    InsufficientObservations() : Error(ErrorKind::InsufficientData, "fewer than two located observations") {}
};

// `curves` are one per period, any order; normalization uses the earliest.
FoiTrack track(const FoiSpec& spec, FoiQuantity quantity, const std::vector<DiffCurve>& curves);
// All quantities of a spec; quantities with too few observations are skipped.
std::vector<FoiTrack> track_all(const FoiSpec& spec, const std::vector<DiffCurve>& curves);

enum class Verdict { Dominant, Possible, NotIndicated };
std::string to_string(Verdict v);

struct DmVerdict {
    DegradationMode dm = DegradationMode::LLI;
    Verdict verdict = Verdict::NotIndicated;
    std::vector<int> supporting;
    std::vector<int> contradicting;
};

struct DmReport {
    std::vector<DmVerdict> modes;  // LLI, LAM_NE, LAM_PE
    const DmVerdict& of(DegradationMode dm) const;
};

DmReport attribute_dm(const std::vector<FoiTrack>& tracks, const std::vector<FoiSpec>& catalog,
                      double significance_floor = 0.5);

nlohmann::json to_json(const DmReport& report);

}  // namespace ocvtrack

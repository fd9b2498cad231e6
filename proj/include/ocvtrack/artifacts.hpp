#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ocvtrack/dcr.hpp"
#include "ocvtrack/diff.hpp"
#include "ocvtrack/foi.hpp"
#include "ocvtrack/phases.hpp"
#include "ocvtrack/qocv.hpp"
#include "ocvtrack/stats.hpp"

// File formats shared by the CLI stages. Every writer is atomic and
// deterministic: same inputs, same bytes.
namespace ocvtrack::artifacts {

std::string curve_stem(const PeriodTag& period, Direction direction);  // "2021_discharge"

// qOCV curve: CSV `voltage_v,mean_soc_pct,n,soc_std_pp` plus a JSON sidecar.
void write_qocv(const std::filesystem::path& csv, const QocvCurve& curve);
QocvCurve read_qocv(const std::filesystem::path& csv);

// IC/DV curve: CSV `x,y` plus a JSON sidecar.
void write_diff(const std::filesystem::path& csv, const DiffCurve& curve);
DiffCurve read_diff(const std::filesystem::path& csv);

void write_pulses(const std::filesystem::path& csv, const std::vector<DcrPulse>& pulses);
void write_dcr_table(const std::filesystem::path& json, const DcrTable& table);
void write_trend(const std::filesystem::path& csv, const DcrTrend& trend);
void write_audit(const std::filesystem::path& csv, const std::vector<PhaseAuditRow>& rows);

void write_track(const std::filesystem::path& csv, const FoiTrack& track);
nlohmann::json tracks_json(const std::vector<FoiTrack>& tracks);
std::vector<FoiTrack> tracks_from_json(const nlohmann::json& j);
void write_observations(const std::filesystem::path& csv, const std::vector<FoiObservation>& obs);

// Table-1 layout: `foi,feature,r,p`.
void write_correlation(const std::filesystem::path& csv, const CorrelationReport& report);

// Files in `dir` (or the file itself) whose name matches prefix*suffix, sorted.
std::vector<std::filesystem::path> collect(const std::filesystem::path& dir_or_file, const std::string& prefix,
                                           const std::string& suffix);

}  // namespace ocvtrack::artifacts

#include "ocvtrack/artifacts.hpp"

#include <algorithm>
#include <cmath>

#include "ocvtrack/io.hpp"

namespace ocvtrack::artifacts {

namespace {

std::filesystem::path sidecar(const std::filesystem::path& csv) {
    std::filesystem::path p = csv;
    p.replace_extension(".json");
    return p;
}

double field(const std::string& text, const std::filesystem::path& path) {
    if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
    return parse_double_field(text, path.string());
}

nlohmann::json source_json(const DiffSource& s) {
    return {{"system_id", s.system_id}, {"period", s.period.str()}, {"direction", to_string(s.direction)}};
}

}  // namespace

std::string curve_stem(const PeriodTag& period, Direction direction) {
    return period.str() + "_" + to_string(direction);
}

void write_qocv(const std::filesystem::path& csv, const QocvCurve& curve) {
    CsvWriter w({"voltage_v", "mean_soc_pct", "n", "soc_std_pp"});
    for (const auto& p : curve.grid) w.cell(p.voltage).cell(p.mean_soc).cell(p.n_contributing).cell(p.soc_std).end_row();
    write_file_atomic(csv, w.str());
    write_json_atomic(sidecar(csv), {{"schema", "ocvtrack.qocv_curve"},
                                     {"version", 1},
                                     {"system_id", curve.system_id},
                                     {"direction", to_string(curve.direction)},
                                     {"period", curve.period.str()},
                                     {"phase_count", curve.phase_count},
                                     {"voltage_step_v", curve.voltage_step},
                                     {"cells_series", curve.cells_series},
                                     {"voltage_basis", "per_cell"},
                                     {"soc_basis", "percent_of_nominal"},
                                     {"monotone_adjustments", curve.monotone_adjustments}});
}

QocvCurve read_qocv(const std::filesystem::path& csv) {
    const auto rows = read_csv(csv, {"voltage_v", "mean_soc_pct", "n", "soc_std_pp"});
    const nlohmann::json meta = nlohmann::json::parse(read_file(sidecar(csv)));
    QocvCurve c;
    try {
        c.system_id = meta.at("system_id").get<std::string>();
        c.direction = direction_from_string(meta.at("direction").get<std::string>());
        c.period = PeriodTag::parse(meta.at("period").get<std::string>());
        c.phase_count = meta.at("phase_count").get<std::size_t>();
        c.voltage_step = meta.at("voltage_step_v").get<double>();
        c.cells_series = meta.at("cells_series").get<int>();
        c.monotone_adjustments = meta.value("monotone_adjustments", std::size_t{0});
    } catch (const nlohmann::json::exception& e) {
        throw DataError(sidecar(csv).string() + ": " + e.what());
    }
    for (const auto& r : rows) {
        QocvPoint p;
        p.voltage = field(r[0], csv);
        p.mean_soc = field(r[1], csv);
        p.n_contributing = static_cast<std::size_t>(field(r[2], csv));
        p.soc_std = field(r[3], csv);
        c.grid.push_back(p);
    }
    if (c.grid.size() < 2) throw DataError(csv.string() + ": curve has fewer than two points");
    return c;
}

void write_diff(const std::filesystem::path& csv, const DiffCurve& curve) {
    CsvWriter w({"x", "y"});
    for (std::size_t k = 0; k < curve.x.size(); ++k) w.cell(curve.x[k]).cell(curve.y[k]).end_row();
    write_file_atomic(csv, w.str());
    const bool ic = curve.kind == DiffKind::IncrementalCapacity;
    write_json_atomic(sidecar(csv), {{"schema", "ocvtrack.diff_curve"},
                                     {"version", 1},
                                     {"kind", to_string(curve.kind)},
                                     {"x_unit", ic ? "V per cell" : "% SOC"},
                                     {"y_unit", ic ? "%Q/V" : "V/%Q"},
                                     {"smoothing_sigma", curve.smoothing_sigma},
                                     {"source", source_json(curve.source)}});
}

DiffCurve read_diff(const std::filesystem::path& csv) {
    const auto rows = read_csv(csv, {"x", "y"});
    const nlohmann::json meta = nlohmann::json::parse(read_file(sidecar(csv)));
    DiffCurve c;
    try {
        c.kind = diff_kind_from_string(meta.at("kind").get<std::string>());
        c.smoothing_sigma = meta.at("smoothing_sigma").get<double>();
        const auto& s = meta.at("source");
        c.source.system_id = s.at("system_id").get<std::string>();
        c.source.period = PeriodTag::parse(s.at("period").get<std::string>());
        c.source.direction = direction_from_string(s.at("direction").get<std::string>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(sidecar(csv).string() + ": " + e.what());
    }
    for (const auto& r : rows) {
        c.x.push_back(field(r[0], csv));
        c.y.push_back(field(r[1], csv));
    }
    if (c.x.size() < 3) throw DataError(csv.string() + ": curve has fewer than three points");
    return c;
}

void write_pulses(const std::filesystem::path& csv, const std::vector<DcrPulse>& pulses) {
    CsvWriter w({"t_start", "t_end", "v1", "v2", "i1", "i2", "soc_pct", "temperature_c", "dcr_ohm"});
    for (const auto& p : pulses) {
        double r = std::numeric_limits<double>::quiet_NaN();
        try {
            r = estimate_dcr(p);
        } catch (const ZeroCurrentDelta&) {
        }
        w.cell(format_rfc3339(p.t_start)).cell(format_rfc3339(p.t_end)).cell(p.v1).cell(p.v2).cell(p.i1).cell(p.i2);
        w.cell(p.soc_at_pulse).cell(p.temp_at_pulse).cell(r).end_row();
    }
    write_file_atomic(csv, w.str());
}

void write_dcr_table(const std::filesystem::path& json, const DcrTable& table) {
    nlohmann::json j = table;
    write_json_atomic(json, j);
}

void write_trend(const std::filesystem::path& csv, const DcrTrend& trend) {
    CsvWriter w({"year", "relative_dcr_pct"});
    for (std::size_t k = 0; k < trend.year_starts.size(); ++k)
        w.cell(period_of(trend.year_starts[k], PeriodKind::Year).str()).cell(trend.relative_pct[k]).end_row();
    w.cell("gradient_pp_per_year").cell(trend.gradient_pp_per_year).end_row();
    write_file_atomic(csv, w.str());
}

void write_audit(const std::filesystem::path& csv, const std::vector<PhaseAuditRow>& rows) {
    CsvWriter w({"phase_id", "direction", "start", "end", "soc_span_pct", "max_dynamic_a_per_s", "kept", "reason"});
    for (const auto& r : rows) {
        w.cell(r.phase_id).cell(to_string(r.direction)).cell(format_rfc3339(r.start)).cell(format_rfc3339(r.end));
        w.cell(r.soc_span).cell(r.max_dynamic).cell(r.kept ? "true" : "false").cell(r.reason).end_row();
    }
    write_file_atomic(csv, w.str());
}

void write_track(const std::filesystem::path& csv, const FoiTrack& track) {
    CsvWriter w({"period", "raw", "normalized"});
    for (const auto& p : track.points) w.cell(p.period.str()).cell(p.raw).cell(p.normalized).end_row();
    write_file_atomic(csv, w.str());
}

nlohmann::json tracks_json(const std::vector<FoiTrack>& tracks) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& t : tracks) {
        nlohmann::json pts = nlohmann::json::array();
        for (const auto& p : t.points)
            pts.push_back({{"period", p.period.str()}, {"years", p.years}, {"raw", p.raw}, {"normalized", p.normalized}});
        nlohmann::json missing = nlohmann::json::array();
        for (const auto& m : t.missing) missing.push_back(m.str());
        arr.push_back({{"foi_id", t.foi_id},
                       {"feature", to_string(t.quantity)},
                       {"drift_pp_per_year", t.drift_pp_per_year},
                       {"raw_drift_per_year", t.raw_drift_per_year},
                       {"r_squared", t.r_squared},
                       {"low_confidence", t.low_confidence},
                       {"points", pts},
                       {"missing", missing}});
    }
    return {{"schema", "ocvtrack.foi_tracks"}, {"version", 1}, {"tracks", arr}};
}

std::vector<FoiTrack> tracks_from_json(const nlohmann::json& j) {
    std::vector<FoiTrack> out;
    try {
        for (const auto& e : j.at("tracks")) {
            FoiTrack t;
            t.foi_id = e.at("foi_id").get<int>();
            t.quantity = foi_quantity_from_string(e.at("feature").get<std::string>());
            t.drift_pp_per_year = e.at("drift_pp_per_year").get<double>();
            t.raw_drift_per_year = e.at("raw_drift_per_year").get<double>();
            t.r_squared = e.at("r_squared").get<double>();
            t.low_confidence = e.value("low_confidence", false);
            for (const auto& p : e.at("points"))
                t.points.push_back({PeriodTag::parse(p.at("period").get<std::string>()), p.at("years").get<double>(),
                                    p.at("raw").get<double>(), p.at("normalized").get<double>()});
            for (const auto& m : e.at("missing")) t.missing.push_back(PeriodTag::parse(m.get<std::string>()));
            out.push_back(std::move(t));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("FOI tracks: ") + e.what());
    }
    return out;
}

void write_observations(const std::filesystem::path& csv, const std::vector<FoiObservation>& obs) {
    CsvWriter w({"foi", "period", "status", "intensity", "position", "distance"});
    for (const auto& o : obs) {
        w.cell(o.foi_id).cell(o.period.str()).cell(to_string(o.status));
        w.cell(o.intensity).cell(o.position).cell(o.distance).end_row();
    }
    write_file_atomic(csv, w.str());
}

void write_correlation(const std::filesystem::path& csv, const CorrelationReport& report) {
    CsvWriter w({"foi", "feature", "r", "p"});
    for (const auto& r : report.results) w.cell(r.foi_id).cell(to_string(r.feature)).cell(r.r).cell(r.p_value).end_row();
    write_file_atomic(csv, w.str());
}

std::vector<std::filesystem::path> collect(const std::filesystem::path& dir_or_file, const std::string& prefix,
                                           const std::string& suffix) {
    if (!std::filesystem::exists(dir_or_file)) throw MissingInput(dir_or_file.string());
    if (!std::filesystem::is_directory(dir_or_file)) return {dir_or_file};
    std::vector<std::filesystem::path> out;
    for (const auto& e : std::filesystem::directory_iterator(dir_or_file)) {
        const std::string name = e.path().filename().string();
        if (e.is_regular_file() && name.size() >= prefix.size() + suffix.size() && name.rfind(prefix, 0) == 0 &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace ocvtrack::artifacts

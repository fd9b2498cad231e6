// ocvtrack: qOCV, IC/DV and FOI tracking for home storage telemetry.
//
// Every stage reads its inputs completely before anything is written, and
// each artifact is renamed into place, so a failing run leaves no partial
// outputs behind. Exit codes follow ocvtrack::ErrorKind.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <optional>
#include <set>

#include "ocvtrack/artifacts.hpp"
#include "ocvtrack/config.hpp"
#include "ocvtrack/io.hpp"
#include "ocvtrack/pipeline.hpp"
#include "ocvtrack/sim.hpp"
#include "ocvtrack/svg.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ocvtrack;

namespace {

constexpr const char* kVersion = "1.0.0";

struct CommonArgs {
    std::string config;
    std::vector<std::string> inputs;
    std::string out;
    std::string period;
    std::string direction;
    std::string chemistry;
    std::string soh;
};

// Output files of one run, recorded relative to the output directory so the
// manifest does not depend on where the run was placed.
class OutputSet {
public:
    explicit OutputSet(fs::path root) : root_(std::move(root)) {}

    fs::path path(const std::string& rel) {
        rels_.insert(rel);
        return root_ / rel;
    }
    const fs::path& root() const { return root_; }

    json hashes() const {
        json out = json::array();
        for (const auto& rel : rels_) out.push_back({{"path", rel}, {"fnv1a64", hash_file(root_ / rel)}});
        return out;
    }

private:
    fs::path root_;
    std::set<std::string> rels_;
};

json input_entries(const std::vector<fs::path>& files) {
    json out = json::array();
    for (const auto& f : files)
        out.push_back({{"path", f.generic_string()}, {"bytes", fs::file_size(f)}, {"fnv1a64", hash_file(f)}});
    return out;
}

// The output directory is left out so a run hashes the same wherever it lands.
void write_manifest(OutputSet& outs, const std::string& stage, const std::vector<std::string>& argv,
                    const json& inputs, json config, const json& tallies) {
    std::vector<std::string> args;
    for (std::size_t k = 0; k < argv.size(); ++k) {
        if (argv[k] == "--out") {
            ++k;
            continue;
        }
        if (argv[k].rfind("--out=", 0) == 0) continue;
        args.push_back(argv[k]);
    }
    if (config.contains("output")) config.erase("output");
    const std::string config_text = config.dump();
    json m = {{"schema", "ocvtrack.run_manifest"},
              {"version", 1},
              {"tool", {{"name", "ocvtrack"}, {"version", kVersion}}},
              {"stage", stage},
              {"arguments", args},
              {"inputs", inputs},
              {"config", config},
              {"config_fnv1a64", hex64(fnv1a64(config_text))},
              {"tallies", tallies},
              {"outputs", outs.hashes()}};
    write_json_atomic(outs.root() / "manifest.json", m);
}

// Directories expand to the telemetry CSVs they contain.
std::vector<fs::path> telemetry_files(const std::vector<std::string>& inputs) {
    std::vector<fs::path> out;
    for (const auto& in : inputs) {
        const fs::path p(in);
        if (!fs::exists(p)) throw MissingInput(in);
        if (fs::is_directory(p)) {
            auto found = artifacts::collect(p, "", "telemetry.csv");
            if (found.empty()) throw MissingInput(in + "/*telemetry.csv");
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.push_back(p);
        }
    }
    if (out.empty()) throw MissingInput("--input");
    return out;
}

RunConfig resolve_config(const CommonArgs& a, bool need_system) {
    RunConfig c;
    if (!a.config.empty()) {
        if (!fs::exists(a.config)) throw MissingInput(a.config);
        c = load_run_config(a.config);
    }
    if (!a.period.empty()) c.qocv_period = period_kind_from_string(a.period);
    if (!a.direction.empty()) c.direction = direction_selection_from_string(a.direction);
    if (!a.chemistry.empty()) c.system.chemistry = chemistry_from_string(a.chemistry);
    if (!a.soh.empty()) c.soh_csv = a.soh;
    if (!a.out.empty()) c.output_dir = a.out;
    if (need_system) c.validate();
    return c;
}

SohSeries load_soh(const RunConfig& c) {
    if (!c.soh_csv) return {};
    if (!fs::exists(*c.soh_csv)) throw MissingInput(c.soh_csv->string());
    return read_soh_csv(*c.soh_csv);
}

std::vector<FoiSpec> catalog_of(const RunConfig& c) {
    return c.foi_catalog ? catalog_for(load_catalog(*c.foi_catalog), c.system.chemistry)
                         : builtin_catalog(c.system.chemistry);
}

// FOIs are tracked on a single direction; "both" analyses discharge.
Direction foi_direction(const RunConfig& c) {
    return c.direction == DirectionSelection::Charge ? Direction::Charge : Direction::Discharge;
}

json ingest_json(const IngestStats& s) {
    json samples = json::array();
    for (const auto& m : s.malformed_samples)
        samples.push_back({{"file", fs::path(m.file).filename().string()}, {"line", m.line_no}, {"reason", m.reason}});
    return {{"rows_read", s.rows_read},
            {"records", s.records_emitted},
            {"malformed_rows", s.malformed_rows},
            {"malformed_samples", samples},
            {"reordered_rows", s.reordered_rows},
            {"rejected_out_of_order", s.rejected_out_of_order},
            {"rejected_duplicates", s.rejected_duplicates},
            {"gaps", s.gap_count},
            {"gap_seconds", s.gap_seconds},
            {"power_residual_ratio", s.power_residual_ratio()}};
}

json soc_json(const SocSummary& s) {
    double worst = 0.0;
    for (const double d : s.anchor_drifts) worst = std::max(worst, std::fabs(d));
    return {{"anchors", s.anchors},
            {"max_abs_anchor_drift_pp", worst},
            {"clamp_count", s.clamp_count},
            {"skipped_seconds", s.skipped_seconds},
            {"unanchored", s.unanchored}};
}

json counters_json(const FrontEndCounters& c) {
    return {{"records", c.records},
            {"gaps", c.gaps},
            {"phases_split", c.phases_split},
            {"phases_kept", c.phases_kept},
            {"pulses", c.pulses}};
}

// ---- stage writers shared by the individual subcommands and `pipeline` ----

json write_dcr_outputs(OutputSet& outs, const std::vector<DcrPulse>& pulses,
                       const std::map<PeriodTag, DcrTable>& tables, const DcrTableTally& tally,
                       const RunConfig& config) {
    artifacts::write_pulses(outs.path("dcr/pulses.csv"), pulses);
    for (const auto& [period, table] : tables)
        artifacts::write_dcr_table(outs.path("dcr/table_" + period.str() + ".json"), table);
    const auto yearly = yearly_dcr_tables(pulses, config.dcr_table);
    std::vector<DcrTable> ordered;
    for (const auto& [_, t] : yearly) ordered.push_back(t);
    json trends = json::object();
    for (const auto& req : default_trend_requests()) {
        try {
            const DcrTrend trend = fit_trend(ordered, req.soc, req.temp);
            artifacts::write_trend(outs.path("dcr/trend_" + req.label + ".csv"), trend);
            trends[req.label] = {{"gradient_pp_per_year", trend.gradient_pp_per_year}, {"cells_used", trend.cells_used}};
        } catch (const InsufficientYears& e) {
            trends[req.label] = {{"skipped", e.what()}};
        }
    }
    return {{"pulses", pulses.size()},
            {"tables", tables.size()},
            {"accepted", tally.accepted},
            {"negative_resistance", tally.negative_resistance},
            {"zero_current_delta", tally.zero_current_delta},
            {"trends", trends}};
}

json write_qocv_outputs(OutputSet& outs, const ReconstructionResult& r) {
    artifacts::write_audit(outs.path("phase_audit.csv"), r.audit);
    for (const auto& c : r.qocv.curves) {
        const std::string stem = "qocv/qocv_" + artifacts::curve_stem(c.period, c.direction);
        outs.path(stem + ".json");
        artifacts::write_qocv(outs.path(stem + ".csv"), c);
    }
    json groups = json::array();
    for (const auto& [key, n] : r.qocv.partial_counts) {
        json g = {{"period", key.period.str()}, {"direction", to_string(key.direction)}, {"partials", n}};
        if (const auto it = r.qocv.alignment.find(key); it != r.qocv.alignment.end())
            g["alignment"] = {{"dropped_outliers", it->second.dropped_outliers},
                              {"no_overlap", it->second.no_overlap},
                              {"iterations", it->second.iterations},
                              {"converged", it->second.converged}};
        for (const auto& f : r.qocv.failures)
            if (f.key == key) g["failure"] = f.reason;
        groups.push_back(g);
    }
    return {{"curves", r.qocv.curves.size()}, {"groups", groups}, {"phases_missing_dcr_table", r.phases_missing_table}};
}

json write_diff_outputs(OutputSet& outs, const DiffStageResult& d) {
    auto emit = [&outs](const std::string& prefix, const DiffCurve& c) {
        const std::string stem = "diff/" + prefix + artifacts::curve_stem(c.source.period, c.source.direction);
        outs.path(stem + ".json");
        artifacts::write_diff(outs.path(stem + ".csv"), c);
    };
    for (const auto& c : d.ic) emit("ic_", c);
    for (const auto& c : d.dv) emit("dv_", c);
    return {{"ic_curves", d.ic.size()}, {"dv_curves", d.dv.size()}};
}

std::vector<DiffCurve> of_direction(const std::vector<DiffCurve>& curves, Direction d) {
    std::vector<DiffCurve> out;
    for (const auto& c : curves)
        if (c.source.direction == d) out.push_back(c);
    return out;
}

json write_foi_outputs(OutputSet& outs, const FoiStageResult& f) {
    artifacts::write_observations(outs.path("foi/observations.csv"), f.observations);
    write_json_atomic(outs.path("foi/tracks.json"), artifacts::tracks_json(f.tracks));
    for (const auto& t : f.tracks)
        artifacts::write_track(outs.path("foi/foi" + std::to_string(t.foi_id) + "_" + to_string(t.quantity) + ".csv"), t);
    write_json_atomic(outs.path("foi/dm_report.json"), to_json(f.report));
    json skipped = json::array();
    for (const auto& [id, why] : f.skipped) skipped.push_back({{"foi", id}, {"reason", why}});
    return {{"tracks", f.tracks.size()}, {"skipped", skipped}, {"dm_report", to_json(f.report)}};
}

json write_correlation_outputs(OutputSet& outs, const std::vector<FoiTrack>& tracks, const SohSeries& soh,
                               std::size_t min_overlap) {
    const CorrelationReport rep = correlate_tracks(track_series(tracks), soh, min_overlap);
    artifacts::write_correlation(outs.path("correlation.csv"), rep);
    json rows = json::array();
    for (const auto& r : rep.results)
        rows.push_back({{"foi", r.foi_id}, {"feature", to_string(r.feature)}, {"r", r.r}, {"p", r.p_value},
                        {"n", r.n}, {"degenerate", r.degenerate}});
    const json summary = {{"results", rows}, {"skipped", rep.skipped}};
    write_json_atomic(outs.path("correlation.json"), summary);
    return {{"correlations", rep.results.size()}, {"skipped", rep.skipped.size()}};
}

void write_plots(OutputSet& outs, const std::vector<QocvCurve>& curves, const DiffStageResult& d,
                 const std::vector<FoiSpec>& catalog, const std::vector<FoiObservation>& obs) {
    for (const Direction dir : {Direction::Charge, Direction::Discharge}) {
        std::vector<QocvCurve> sel;
        for (const auto& c : curves)
            if (c.direction == dir) sel.push_back(c);
        if (sel.empty()) continue;
        const std::string tag = to_string(dir);
        write_file_atomic(outs.path("plots/qocv_" + tag + ".svg"), svg::render(svg::qocv_overlay(sel)));
        const auto ic = of_direction(d.ic, dir), dv = of_direction(d.dv, dir);
        std::vector<FoiObservation> dir_obs;
        for (const auto& o : obs) dir_obs.push_back(o);
        if (!ic.empty())
            write_file_atomic(outs.path("plots/ic_" + tag + ".svg"), svg::render(svg::diff_overlay(ic, catalog, dir_obs)));
        if (!dv.empty())
            write_file_atomic(outs.path("plots/dv_" + tag + ".svg"), svg::render(svg::diff_overlay(dv, catalog, dir_obs)));
    }
}

// ---- subcommands ----

int cmd_ingest_check(const CommonArgs& a, const std::vector<std::string>& argv) {
    const RunConfig config = resolve_config(a, true);
    const auto files = telemetry_files(a.inputs);
    const SohSeries soh = load_soh(config);
    FrontEnd fe(config, soh);
    fe.run(files);
    OutputSet outs(config.output_dir);
    const json report = {{"ingest", ingest_json(fe.ingest())}, {"soc", soc_json(fe.soc())}, {"stream", counters_json(fe.counters())}};
    write_json_atomic(outs.path("ingest_report.json"), report);
    write_manifest(outs, "ingest-check", argv, input_entries(files), to_json(config), report);
    std::printf("%llu records, %llu malformed, %llu gaps, %zu anchors\n",
                static_cast<unsigned long long>(fe.ingest().records_emitted),
                static_cast<unsigned long long>(fe.ingest().malformed_rows),
                static_cast<unsigned long long>(fe.ingest().gap_count), fe.soc().anchors);
    return 0;
}

int cmd_dcr(const CommonArgs& a, const std::vector<std::string>& argv) {
    const RunConfig config = resolve_config(a, true);
    const auto files = telemetry_files(a.inputs);
    const SohSeries soh = load_soh(config);
    FrontEnd fe(config, soh);
    std::vector<DcrPulse> pulses;
    fe.on_pulse = [&](const DcrPulse& p) { pulses.push_back(p); };
    fe.run(files);
    std::map<PeriodTag, std::vector<DcrPulse>> buckets;
    for (const auto& p : pulses) buckets[period_of(p.t_start, config.dcr_period)].push_back(p);
    std::map<PeriodTag, DcrTable> tables;
    DcrTableTally tally;
    for (const auto& [period, list] : buckets) {
        try {
            tables.emplace(period, build_table(list, period.start(), period.end(), config.dcr_table, &tally));
        } catch (const EmptyTable&) {
        }
    }
    OutputSet outs(config.output_dir);
    const json tallies = write_dcr_outputs(outs, pulses, tables, tally, config);
    write_manifest(outs, "dcr", argv, input_entries(files), to_json(config), tallies);
    std::printf("%zu pulses, %zu tables\n", pulses.size(), tables.size());
    return 0;
}

int cmd_qocv(const CommonArgs& a, const std::vector<std::string>& argv) {
    const RunConfig config = resolve_config(a, true);
    const auto files = telemetry_files(a.inputs);
    const SohSeries soh = load_soh(config);
    const ReconstructionResult r = reconstruct(files, config, soh);
    OutputSet outs(config.output_dir);
    json tallies = {{"ingest", ingest_json(r.ingest)}, {"soc", soc_json(r.soc)}, {"stream", counters_json(r.counters)}};
    tallies["qocv"] = write_qocv_outputs(outs, r);
    write_manifest(outs, "qocv", argv, input_entries(files), to_json(config), tallies);
    std::printf("%zu curves from %llu kept phases\n", r.qocv.curves.size(),
                static_cast<unsigned long long>(r.counters.phases_kept));
    return 0;
}

std::vector<QocvCurve> read_qocv_inputs(const std::vector<std::string>& inputs, std::vector<fs::path>& files) {
    std::vector<QocvCurve> curves;
    for (const auto& in : inputs) {
        fs::path p(in);
        if (fs::is_directory(p) && fs::is_directory(p / "qocv")) p /= "qocv";
        for (const auto& f : artifacts::collect(p, "qocv_", ".csv")) {
            curves.push_back(artifacts::read_qocv(f));
            files.push_back(f);
        }
    }
    if (curves.empty()) throw MissingInput("no qocv_*.csv under the given inputs");
    return curves;
}

std::vector<DiffCurve> read_diff_inputs(const std::vector<std::string>& inputs, const std::string& prefix,
                                        std::vector<fs::path>& files) {
    std::vector<DiffCurve> curves;
    for (const auto& in : inputs) {
        fs::path p(in);
        if (fs::is_directory(p) && fs::is_directory(p / "diff")) p /= "diff";
        if (!fs::is_directory(p)) {
            if (!fs::exists(p)) throw MissingInput(in);
            if (p.filename().string().rfind(prefix, 0) != 0) continue;
        }
        for (const auto& f : artifacts::collect(p, prefix, ".csv")) {
            curves.push_back(artifacts::read_diff(f));
            files.push_back(f);
        }
    }
    return curves;
}

int cmd_diff(const CommonArgs& a, const std::vector<std::string>& argv) {
    const RunConfig config = resolve_config(a, false);
    std::vector<fs::path> files;
    const auto curves = read_qocv_inputs(a.inputs, files);
    const DiffStageResult d = differentiate(curves, config.diff);
    OutputSet outs(config.output_dir);
    const json tallies = write_diff_outputs(outs, d);
    write_manifest(outs, "diff", argv, input_entries(files), to_json(config), tallies);
    std::printf("%zu IC and %zu DV curves\n", d.ic.size(), d.dv.size());
    return 0;
}

int cmd_foi(const CommonArgs& a, const std::vector<std::string>& argv) {
    const RunConfig config = resolve_config(a, false);
    std::vector<fs::path> files;
    const Direction dir = foi_direction(config);
    const auto ic = of_direction(read_diff_inputs(a.inputs, "ic_", files), dir);
    const auto dv = of_direction(read_diff_inputs(a.inputs, "dv_", files), dir);
    if (ic.empty() && dv.empty()) throw MissingInput("no ic_/dv_ curves for direction " + to_string(dir));
    const auto catalog = catalog_of(config);
    const FoiStageResult f = analyse_fois(catalog, ic, dv, config.dm_significance_floor);
    OutputSet outs(config.output_dir);
    const json tallies = write_foi_outputs(outs, f);
    write_manifest(outs, "foi", argv, input_entries(files), to_json(config), tallies);
    std::printf("%zu tracks; LLI %s, LAM_NE %s, LAM_PE %s\n", f.tracks.size(),
                to_string(f.report.of(DegradationMode::LLI).verdict).c_str(),
                to_string(f.report.of(DegradationMode::LAM_NE).verdict).c_str(),
                to_string(f.report.of(DegradationMode::LAM_PE).verdict).c_str());
    return 0;
}

int cmd_correlate(const CommonArgs& a, const std::vector<std::string>& argv) {
    const RunConfig config = resolve_config(a, false);
    if (!config.soh_csv) throw ConfigError("correlate needs --soh or soc.soh_csv");
    std::vector<fs::path> files;
    std::vector<FoiTrack> tracks;
    for (const auto& in : a.inputs) {
        fs::path p(in);
        if (fs::is_directory(p) && fs::exists(p / "foi" / "tracks.json")) p = p / "foi" / "tracks.json";
        else if (fs::is_directory(p)) p /= "tracks.json";
        if (!fs::exists(p)) throw MissingInput(p.string());
        const auto more = artifacts::tracks_from_json(json::parse(read_file(p)));
        tracks.insert(tracks.end(), more.begin(), more.end());
        files.push_back(p);
    }
    const SohSeries soh = load_soh(config);
    files.push_back(*config.soh_csv);
    OutputSet outs(config.output_dir);
    const json tallies = write_correlation_outputs(outs, tracks, soh, config.correlation_min_overlap);
    write_manifest(outs, "correlate", argv, input_entries(files), to_json(config), tallies);
    return 0;
}

struct SimArgs {
    std::uint64_t seed = 42;
    int days = 365;
    int years = 0;
    std::string start = "2021-01-01";
    double lli = 0.0;
    double capacity_fade = 0.0;
    double dcr_growth = 0.0;
    std::string dcr_growth_mode = "compounded";
    double initial_soc = 50.0;
    double noise_v = 0.005;
    double noise_i = 0.05;
    bool no_truth = false;
};

int cmd_simulate(const CommonArgs& a, const SimArgs& s, const std::vector<std::string>& argv) {
    if (a.out.empty()) throw ConfigError("simulate needs --out");
    sim::Degradation deg;
    deg.lli_shift_pp_per_year = s.lli;
    deg.capacity_fade_pp_per_year = s.capacity_fade;
    deg.dcr_growth_pct_per_year = s.dcr_growth;
    if (s.dcr_growth_mode == "linear")
        deg.dcr_growth = sim::DcrGrowth::Linear;
    else if (s.dcr_growth_mode != "compounded")
        throw ConfigError("--dcr-growth-mode must be compounded or linear");
    const Chemistry chem = chemistry_from_string(a.chemistry.empty() ? "lmo" : a.chemistry);
    const sim::SimBattery battery = sim::default_battery(chem, deg);
    sim::LoadScenario sc;
    const auto start = parse_rfc3339(s.start.size() == 10 ? s.start + "T00:00:00Z" : s.start);
    if (!start) throw ConfigError("--start must be YYYY-MM-DD or RFC 3339");
    sc.start = *start;
    sc.days = s.days;
    sc.initial_soc = s.initial_soc;
    sc.noise_v = s.noise_v;
    sc.noise_i = s.noise_i;

    const fs::path dir(a.out);
    OutputSet outs(dir);
    RunConfig rc;
    rc.system = sim::system_config_for(battery, "sim_" + to_string(chem));
    rc.output_dir = "pipeline_out";
    json tallies;
    if (s.years > 0) {
        const auto years = sim::write_campaign(battery, sc, s.years, s.seed, dir, !s.no_truth);
        json per_year = json::array();
        for (const auto& y : years) {
            const std::string stem = "year" + std::to_string(y.index) + "_";
            outs.path(stem + "telemetry.csv");
            outs.path(stem + "event_log.json");
            if (y.outputs.truth) outs.path(stem + "truth.csv");
            per_year.push_back({{"period", y.period.str()}, {"rows", y.outputs.rows}, {"soh_pct", y.soh_pct}});
        }
        outs.path("soh.csv");
        rc.soh_csv = "soh.csv";
        tallies = {{"years", per_year}};
    } else {
        const auto o = sim::write_simulation(battery, sc, s.seed, dir, !s.no_truth);
        outs.path("telemetry.csv");
        outs.path("event_log.json");
        if (o.truth) outs.path("truth.csv");
        tallies = {{"rows", o.rows}};
    }
    json cfg = to_json(rc);
    if (!rc.soh_csv) cfg["soc"].erase("soh_csv");
    write_json_atomic(outs.path("run_config.json"), cfg);
    const json sim_cfg = {{"chemistry", to_string(chem)}, {"seed", s.seed}, {"days", s.days}, {"years", s.years},
                          {"start", s.start}, {"lli_pp_per_year", s.lli}, {"capacity_fade_pp_per_year", s.capacity_fade},
                          {"dcr_growth_pct_per_year", s.dcr_growth}, {"dcr_growth_mode", s.dcr_growth_mode},
                          {"initial_soc_pct", s.initial_soc}, {"noise_v", s.noise_v}, {"noise_i", s.noise_i},
                          {"truth", !s.no_truth}};
    write_manifest(outs, "simulate", argv, json::array(), sim_cfg, tallies);
    return 0;
}

int cmd_pipeline(const CommonArgs& a, const std::vector<std::string>& argv) {
    const RunConfig config = resolve_config(a, true);
    const auto files = telemetry_files(a.inputs);
    const SohSeries soh = load_soh(config);
    const auto catalog = catalog_of(config);
    const ReconstructionResult r = reconstruct(files, config, soh);
    const DiffStageResult d = differentiate(r.qocv.curves, config.diff);
    const Direction dir = foi_direction(config);
    const FoiStageResult f =
        analyse_fois(catalog, of_direction(d.ic, dir), of_direction(d.dv, dir), config.dm_significance_floor);

    OutputSet outs(config.output_dir);
    json tallies = {{"ingest", ingest_json(r.ingest)}, {"soc", soc_json(r.soc)}, {"stream", counters_json(r.counters)}};
    write_json_atomic(outs.path("ingest_report.json"), tallies);
    tallies["dcr"] = write_dcr_outputs(outs, r.pulses, r.dcr_tables, r.dcr_tally, config);
    tallies["qocv"] = write_qocv_outputs(outs, r);
    if (!r.qocv.curves.empty()) {
        const QocvCurve* first = nullptr;
        const QocvCurve* last = nullptr;
        for (const auto& c : r.qocv.curves) {
            if (c.direction != dir) continue;
            if (!first) first = &c;
            last = &c;
        }
        if (first && last && first != last) {
            const double v = common_top_voltage(*first, *last);
            tallies["capacity_fade"] = {{"from", first->period.str()}, {"to", last->period.str()},
                                        {"direction", to_string(dir)}, {"voltage_v", v},
                                        {"fade_pp", capacity_fade(*first, *last, v)}};
        }
    }
    tallies["diff"] = write_diff_outputs(outs, d);
    tallies["foi"] = write_foi_outputs(outs, f);
    if (!soh.empty()) tallies["correlation"] = write_correlation_outputs(outs, f.tracks, soh, config.correlation_min_overlap);
    write_plots(outs, r.qocv.curves, d, catalog, f.observations);
    json in = input_entries(files);
    if (config.soh_csv) in.push_back(input_entries({*config.soh_csv})[0]);
    if (config.foi_catalog) in.push_back(input_entries({*config.foi_catalog})[0]);
    write_manifest(outs, "pipeline", argv, in, to_json(config), tallies);
    std::printf("%zu curves; LLI %s, LAM_NE %s, LAM_PE %s\n", r.qocv.curves.size(),
                to_string(f.report.of(DegradationMode::LLI).verdict).c_str(),
                to_string(f.report.of(DegradationMode::LAM_NE).verdict).c_str(),
                to_string(f.report.of(DegradationMode::LAM_PE).verdict).c_str());
    return 0;
}

int cmd_plot(const CommonArgs& a, const std::vector<std::string>& argv) {
    const RunConfig config = resolve_config(a, false);
    std::vector<fs::path> files;
    const auto curves = read_qocv_inputs(a.inputs, files);
    DiffStageResult d;
    d.ic = read_diff_inputs(a.inputs, "ic_", files);
    d.dv = read_diff_inputs(a.inputs, "dv_", files);
    if (d.ic.empty() && d.dv.empty()) d = differentiate(curves, config.diff);
    const auto catalog = catalog_of(config);
    std::vector<FoiObservation> obs;
    for (const auto& spec : catalog)
        for (const auto& c : spec.curve_kind == DiffKind::IncrementalCapacity ? d.ic : d.dv)
            obs.push_back(locate(spec, c));
    OutputSet outs(config.output_dir);
    write_plots(outs, curves, d, catalog, obs);
    write_manifest(outs, "plot", argv, input_entries(files), to_json(config), json::object());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ocvtrack: quasi-OCV reconstruction and degradation tracking from field telemetry"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    CommonArgs common;
    SimArgs simargs;

    auto add_common = [&](CLI::App* sub, bool inputs_required) {
        sub->add_option("--config", common.config, "TOML or JSON run configuration");
        auto* in = sub->add_option("--input", common.inputs, "input files or directories");
        if (inputs_required) in->required();
        sub->add_option("--out", common.out, "output directory");
        sub->add_option("--period", common.period, "qOCV period")->check(CLI::IsMember({"year", "month"}));
        sub->add_option("--direction", common.direction, "phase direction")
            ->check(CLI::IsMember({"charge", "discharge", "both"}));
        sub->add_option("--chemistry", common.chemistry, "LmoNmcBlend, Nmc or Lfp");
        sub->add_option("--soh", common.soh, "CSV period,soh_pct");
    };

    std::map<std::string, CLI::App*> subs;
    for (const char* name : {"ingest-check", "dcr", "qocv", "diff", "foi", "correlate", "pipeline", "plot"}) {
        subs[name] = app.add_subcommand(name);
        add_common(subs[name], true);
    }
    subs["ingest-check"]->description("validate telemetry and report ingest and SOC quality");
    subs["dcr"]->description("detect pulses, build DCR tables and the ageing trend");
    subs["qocv"]->description("reconstruct per-period qOCV curves");
    subs["diff"]->description("IC and DV curves from qOCV curves");
    subs["foi"]->description("locate and track FOIs, attribute degradation modes");
    subs["correlate"]->description("correlate FOI tracks with an SOH series");
    subs["pipeline"]->description("run every stage");
    subs["plot"]->description("SVG overlays of qOCV, IC and DV curves");

    auto* simulate = app.add_subcommand("simulate", "synthetic telemetry with ground truth");
    add_common(simulate, false);
    simulate->add_option("--seed", simargs.seed, "RNG seed");
    simulate->add_option("--days", simargs.days, "days of telemetry per scenario");
    simulate->add_option("--years", simargs.years, "ageing campaign: one scenario per age 0..N");
    simulate->add_option("--start", simargs.start, "first day (YYYY-MM-DD) or RFC 3339 timestamp");
    simulate->add_option("--lli", simargs.lli, "LLI shift, pp per year");
    simulate->add_option("--capacity-fade", simargs.capacity_fade, "total fade, pp per year");
    simulate->add_option("--dcr-growth", simargs.dcr_growth, "percent per year");
    simulate->add_option("--dcr-growth-mode", simargs.dcr_growth_mode, "linear or compounded");
    simulate->add_option("--initial-soc", simargs.initial_soc, "percent");
    simulate->add_option("--noise-v", simargs.noise_v, "voltage noise sd, V");
    simulate->add_option("--noise-i", simargs.noise_i, "current noise sd, A");
    simulate->add_flag("--no-truth", simargs.no_truth, "skip the per-sample truth sidecar");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return static_cast<int>(ErrorKind::Config);
    }

    const std::vector<std::string> args(argv + 1, argv + argc);
    try {
        if (subs["ingest-check"]->parsed()) return cmd_ingest_check(common, args);
        if (subs["dcr"]->parsed()) return cmd_dcr(common, args);
        if (subs["qocv"]->parsed()) return cmd_qocv(common, args);
        if (subs["diff"]->parsed()) return cmd_diff(common, args);
        if (subs["foi"]->parsed()) return cmd_foi(common, args);
        if (subs["correlate"]->parsed()) return cmd_correlate(common, args);
        if (subs["pipeline"]->parsed()) return cmd_pipeline(common, args);
        if (subs["plot"]->parsed()) return cmd_plot(common, args);
        if (simulate->parsed()) return cmd_simulate(common, simargs, args);
    } catch (const Error& e) {
        std::fprintf(stderr, "ocvtrack: %s\n", e.what());
        return static_cast<int>(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "ocvtrack: internal error: %s\n", e.what());
        return static_cast<int>(ErrorKind::Internal);
    }
    return static_cast<int>(ErrorKind::Internal);
}

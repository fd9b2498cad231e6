#include <doctest.h>

#include "fixtures.hpp"
#include "ocvtrack/config.hpp"

using namespace ocvtrack;

namespace {

const char* kToml = R"(# pipeline settings
[system]
system_id = "home-7"
chemistry = "LmoNmcBlend"
nominal_capacity_ah = 40.0
cell_count_series = 14
eoc_voltage_v = 58.1
eoc_taper_current_a = 0.8
eod_voltage = [
  { from = "2021-01-01T00:00:00Z", voltage_v = 45.0 },
  { from = "2023-06-01T00:00:00Z", voltage_v = 46.0 },
]

[phases]
min_soc_span_pct = 6   # integer promotes to double
span_basis = "reference"

[qocv]
voltage_step_v = 0.002
direction = "discharge"
period = "year"

[dcr]
soc_edges = [0, 25, 50, 75, 100]
temp_edges = [-10.0, 10.0, 30.0]
period = "month"

[output]
dir = 'runs/a'
)";

}  // namespace

TEST_CASE("TOML scalars, arrays and tables") {
    const auto j = parse_toml(R"(
title = "x \"quoted\" é"
n = -12
f = 1.5e3
yes = true
list = [1, 2, [3, "four"]]
dotted.key = 7
inline = { a = 1, b = { c = "d" } }

[[items]]
name = "first"
[[items]]
name = "second"
[nest.deeper]
z = 0.25
)");
    CHECK(j["title"] == "x \"quoted\" \xc3\xa9");
    CHECK(j["n"] == -12);
    CHECK(j["f"] == 1500.0);
    CHECK(j["yes"] == true);
    CHECK(j["list"][2][1] == "four");
    CHECK(j["dotted"]["key"] == 7);
    CHECK(j["inline"]["b"]["c"] == "d");
    CHECK(j["items"].size() == 2);
    CHECK(j["items"][1]["name"] == "second");
    CHECK(j["nest"]["deeper"]["z"] == 0.25);
}

TEST_CASE("TOML errors carry the line") {
    CHECK_THROWS_AS(parse_toml("a = \n"), ConfigError);
    CHECK_THROWS_AS(parse_toml("a = 1\na = 2\n"), ConfigError);
    CHECK_THROWS_AS(parse_toml("[t\n"), ConfigError);
    CHECK_THROWS_AS(parse_toml("s = \"open\n"), ConfigError);
    try {
        parse_toml("ok = 1\n\nbad = [1,\n");
        FAIL("expected an error");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("line") != std::string::npos);
    }
}

TEST_CASE("defaults keep the paper thresholds") {
    const RunConfig c;
    CHECK(c.phases.min_soc_span == 5.0);
    CHECK(c.phases.max_dynamic_fraction == 0.10);
    CHECK(c.dm_significance_floor > 0.0);
    CHECK(c.fuse.min_phases_per_period == 20);
}

TEST_CASE("TOML and JSON configs are equivalent") {
    fixture::TempDir dir("cfg");
    fixture::write_text(dir / "run.toml", kToml);
    const RunConfig t = load_run_config(dir / "run.toml");
    CHECK_NOTHROW(t.validate());
    CHECK(t.system.system_id == "home-7");
    CHECK(t.system.eod_voltage.size() == 2);
    CHECK(t.system.eod_voltage_at(1700000000) == 46.0);
    CHECK(t.phases.min_soc_span == 6.0);
    CHECK(t.phases.span_basis == SpanBasis::Reference);
    CHECK(t.fuse.voltage_step == 0.002);
    CHECK(t.align.voltage_step == 0.002);
    CHECK(t.direction == DirectionSelection::Discharge);
    CHECK(t.dcr_table.soc_edges.size() == 5);
    CHECK(t.output_dir == std::filesystem::path("runs/a"));

    fixture::write_text(dir / "run.json", to_json(t).dump(2));
    const RunConfig j = load_run_config(dir / "run.json");
    CHECK(to_json(j) == to_json(t));
    // The expanded form is a fixed point.
    CHECK(to_json(run_config_from_json(to_json(j))) == to_json(j));
}

TEST_CASE("relative paths resolve against the config file") {
    fixture::TempDir dir("cfgrel");
    fixture::write_text(dir / "sub/run.toml", std::string(kToml) + "\n[foi]\ncatalog = \"cat.json\"\n");
    const RunConfig c = load_run_config(dir / "sub/run.toml");
    REQUIRE(c.foi_catalog.has_value());
    CHECK(*c.foi_catalog == dir.path() / "sub" / "cat.json");
}

TEST_CASE("validation rejects non-positive thresholds") {
    auto base = [] {
        RunConfig c;
        c.system = fixture::system();
        return c;
    };
    CHECK_NOTHROW(base().validate());
    RunConfig c = base();
    c.phases.min_soc_span = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = base();
    c.phases.max_dynamic_fraction = -0.1;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = base();
    c.diff.ic_sigma_v = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = base();
    c.dcr_table.soc_edges = {0, 50, 40};
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = base();
    c.correlation_min_overlap = 2;
    CHECK_THROWS_AS(c.validate(), ConfigError);
}

TEST_CASE("config load errors") {
    fixture::TempDir dir("cfgerr");
    CHECK_THROWS_AS(load_run_config(dir / "absent.toml"), MissingInput);
    fixture::write_text(dir / "bad.json", "{\"phases\": {\"span_basis\": \"sideways\"}}");
    CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
    fixture::write_text(dir / "broken.json", "{\"phases\": ");
    CHECK_THROWS_AS(load_run_config(dir / "broken.json"), ConfigError);
    fixture::write_text(dir / "type.json", "{\"phases\": {\"min_soc_span_pct\": \"five\"}}");
    CHECK_THROWS_AS(load_run_config(dir / "type.json"), ConfigError);
    CHECK_THROWS_AS(direction_selection_from_string("up"), ConfigError);
}

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "ocvtrack/dcr.hpp"
#include "ocvtrack/diff.hpp"
#include "ocvtrack/ingest.hpp"
#include "ocvtrack/phases.hpp"
#include "ocvtrack/qocv.hpp"
#include "ocvtrack/soc.hpp"
#include "ocvtrack/telemetry.hpp"
#include "ocvtrack/time.hpp"

namespace ocvtrack {

// TOML subset: tables, arrays of tables, dotted keys, strings, numbers,
// booleans, arrays and inline tables. Dates are kept as strings.
nlohmann::json parse_toml(std::string_view text);

// `.toml` files go through parse_toml, everything else is JSON.
nlohmann::json load_structured_file(const std::filesystem::path& path);

enum class DirectionSelection { Charge, Discharge, Both };
std::string to_string(DirectionSelection d);
DirectionSelection direction_selection_from_string(std::string_view text);

struct RunConfig {
    SystemConfig system;
    IngestOptions ingest;
    SocOptions soc;
    std::optional<std::filesystem::path> soh_csv;  // per-period SOH, sets the reference capacity
    PulseOptions pulses;
    DcrTableOptions dcr_table;
    PeriodKind dcr_period = PeriodKind::Month;
    PhaseOptions phases;
    AlignOptions align;
    FuseOptions fuse;
    PeriodKind qocv_period = PeriodKind::Year;
    DirectionSelection direction = DirectionSelection::Both;
    DiffOptions diff;
    std::optional<std::filesystem::path> foi_catalog;  // builtin when unset
    double dm_significance_floor = 0.5;
    std::size_t correlation_min_overlap = 3;
    std::filesystem::path output_dir = "out";

    void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);  // fully expanded, defaults included
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace ocvtrack

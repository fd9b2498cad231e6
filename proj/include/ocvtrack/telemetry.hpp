#pragma once

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ocvtrack/time.hpp"

namespace ocvtrack {

enum class Chemistry { LmoNmcBlend, Nmc, Lfp };
enum class Direction { Charge, Discharge };

std::string to_string(Chemistry c);
Chemistry chemistry_from_string(std::string_view text);
std::string to_string(Direction d);
Direction direction_from_string(std::string_view text);

// Current > 0 while charging. Voltage is the system-level terminal voltage.
struct TelemetryRecord {
    Instant timestamp = 0;
    double voltage = 0.0;
    double current = 0.0;
    double power = 0.0;
    double temperature = 0.0;
};

// Emitted between two records more than the gap threshold apart.
struct GapMarker {
    Instant from = 0;
    Instant to = 0;
    Instant length() const { return to - from; }
};

using StreamItem = std::variant<TelemetryRecord, GapMarker>;

struct EodEpoch {
    Instant from = 0;
    double voltage = 0.0;
};

struct SystemConfig {
    std::string system_id = "system";
    Chemistry chemistry = Chemistry::LmoNmcBlend;
    double nominal_capacity_ah = 0.0;
    double nominal_voltage = 0.0;
    int cell_count_series = 1;
    double eoc_voltage = 0.0;
    double eoc_taper_current = 0.0;
    std::vector<EodEpoch> eod_voltage;  // sorted by `from`

    double one_c_current() const { return nominal_capacity_ah; }  // A for a 1 h discharge
    double eod_voltage_at(Instant t) const;
    void validate() const;
};

void to_json(nlohmann::json& j, const SystemConfig& c);
void from_json(const nlohmann::json& j, SystemConfig& c);

}  // namespace ocvtrack

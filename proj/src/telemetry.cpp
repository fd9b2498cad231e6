#include "ocvtrack/telemetry.hpp"

#include <algorithm>

#include "ocvtrack/error.hpp"

namespace ocvtrack {

std::string to_string(Chemistry c) {
    switch (c) {
        case Chemistry::LmoNmcBlend: return "LmoNmcBlend";
        case Chemistry::Nmc: return "Nmc";
        case Chemistry::Lfp: return "Lfp";
    }
    return "?";
}

Chemistry chemistry_from_string(std::string_view text) {
    std::string t(text);
    std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (t == "lmonmcblend" || t == "lmo") return Chemistry::LmoNmcBlend;
    if (t == "nmc") return Chemistry::Nmc;
    if (t == "lfp") return Chemistry::Lfp;
    throw ConfigError("unknown chemistry '" + std::string(text) + "'");
}

std::string to_string(Direction d) { return d == Direction::Charge ? "charge" : "discharge"; }

Direction direction_from_string(std::string_view text) {
    if (text == "charge") return Direction::Charge;
    if (text == "discharge") return Direction::Discharge;
    throw ConfigError("direction must be 'charge' or 'discharge', got '" + std::string(text) + "'");
}

double SystemConfig::eod_voltage_at(Instant t) const {
    if (eod_voltage.empty()) return 0.0;
    double v = eod_voltage.front().voltage;
    for (const auto& e : eod_voltage) {
        if (e.from > t) break;
        v = e.voltage;
    }
    return v;
}

void SystemConfig::validate() const {
    if (!(nominal_capacity_ah > 0.0)) throw ConfigError("nominal_capacity_ah must be > 0");
    if (cell_count_series < 1) throw ConfigError("cell_count_series must be >= 1");
    if (!(eoc_voltage > 0.0)) throw ConfigError("eoc_voltage_v must be > 0");
    if (!(eoc_taper_current > 0.0)) throw ConfigError("eoc_taper_current_a must be > 0");
    for (std::size_t i = 0; i < eod_voltage.size(); ++i) {
        if (!(eoc_voltage > eod_voltage[i].voltage))
            throw ConfigError("eoc_voltage must exceed every eod_voltage epoch");
        if (i > 0 && eod_voltage[i].from <= eod_voltage[i - 1].from)
            throw ConfigError("eod_voltage epochs must be strictly ordered by 'from'");
    }
}

void to_json(nlohmann::json& j, const SystemConfig& c) {
    nlohmann::json eod = nlohmann::json::array();
    for (const auto& e : c.eod_voltage) eod.push_back({{"from", format_rfc3339(e.from)}, {"voltage_v", e.voltage}});
    j = {{"system_id", c.system_id},
         {"chemistry", to_string(c.chemistry)},
         {"nominal_capacity_ah", c.nominal_capacity_ah},
         {"nominal_voltage_v", c.nominal_voltage},
         {"cell_count_series", c.cell_count_series},
         {"eoc_voltage_v", c.eoc_voltage},
         {"eoc_taper_current_a", c.eoc_taper_current},
         {"eod_voltage", eod}};
}

void from_json(const nlohmann::json& j, SystemConfig& c) {
    c.system_id = j.value("system_id", std::string("system"));
    c.chemistry = chemistry_from_string(j.at("chemistry").get<std::string>());
    c.nominal_capacity_ah = j.at("nominal_capacity_ah").get<double>();
    c.nominal_voltage = j.value("nominal_voltage_v", 0.0);
    c.cell_count_series = j.value("cell_count_series", 1);
    c.eoc_voltage = j.at("eoc_voltage_v").get<double>();
    c.eoc_taper_current = j.at("eoc_taper_current_a").get<double>();
    c.eod_voltage.clear();
    if (j.contains("eod_voltage")) {
        const auto& eod = j.at("eod_voltage");
        if (eod.is_number()) {
            c.eod_voltage.push_back({0, eod.get<double>()});
        } else {
            for (const auto& e : eod) {
                Instant from = 0;
                if (e.contains("from")) {
                    const auto parsed = parse_rfc3339(e.at("from").get<std::string>());
                    if (!parsed) throw ConfigError("bad eod_voltage.from timestamp");
                    from = *parsed;
                }
                c.eod_voltage.push_back({from, e.at("voltage_v").get<double>()});
            }
        }
    }
    c.validate();
}

}  // namespace ocvtrack

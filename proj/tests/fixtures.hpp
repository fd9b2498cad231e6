#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "ocvtrack/telemetry.hpp"

namespace fixture {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("ocvtrack_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& p, const std::string& text) {
    std::filesystem::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << text;
}

inline std::string telemetry_csv(const std::vector<ocvtrack::TelemetryRecord>& rows) {
    std::string out = "timestamp,voltage_v,current_a,power_w,temperature_c\n";
    for (const auto& r : rows) {
        out += std::to_string(r.timestamp) + "," + std::to_string(r.voltage) + "," + std::to_string(r.current) + "," +
               std::to_string(r.voltage * r.current) + "," + std::to_string(r.temperature) + "\n";
    }
    return out;
}

inline ocvtrack::TelemetryRecord rec(ocvtrack::Instant t, double v, double i, double temp = 20.0) {
    return {t, v, i, v * i, temp};
}

inline ocvtrack::SystemConfig system(double capacity_ah = 100.0) {
    ocvtrack::SystemConfig c;
    c.system_id = "fixture";
    c.nominal_capacity_ah = capacity_ah;
    c.nominal_voltage = 50.0;
    c.cell_count_series = 14;
    c.eoc_voltage = 58.0;
    c.eoc_taper_current = 1.0;
    c.eod_voltage = {{0, 45.0}};
    return c;
}

}  // namespace fixture

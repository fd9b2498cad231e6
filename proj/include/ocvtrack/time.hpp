#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace ocvtrack {

// Unix epoch seconds, UTC.
using Instant = std::int64_t;

inline constexpr Instant seconds_per_day = 86400;
inline constexpr double seconds_per_year = 365.25 * 86400.0;

struct CivilDate {
    int year = 1970;
    unsigned month = 1;
    unsigned day = 1;
};

std::int64_t days_from_civil(int year, unsigned month, unsigned day);
CivilDate civil_from_days(std::int64_t days);
Instant instant_from_civil(int year, unsigned month, unsigned day, int hour = 0, int minute = 0, int second = 0);
int day_of_year(Instant t);  // 1-based

// Accepts "YYYY-MM-DDTHH:MM:SS[.frac](Z|+HH:MM|-HH:MM)"; 'T' may be a space.
// Fractional seconds are truncated.
std::optional<Instant> parse_rfc3339(std::string_view text);
std::string format_rfc3339(Instant t);

enum class PeriodKind { Year, Month };

std::string to_string(PeriodKind kind);
PeriodKind period_kind_from_string(std::string_view text);

// month == 0 marks a whole-year period.
struct PeriodTag {
    int year = 1970;
    int month = 0;

    auto operator<=>(const PeriodTag&) const = default;

    bool is_month() const { return month != 0; }
    Instant start() const;
    Instant end() const;  // exclusive
    double mid_year() const;  // decimal year of the period midpoint
    std::string str() const;  // "2021" or "2021-03"
    static PeriodTag parse(std::string_view text);
};

PeriodTag period_of(Instant t, PeriodKind kind);
double decimal_year(Instant t);

}  // namespace ocvtrack

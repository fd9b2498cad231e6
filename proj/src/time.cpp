#include "ocvtrack/time.hpp"

#include <charconv>
#include <cstdio>

#include "ocvtrack/error.hpp"

namespace ocvtrack {

// Civil-calendar conversions after H. Hinnant's public-domain algorithms.
std::int64_t days_from_civil(int year, unsigned month, unsigned day) {
    const std::int64_t y = static_cast<std::int64_t>(year) - (month <= 2 ? 1 : 0);
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const std::int64_t yoe = y - era * 400;
    const std::int64_t mp = (month + 9) % 12;
    const std::int64_t doy = (153 * mp + 2) / 5 + day - 1;
    const std::int64_t doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + doe - 719468;
}

CivilDate civil_from_days(std::int64_t z) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const std::int64_t doe = z - era * 146097;
    const std::int64_t yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const std::int64_t mp = (5 * doy + 2) / 153;
    const unsigned d = static_cast<unsigned>(doy - (153 * mp + 2) / 5 + 1);
    const unsigned m = static_cast<unsigned>(mp < 10 ? mp + 3 : mp - 9);
    const std::int64_t y = yoe + era * 400 + (m <= 2 ? 1 : 0);
    return {static_cast<int>(y), m, d};
}

Instant instant_from_civil(int year, unsigned month, unsigned day, int hour, int minute, int second) {
    return days_from_civil(year, month, day) * seconds_per_day + hour * 3600 + minute * 60 + second;
}

static std::int64_t floor_div(std::int64_t a, std::int64_t b) {
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
    return q;
}

int day_of_year(Instant t) {
    const std::int64_t days = floor_div(t, seconds_per_day);
    const CivilDate c = civil_from_days(days);
    return static_cast<int>(days - days_from_civil(c.year, 1, 1)) + 1;
}

namespace {

bool read_digits(std::string_view s, std::size_t pos, std::size_t n, int& out) {
    if (pos + n > s.size()) return false;
    int v = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
        const char c = s[i];
        if (c < '0' || c > '9') return false;
        v = v * 10 + (c - '0');
    }
    out = v;
    return true;
}

}  // namespace

std::optional<Instant> parse_rfc3339(std::string_view s) {
    int year, month, day, hour, minute, second;
    if (!read_digits(s, 0, 4, year) || s.size() < 19) return std::nullopt;
    if (s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != 't' && s[10] != ' ') || s[13] != ':' ||
        s[16] != ':')
        return std::nullopt;
    if (!read_digits(s, 5, 2, month) || !read_digits(s, 8, 2, day) || !read_digits(s, 11, 2, hour) ||
        !read_digits(s, 14, 2, minute) || !read_digits(s, 17, 2, second))
        return std::nullopt;
    if (month < 1 || month > 12 || day < 1 || day > 31 || hour > 23 || minute > 59 || second > 60)
        return std::nullopt;
    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        const std::size_t frac_start = pos;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') ++pos;
        if (pos == frac_start) return std::nullopt;
    }
    if (pos >= s.size()) return std::nullopt;
    int offset = 0;
    if (s[pos] == 'Z' || s[pos] == 'z') {
        ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
        int oh, om;
        if (!read_digits(s, pos + 1, 2, oh) || pos + 3 >= s.size() || s[pos + 3] != ':' ||
            !read_digits(s, pos + 4, 2, om))
            return std::nullopt;
        offset = (oh * 3600 + om * 60) * (s[pos] == '-' ? -1 : 1);
        pos += 6;
    } else {
        return std::nullopt;
    }
    if (pos != s.size()) return std::nullopt;
    return instant_from_civil(year, static_cast<unsigned>(month), static_cast<unsigned>(day), hour, minute,
                              second) -
           offset;
}

std::string format_rfc3339(Instant t) {
    const std::int64_t days = floor_div(t, seconds_per_day);
    const std::int64_t sod = t - days * seconds_per_day;
    const CivilDate c = civil_from_days(days);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", c.year, c.month, c.day,
                  static_cast<int>(sod / 3600), static_cast<int>((sod / 60) % 60), static_cast<int>(sod % 60));
    return buf;
}

std::string to_string(PeriodKind kind) { return kind == PeriodKind::Year ? "year" : "month"; }

PeriodKind period_kind_from_string(std::string_view text) {
    if (text == "year") return PeriodKind::Year;
    if (text == "month") return PeriodKind::Month;
    throw ConfigError("period must be 'year' or 'month', got '" + std::string(text) + "'");
}

Instant PeriodTag::start() const {
    return instant_from_civil(year, static_cast<unsigned>(month == 0 ? 1 : month), 1);
}

Instant PeriodTag::end() const {
    if (month == 0) return instant_from_civil(year + 1, 1, 1);
    if (month == 12) return instant_from_civil(year + 1, 1, 1);
    return instant_from_civil(year, static_cast<unsigned>(month + 1), 1);
}

double PeriodTag::mid_year() const {
    return decimal_year(start() + (end() - start()) / 2);
}

std::string PeriodTag::str() const {
    char buf[16];
    if (month == 0)
        std::snprintf(buf, sizeof buf, "%04d", year);
    else
        std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
    return buf;
}

PeriodTag PeriodTag::parse(std::string_view text) {
    PeriodTag tag;
    int y = 0;
    if (!read_digits(text, 0, 4, y)) throw DataError("bad period tag '" + std::string(text) + "'");
    tag.year = y;
    if (text.size() == 4) return tag;
    int m = 0;
    if (text.size() != 7 || text[4] != '-' || !read_digits(text, 5, 2, m) || m < 1 || m > 12)
        throw DataError("bad period tag '" + std::string(text) + "'");
    tag.month = m;
    return tag;
}

PeriodTag period_of(Instant t, PeriodKind kind) {
    const CivilDate c = civil_from_days(floor_div(t, seconds_per_day));
    return PeriodTag{c.year, kind == PeriodKind::Month ? static_cast<int>(c.month) : 0};
}

double decimal_year(Instant t) {
    const CivilDate c = civil_from_days(floor_div(t, seconds_per_day));
    const Instant y0 = instant_from_civil(c.year, 1, 1);
    const Instant y1 = instant_from_civil(c.year + 1, 1, 1);
    return c.year + static_cast<double>(t - y0) / static_cast<double>(y1 - y0);
}

}  // namespace ocvtrack

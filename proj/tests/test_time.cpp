#include <doctest.h>

#include <ctime>

#include "ocvtrack/time.hpp"

using namespace ocvtrack;

TEST_CASE("civil dates round-trip against timegm") {
    for (std::int64_t d = -800; d < 40000; d += 37) {
        const CivilDate c = civil_from_days(d);
        CHECK(days_from_civil(c.year, c.month, c.day) == d);
        std::tm tm{};
        tm.tm_year = c.year - 1900;
        tm.tm_mon = static_cast<int>(c.month) - 1;
        tm.tm_mday = static_cast<int>(c.day);
        CHECK(static_cast<std::int64_t>(timegm(&tm)) == d * seconds_per_day);
    }
}

TEST_CASE("RFC 3339 parsing") {
    CHECK(parse_rfc3339("2021-01-01T00:00:00Z") == 1609459200);
    CHECK(parse_rfc3339("2021-01-01 00:00:00Z") == 1609459200);
    CHECK(parse_rfc3339("2021-01-01T02:00:00+02:00") == 1609459200);
    CHECK(parse_rfc3339("2020-12-31T19:00:00.75-05:00") == 1609459200);
    CHECK_FALSE(parse_rfc3339("2021-13-01T00:00:00Z"));
    CHECK_FALSE(parse_rfc3339("2021-01-01"));
    CHECK_FALSE(parse_rfc3339("yesterday"));
    CHECK(format_rfc3339(1609459200) == "2021-01-01T00:00:00Z");
    for (Instant t = 0; t < 2'000'000'000; t += 98'765'431) CHECK(parse_rfc3339(format_rfc3339(t)) == t);
}

TEST_CASE("period tags") {
    const Instant t = instant_from_civil(2024, 2, 29, 12);
    CHECK(period_of(t, PeriodKind::Year).str() == "2024");
    CHECK(period_of(t, PeriodKind::Month).str() == "2024-02");
    const PeriodTag feb = PeriodTag::parse("2024-02");
    CHECK(feb.start() == instant_from_civil(2024, 2, 1));
    CHECK(feb.end() == instant_from_civil(2024, 3, 1));
    CHECK(PeriodTag::parse("2023").end() == instant_from_civil(2024, 1, 1));
    CHECK(PeriodTag::parse("2023") < PeriodTag::parse("2023-01"));
    CHECK(PeriodTag::parse("2022-12") < PeriodTag::parse("2023"));
    CHECK(PeriodTag::parse("2021").mid_year() == doctest::Approx(2021.5).epsilon(1e-3));
    CHECK(day_of_year(instant_from_civil(2021, 12, 31)) == 365);
    CHECK(period_kind_from_string("month") == PeriodKind::Month);
}

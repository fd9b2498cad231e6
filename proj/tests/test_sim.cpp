#include <doctest.h>

#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "ocvtrack/sim.hpp"

using namespace ocvtrack;
using namespace ocvtrack::sim;

namespace {

LoadScenario quiet(int days = 1) {
    LoadScenario s;
    s.days = days;
    s.household = false;
    s.noise_v = s.noise_i = s.noise_t = 0.0;
    s.constant_temperature = 20.0;
    return s;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("preset OCV curves are strictly increasing") {
    for (const Chemistry c : {Chemistry::LmoNmcBlend, Chemistry::Nmc, Chemistry::Lfp}) {
        const SimBattery b = default_battery(c);
        const auto& v = b.ocv.volts();
        for (std::size_t k = 1; k < v.size(); ++k) REQUIRE(v[k] > v[k - 1]);
        CHECK(b.ocv.soc_max() == doctest::Approx(100.0));
        for (const double s : {0.0, 13.7, 50.0, 99.9})
            CHECK(b.ocv.soc_at(b.ocv.voltage(s)) == doctest::Approx(s).epsilon(1e-9));
    }
    CHECK_THROWS_AS(OcvCurve(0.01, {3.0, 3.0, 3.1}), ConfigOutOfRange);
}

TEST_CASE("DCR surface is positive and spans the expected range") {
    const DcrSurface r = DcrSurface::reference();
    double lo = 1e9, hi = 0.0;
    for (double s = 0; s <= 100; s += 1)
        for (double t = -20; t <= 45; t += 1) {
            lo = std::min(lo, r.at(s, t));
            hi = std::max(hi, r.at(s, t));
        }
    CHECK(lo > 0.0);
    CHECK(lo >= 0.005 - 1e-12);
    CHECK(r.at(5, 0) > r.at(90, 25));
    CHECK(r.at(50, 0) > r.at(50, 30));
    CHECK(hi >= 0.009);
    CHECK_THROWS_AS(DcrSurface({0, 100}, {0, 25}, {0.005, 0.005, 0.0, 0.005}), ConfigOutOfRange);
}

TEST_CASE("rest state holds OCV at the initial SOC") {
    const SimBattery b = default_battery(Chemistry::LmoNmcBlend);
    LoadScenario s = quiet();
    s.initial_soc = 62.0;
    Generator g(b, s, 7);
    SimSample x;
    std::size_t n = 0;
    const double expect = b.cells_series * b.ocv_cell(62.0);
    while (g.next(x)) {
        REQUIRE(x.measured.voltage == doctest::Approx(expect).epsilon(1e-12));
        REQUIRE(x.measured.current == 0.0);
        ++n;
    }
    CHECK(n == 86400);
    CHECK(g.events().rows == 86400);
}

TEST_CASE("programmed current drains by coulomb arithmetic") {
    const SimBattery b = make_battery(Chemistry::LmoNmcBlend, 14, 10.0);
    LoadScenario s = quiet();
    s.initial_soc = 80.0;
    s.programmed.push_back({s.start + 3600, s.start + 7200, -5.0});
    Generator g(b, s, 1);
    SimSample x;
    double before = 0.0, after = 0.0;
    while (g.next(x)) {
        if (x.truth.t == s.start + 3600) before = x.truth.soc;
        if (x.truth.t == s.start + 7200) after = x.truth.soc;
        REQUIRE(x.truth.soc >= 0.0);
        REQUIRE(x.truth.soc <= 100.0);
    }
    CHECK(before - after == doctest::Approx(50.0).epsilon(1e-9));
    CHECK(g.events().discharge_ah == doctest::Approx(5.0).epsilon(1e-9));
}

TEST_CASE("ageing schedule") {
    const SimBattery fresh = default_battery(Chemistry::LmoNmcBlend);
    SUBCASE("zero schedule leaves the battery unchanged") {
        const SimBattery aged = age(fresh, 3.0);
        CHECK(aged.ocv.volts() == fresh.ocv.volts());
        CHECK(aged.usable_pct == 100.0);
        CHECK(aged.dcr(40, 20) == fresh.dcr(40, 20));
    }
    SUBCASE("LLI is a horizontal shift") {
        Degradation d;
        d.lli_shift_pp_per_year = 3.0;
        const SimBattery b = default_battery(Chemistry::LmoNmcBlend, d);
        const SimBattery aged = age(b, 2.0);
        CHECK(aged.usable_pct == doctest::Approx(94.0));
        for (double s = 3.0; s <= 93.0; s += 0.37)
            REQUIRE(aged.ocv.voltage(s) == doctest::Approx(b.ocv.voltage(s + 6.0)).epsilon(1e-9));
        for (std::size_t k = 1; k < aged.ocv.volts().size(); ++k)
            REQUIRE(aged.ocv.volts()[k] > aged.ocv.volts()[k - 1]);
        // Composition is additive in years.
        CHECK(age(age(b, 1.0), 1.0).ocv.volts() == aged.ocv.volts());
    }
    SUBCASE("compounded DCR growth") {
        Degradation d;
        d.dcr_growth_pct_per_year = 10.0;
        const SimBattery b = default_battery(Chemistry::LmoNmcBlend, d);
        CHECK(age(b, 3.0).dcr(30, 10) == doctest::Approx(1.331 * b.dcr(30, 10)).epsilon(1e-12));
        d.dcr_growth = DcrGrowth::Linear;
        const SimBattery l = default_battery(Chemistry::LmoNmcBlend, d);
        CHECK(age(l, 3.0).dcr(30, 10) == doctest::Approx(1.3 * l.dcr(30, 10)).epsilon(1e-12));
    }
    SUBCASE("excess degradation is rejected") {
        Degradation d;
        d.lli_shift_pp_per_year = 30.0;
        const SimBattery b = default_battery(Chemistry::LmoNmcBlend, d);
        CHECK_THROWS_AS(age(b, 4.0), DegradationExceedsCapacity);
        CHECK_THROWS_AS(age(b, -1.0), ConfigOutOfRange);
    }
}

TEST_CASE("scenario validation") {
    LoadScenario s;
    s.days = 0;
    CHECK_THROWS_AS(s.validate(), ConfigOutOfRange);
    s = LoadScenario{};
    s.initial_soc = 120.0;
    CHECK_THROWS_AS(s.validate(), ConfigOutOfRange);
    s = LoadScenario{};
    s.noise_v = -1.0;
    CHECK_THROWS_AS(s.validate(), ConfigOutOfRange);
    CHECK_NOTHROW(LoadScenario{}.validate());
}

TEST_CASE("household days stay physical") {
    const SimBattery b = default_battery(Chemistry::LmoNmcBlend);
    const SystemConfig sys = system_config_for(b);
    LoadScenario s;
    s.days = 4;
    Generator g(b, s, 11);
    SimSample x;
    const double cells = b.cells_series;
    double vmin = 1e9, vmax = -1e9;
    while (g.next(x)) {
        vmin = std::min(vmin, x.measured.voltage / cells);
        vmax = std::max(vmax, x.measured.voltage / cells);
        REQUIRE(x.truth.soc >= 0.0);
        REQUIRE(x.truth.soc <= 100.0);
        REQUIRE(x.truth.dcr > 0.0);
    }
    CHECK(vmin >= sys.eod_voltage_at(s.start) / cells - 0.1);
    CHECK(vmax <= sys.eoc_voltage / cells + 0.1);
    CHECK(g.events().pulses.size() > 0);
    CHECK(g.events().full_charges.size() > 0);
}

TEST_CASE("same seed gives identical bytes") {
    const SimBattery b = default_battery(Chemistry::Nmc);
    LoadScenario s;
    s.days = 2;
    fixture::TempDir a("sima"), c("simc"), d("simd");
    const SimOutputs oa = write_simulation(b, s, 42, a.path(), true);
    const SimOutputs oc = write_simulation(b, s, 42, c.path(), true);
    const SimOutputs od = write_simulation(b, s, 43, d.path(), false);
    CHECK(slurp(oa.telemetry) == slurp(oc.telemetry));
    CHECK(slurp(oa.event_log) == slurp(oc.event_log));
    CHECK(slurp(*oa.truth) == slurp(*oc.truth));
    CHECK(slurp(oa.telemetry) != slurp(od.telemetry));
    CHECK_FALSE(od.truth.has_value());
    CHECK(oa.rows == 2u * 86400u);
    const auto log = nlohmann::json::parse(slurp(oa.event_log));
    CHECK(log["events"].contains("pulses"));
}

#include <doctest.h>

#include "fixtures.hpp"
#include "ocvtrack/sim.hpp"
#include "ocvtrack/soc.hpp"

using namespace ocvtrack;
using fixture::rec;

namespace {

std::vector<StreamItem> constant_current(Instant t0, Instant seconds, double amps, double volts = 50.0) {
    std::vector<StreamItem> s;
    for (Instant t = 0; t <= seconds; ++t) s.emplace_back(rec(t0 + t, volts, amps));
    return s;
}

}  // namespace

TEST_CASE("ampere-hour integration") {
    SocOptions o;
    o.initial_soc = 40.0;
    const auto series = compute_soc(constant_current(0, 3600, 10.0), fixture::system(100.0), o);
    CHECK(series.soc.back() == doctest::Approx(50.0).epsilon(1e-12));
    CHECK_FALSE(series.unanchored);
    const auto idle = compute_soc(constant_current(0, 86400, 0.0), fixture::system(100.0), o);
    CHECK(idle.soc.back() == 40.0);
}

TEST_CASE("coulomb counting is additive over concatenated segments") {
    std::vector<StreamItem> whole;
    for (Instant t = 0; t < 5000; ++t) whole.emplace_back(rec(t, 50.0, 8.0 * std::sin(t / 300.0) + 1.5));
    SocOptions o;
    o.initial_soc = 35.0;
    const auto full = compute_soc(whole, fixture::system(), o);
    const std::size_t k = 2345;
    const std::vector<StreamItem> a(whole.begin(), whole.begin() + k + 1), b(whole.begin() + k, whole.end());
    const auto sa = compute_soc(a, fixture::system(), o);
    SocOptions ob = o;
    ob.initial_soc = sa.soc.back();
    const auto sb = compute_soc(b, fixture::system(), ob);
    CHECK(sb.soc.back() == doctest::Approx(full.soc.back()).epsilon(1e-9));
}

TEST_CASE("charge neutrality") {
    std::vector<StreamItem> s;
    for (Instant t = 0; t <= 3600; ++t) s.emplace_back(rec(t, 50.0, 10.0 * std::sin(2.0 * M_PI * t / 3600.0)));
    SocOptions o;
    o.initial_soc = 60.0;
    const auto series = compute_soc(s, fixture::system(), o);
    CHECK(series.soc.back() == doctest::Approx(60.0).epsilon(1e-9));
}

TEST_CASE("full-charge anchor after the hold time") {
    SystemConfig c = fixture::system(100.0);
    std::vector<StreamItem> s;
    Instant t = 0;
    for (; t < 1800; ++t) s.emplace_back(rec(t, 55.0, 20.0));   // +10 pp
    for (; t < 2000; ++t) s.emplace_back(rec(t, 58.2, 0.5));    // at EOC, tapered
    for (; t < 2100; ++t) s.emplace_back(rec(t, 52.0, -20.0));
    SocOptions o;
    o.initial_soc = 80.0;
    const auto series = compute_soc(s, c, o);
    REQUIRE(series.anchor_events.size() == 2);
    CHECK(series.anchor_events[1].kind == AnchorKind::FullChargeAnchor);
    CHECK(series.anchor_events[1].timestamp == 1860);
    CHECK(series.soc[1999] == 100.0);
    CHECK(series.soc[1859] < 100.0);
    // Continuous away from the anchor: the discharge starts from exactly 100.
    const double step_ah = 0.5 * (0.5 + -20.0) / 3600.0;
    CHECK(series.soc[2000] == doctest::Approx(100.0 + step_ah).epsilon(1e-12));
}

TEST_CASE("unanchored streams back-fill from the first anchor") {
    SystemConfig c = fixture::system(100.0);
    std::vector<StreamItem> s;
    Instant t = 0;
    for (; t < 3600; ++t) s.emplace_back(rec(t, 55.0, 10.0));
    for (; t < 3700; ++t) s.emplace_back(rec(t, 58.2, 0.0));
    const auto series = compute_soc(s, c, {});
    CHECK_FALSE(series.unanchored);
    CHECK(series.soc.front() == doctest::Approx(100.0 - 10.0).epsilon(1e-3));
    const auto never = compute_soc(constant_current(0, 100, 1.0), c, {});
    CHECK(never.unanchored);
    CHECK(never.soc.front() == 50.0);
}

TEST_CASE("gaps are not integrated") {
    std::vector<StreamItem> s = constant_current(0, 10, 36.0);
    s.emplace_back(GapMarker{10, 1000});
    for (Instant t = 1000; t <= 1010; ++t) s.emplace_back(rec(t, 50.0, 36.0));
    SocOptions o;
    o.initial_soc = 10.0;
    const auto series = compute_soc(s, fixture::system(100.0), o);
    CHECK(series.soc.back() == doctest::Approx(10.0 + 2 * 10 * 36.0 / 3600.0).epsilon(1e-12));
}

TEST_CASE("capacity epochs change the reference frame and keep the deficit from full") {
    SocOptions o;
    o.initial_soc = 90.0;
    o.capacity = {{0, 100.0}, {100, 80.0}};
    SocIntegrator integ(fixture::system(100.0), o);
    SocSample s{};
    for (Instant t = 0; t <= 100; ++t) s = integ.update(rec(t, 50.0, 0.0));
    CHECK(s.soc == doctest::Approx(100.0 - 10.0 * 100.0 / 80.0));
    CHECK(s.nominal_soc == doctest::Approx(s.soc * 0.8));
}

TEST_CASE("anchor drift on simulated full cycles stays within half a point") {
    sim::LoadScenario sc;
    sc.days = 6;
    sc.start = instant_from_civil(2021, 6, 1);
    const sim::SimBattery b = sim::default_battery(Chemistry::LmoNmcBlend);
    sim::Generator gen(b, sc, 3);
    const SystemConfig sys = sim::system_config_for(b);
    SocIntegrator integ(sys, {});
    sim::SimSample smp;
    double worst = 0.0;
    while (gen.next(smp)) integ.update(smp.measured);
    const auto drifts = integ.anchor_drifts();
    REQUIRE(drifts.size() >= 2);
    for (std::size_t k = 1; k < drifts.size(); ++k) worst = std::max(worst, std::fabs(drifts[k]));
    CHECK(worst <= 0.5);
}

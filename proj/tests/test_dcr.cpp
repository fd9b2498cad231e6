#include <doctest.h>

#include "fixtures.hpp"
#include "ocvtrack/dcr.hpp"
#include "ocvtrack/sim.hpp"
#include "oracles.hpp"

using namespace ocvtrack;
using fixture::rec;

namespace {

std::vector<DcrPulse> run_detector(const std::vector<TelemetryRecord>& rows, double one_c) {
    PulseDetector det({}, one_c);
    for (const auto& r : rows) det.push(r, 50.0);
    det.finish();
    return det.take();
}

DcrPulse pulse_with(double ohms, double soc, double temp, Instant t = 100) {
    return {t, t + 3, 50.0, 50.0 - 4.0 * ohms, -2.0, -6.0, soc, temp};
}

}  // namespace

TEST_CASE("step then hold yields one pulse sampled before the step and at hold end") {
    std::vector<TelemetryRecord> rows;
    for (Instant t = 0; t < 10; ++t) rows.push_back(rec(t, 51.0, -2.0));
    for (Instant t = 10; t < 13; ++t) rows.push_back(rec(t, 50.8, -6.0));
    const auto pulses = run_detector(rows, 8.0);
    REQUIRE(pulses.size() == 1);
    CHECK(pulses[0].i1 == -2.0);
    CHECK(pulses[0].i2 == -6.0);
    CHECK(pulses[0].t_start == 10);
    CHECK(pulses[0].t_end == 12);
    CHECK(estimate_dcr(pulses[0]) == doctest::Approx(0.05).epsilon(1e-12));
}

TEST_CASE("holds shorter than two seconds or steps below threshold are ignored") {
    std::vector<TelemetryRecord> rows;
    for (Instant t = 0; t < 10; ++t) rows.push_back(rec(t, 51.0, -2.0));
    rows.push_back(rec(10, 50.8, -6.0));
    rows.push_back(rec(11, 50.8, -6.0));
    for (Instant t = 12; t < 20; ++t) rows.push_back(rec(t, 51.0, 20.0));
    CHECK(run_detector(rows, 8.0).empty());

    rows.clear();
    for (Instant t = 0; t < 10; ++t) rows.push_back(rec(t, 51.0, -2.0));
    for (Instant t = 10; t < 20; ++t) rows.push_back(rec(t, 50.9, -5.9));
    CHECK(run_detector(rows, 8.0).empty());
}

TEST_CASE("a sinusoidal current never holds") {
    std::vector<TelemetryRecord> rows;
    for (Instant t = 0; t < 600; ++t) rows.push_back(rec(t, 50.0, 10.0 * std::sin(2.0 * M_PI * t / 10.0)));
    CHECK(run_detector(rows, 8.0).empty());
}

TEST_CASE("Ohm's-law quotient") {
    CHECK(estimate_dcr({0, 3, 51.0, 50.8, -2.0, -6.0, 50, 20}) == doctest::Approx(0.05).epsilon(1e-12));
    CHECK(estimate_dcr({0, 3, 51.0, 51.0, -2.0, -6.0, 50, 20}) == 0.0);
    CHECK_THROWS_AS(estimate_dcr({0, 3, 51.0, 50.0, -2.0, -2.0, 50, 20}), ZeroCurrentDelta);
}

TEST_CASE("noiseless simulated steps recover the network resistance exactly") {
    // Flat mid-range OCV removes the open-circuit drift during the hold; the
    // ends keep the voltage limits away from the operating point.
    std::vector<double> volts{3.0};
    for (int k = 1; k < 100; ++k) volts.push_back(3.7 + 1e-13 * k);
    volts.push_back(4.2);
    const sim::OcvCurve ocv(1.0, volts);
    const auto battery = sim::make_custom_battery(ocv, 14, 40.0, sim::DcrSurface::constant(0.005));
    sim::LoadScenario sc;
    sc.days = 1;
    sc.household = false;
    sc.noise_v = sc.noise_i = sc.noise_t = 0.0;
    sc.constant_temperature = 20.0;
    const Instant t0 = sc.start;
    for (int k = 0; k < 20; ++k) {
        const Instant at = t0 + 600 + 300 * k;
        sc.programmed.push_back({at - 120, at, -4.0});
        sc.programmed.push_back({at, at + 5, -30.0 - k});
    }
    sim::Generator gen(battery, sc, 1);
    PulseDetector det({}, 40.0);
    sim::SimSample s;
    std::size_t n = 0;
    while (gen.next(s) && n++ < 7200) det.push(s.measured, s.truth.soc);
    det.finish();
    const auto pulses = det.take();
    REQUIRE(pulses.size() >= 20);
    for (const auto& p : pulses) CHECK(std::fabs(estimate_dcr(p) - 0.005) <= 1e-12);
}

TEST_CASE("detector recall on a programmed day") {
    const auto battery = sim::default_battery(Chemistry::LmoNmcBlend);
    sim::LoadScenario sc;
    sc.days = 1;
    sc.household = false;
    sc.initial_soc = 60.0;
    const Instant t0 = sc.start;
    std::vector<Instant> steps;
    for (int k = 0; k < 20; ++k) {
        const Instant at = t0 + 3600 + 1800 * k;
        sc.programmed.push_back({at - 600, at, -4.0});
        sc.programmed.push_back({at, at + 4 + (k % 5), -30.0});
        steps.push_back(at);
    }
    sim::Generator gen(battery, sc, 9);
    PulseDetector det({}, battery.nominal_capacity_ah);
    sim::SimSample s;
    while (gen.next(s)) det.push(s.measured, s.truth.soc);
    det.finish();
    const auto pulses = det.take();
    std::size_t hit = 0;
    for (const Instant at : steps)
        for (const auto& p : pulses)
            if (p.t_start == at) {
                ++hit;
                break;
            }
    CHECK(hit >= 18);
    for (const auto& p : pulses) CHECK(estimate_dcr(p) > 0.0);
}

TEST_CASE("table medians, empty cells and tallies") {
    std::vector<DcrPulse> pulses;
    for (int k = 0; k < 10; ++k) pulses.push_back(pulse_with(0.005, 55, 22));
    DcrTableTally tally;
    const DcrTable t = build_table(pulses, 0, 1000, {}, &tally);
    CHECK(tally.accepted == 10);
    CHECK(t.reported(5, 4));
    CHECK(t.cell(5, 4).median_dcr == doctest::Approx(0.005).epsilon(1e-12));
    std::size_t reported = 0;
    for (std::size_t i = 0; i < t.soc_bins(); ++i)
        for (std::size_t j = 0; j < t.temp_bins(); ++j) reported += t.reported(i, j);
    CHECK(reported == 1);
    CHECK(t.lookup(5, 2).extrapolated);
    CHECK(t.lookup(5, 2).ohms == doctest::Approx(0.005));

    DcrTableOptions one;
    one.min_samples = 1;
    const DcrTable robust = build_table({pulse_with(0.004, 15, 12), pulse_with(0.005, 15, 12), pulse_with(0.006, 15, 12),
                                         pulse_with(0.100, 15, 12)},
                                        0, 1000, one);
    CHECK(robust.cell(1, 2).median_dcr == doctest::Approx(0.0055).epsilon(1e-12));

    std::vector<DcrPulse> bad = pulses;
    bad.push_back({100, 103, 50.0, 50.0, -2.0, -6.0, 50, 20});
    bad.push_back({100, 103, 50.0, 49.0, -2.0, -2.0, 50, 20});
    bad.push_back(pulse_with(0.005, 55, 22, 5000));
    build_table(bad, 0, 1000, {}, &tally);
    CHECK(tally.negative_resistance == 1);
    CHECK(tally.zero_current_delta == 1);
    CHECK(tally.outside_period == 1);
    CHECK_THROWS_AS(build_table({pulse_with(0.005, 55, 22)}, 0, 1000), EmptyTable);
}

TEST_CASE("table build is deterministic and survives JSON") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<DcrPulse> pulses;
    for (int k = 0; k < 400; ++k) pulses.push_back(pulse_with(0.004 + 0.004 * u(rng), 100 * u(rng), 40 * u(rng)));
    const DcrTable a = build_table(pulses, 0, 1000);
    std::reverse(pulses.begin(), pulses.end());
    const DcrTable b = build_table(pulses, 0, 1000);
    nlohmann::json ja, jb;
    to_json(ja, a);
    to_json(jb, b);
    CHECK(ja.dump() == jb.dump());
    const DcrTable c = dcr_table_from_json(nlohmann::json::parse(ja.dump()));
    nlohmann::json jc;
    to_json(jc, c);
    CHECK(jc.dump() == ja.dump());
    for (std::size_t i = 0; i < a.soc_bins(); ++i)
        for (std::size_t j = 0; j < a.temp_bins(); ++j) {
            if (!a.reported(i, j)) continue;
            std::vector<double> in_bin;
            for (const auto& p : pulses)
                if (bin_index(a.soc_edges(), p.soc_at_pulse) == i && bin_index(a.temp_edges(), p.temp_at_pulse) == j)
                    in_bin.push_back(estimate_dcr(p));
            CHECK(a.cell(i, j).median_dcr == oracle::median(in_bin));
        }
}

TEST_CASE("bilinear lookup between bin centres") {
    std::vector<DcrCell> cells(2 * 1);
    cells[0] = {0.004, 5};
    cells[1] = {0.008, 5};
    const DcrTable t({0, 50, 100}, {0, 40}, cells, 5, 0, 10);
    CHECK(t.lookup(25, 20).ohms == doctest::Approx(0.004));
    CHECK(t.lookup(50, 20).ohms == doctest::Approx(0.006));
    CHECK(t.lookup(90, 20).ohms == doctest::Approx(0.008));
    CHECK_FALSE(t.lookup(50, 20).extrapolated);
    CHECK(bin_index({0, 10, 20}, -5) == 0);
    CHECK(bin_index({0, 10, 20}, 10) == 1);
    CHECK(bin_index({0, 10, 20}, 25) == 1);
}

TEST_CASE("trend gradients") {
    CHECK(trend_gradient({0, 1, 2}, {100, 124.6, 149.2}) == doctest::Approx(24.6).epsilon(1e-12));
    CHECK(trend_gradient({0, 1, 2, 3}, {100, 100, 100, 100}) == 0.0);
    for (const double slope : {-3.0, 0.5, 11.03, 40.0}) {
        std::vector<double> x, y;
        for (int k = 0; k < 6; ++k) {
            x.push_back(k);
            y.push_back(100.0 + slope * k);
        }
        CHECK(trend_gradient(x, y) == doctest::Approx(slope).epsilon(1e-9));
    }

    std::vector<DcrTable> yearly;
    for (int y = 0; y < 4; ++y) {
        std::vector<DcrPulse> pulses;
        for (int k = 0; k < 6; ++k) pulses.push_back(pulse_with(0.005 * (1.0 + 0.1 * y), 45, 22, instant_from_civil(2021 + y, 3, 1)));
        yearly.push_back(build_table(pulses, instant_from_civil(2021 + y, 1, 1), instant_from_civil(2022 + y, 1, 1)));
    }
    const DcrTrend tr = fit_trend(yearly, {40, 60}, {20, 25});
    CHECK(tr.relative_pct.front() == doctest::Approx(100.0));
    CHECK(tr.gradient_pp_per_year == doctest::Approx(10.0).epsilon(1e-9));
    std::vector<DcrTable> unchanged;
    for (int y = 0; y < 3; ++y) {
        std::vector<DcrPulse> pulses;
        for (int k = 0; k < 6; ++k) pulses.push_back(pulse_with(0.005, 45, 22, instant_from_civil(2021 + y, 3, 1)));
        unchanged.push_back(build_table(pulses, instant_from_civil(2021 + y, 1, 1), instant_from_civil(2022 + y, 1, 1)));
    }
    CHECK(fit_trend(unchanged, {40, 60}, {20, 25}).gradient_pp_per_year == 0.0);
    CHECK_THROWS_AS(fit_trend({yearly[0]}, {40, 60}, {20, 25}), InsufficientYears);
    CHECK_THROWS_AS(fit_trend(yearly, {0, 10}, {20, 25}), InsufficientYears);
}

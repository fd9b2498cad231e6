#include <doctest.h>

#include "fixtures.hpp"
#include "ocvtrack/config.hpp"
#include "ocvtrack/foi.hpp"

using namespace ocvtrack;

namespace {

DiffCurve ic_fixture(const std::function<double(double)>& f, int year, double v0 = 3.3, double v1 = 4.15,
                     double dx = 0.005) {
    DiffCurve c;
    c.kind = DiffKind::IncrementalCapacity;
    const long n = std::lround((v1 - v0) / dx);
    for (long k = 0; k <= n; ++k) {
        const double x = v0 + dx * static_cast<double>(k);
        c.x.push_back(x);
        c.y.push_back(f(x));
    }
    c.source.period = {year, 0};
    return c;
}

DiffCurve dv_fixture(const std::function<double(double)>& f, int year) {
    DiffCurve c = ic_fixture(f, year, 0.0, 100.0, 0.25);
    c.kind = DiffKind::DifferentialVoltage;
    return c;
}

double gauss(double x, double mu, double sigma, double a) { return a * std::exp(-0.5 * std::pow((x - mu) / sigma, 2)); }

FoiSpec peak_spec(double lo, double hi, int id = 1) {
    FoiSpec s;
    s.foi_id = id;
    s.window = {lo, hi};
    return s;
}

FoiTrack track_with(int id, FoiQuantity q, double drift) {
    FoiTrack t;
    t.foi_id = id;
    t.quantity = q;
    t.drift_pp_per_year = drift;
    return t;
}

}  // namespace

TEST_CASE("builtin catalogs per chemistry") {
    auto count = [](Chemistry c, DiffKind k) {
        std::size_t n = 0;
        for (const auto& s : builtin_catalog(c)) n += s.curve_kind == k;
        return n;
    };
    CHECK(builtin_catalog(Chemistry::LmoNmcBlend).size() == 6);
    CHECK(count(Chemistry::LmoNmcBlend, DiffKind::IncrementalCapacity) == 4);
    CHECK(count(Chemistry::LmoNmcBlend, DiffKind::DifferentialVoltage) == 2);
    CHECK(builtin_catalog(Chemistry::Nmc).size() == 6);
    CHECK(count(Chemistry::Nmc, DiffKind::IncrementalCapacity) == 5);
    CHECK(count(Chemistry::Nmc, DiffKind::DifferentialVoltage) == 1);
    CHECK(builtin_catalog(Chemistry::Lfp).size() == 5);
    CHECK(count(Chemistry::Lfp, DiffKind::IncrementalCapacity) == 3);
    CHECK(count(Chemistry::Lfp, DiffKind::DifferentialVoltage) == 2);
    for (const auto& s : builtin_catalog_all()) {
        CHECK_NOTHROW(s.validate());
        if (s.feature == FeatureKind::PeakDistance) CHECK(s.pair_window.has_value());
    }
    const auto lmo = builtin_catalog(Chemistry::LmoNmcBlend);
    CHECK(lmo[5].low_confidence);
    CHECK_THROWS_AS(catalog_for({}, Chemistry::Nmc), UnknownChemistry);
}

TEST_CASE("catalog survives JSON and TOML") {
    const auto all = builtin_catalog_all();
    const auto again = parse_catalog(nlohmann::json::parse(catalog_to_json(all).dump()));
    CHECK(catalog_to_json(again) == catalog_to_json(all));

    fixture::TempDir dir("foi");
    fixture::write_text(dir / "cat.toml", R"(
[[fois]]
foi_id = 1
chemistry = "Lfp"
curve = "IC"
feature = "Peak"
window = [3.2, 3.3]
hypotheses = [{quantity = "intensity", expect = "decrease", dms = ["LLI"]}]

[[fois]]
foi_id = 2
chemistry = "Lfp"
curve = "DV"
feature = "PeakDistance"
window = [5.0, 25.0]
pair_window = [60.0, 85.0]
)");
    const auto cat = load_catalog(dir / "cat.toml");
    REQUIRE(cat.size() == 2);
    CHECK(cat[0].dm_hypothesis.at(0).dms.at(0) == DegradationMode::LLI);
    CHECK(cat[1].pair_window->hi == 85.0);
    fixture::write_text(dir / "bad.json", R"({"fois": [{"foi_id": 1, "chemistry": "Lfp", "curve": "DV",
        "feature": "PeakDistance", "window": [5, 25]}]})");
    CHECK_THROWS_AS(load_catalog(dir / "bad.json"), ConfigError);
}

TEST_CASE("locate a single Gaussian peak") {
    const DiffCurve c = ic_fixture([](double v) { return gauss(v, 3.5, 0.03, 225.0); }, 2021);
    const auto obs = locate(peak_spec(3.4, 3.6), c);
    REQUIRE(obs.found());
    CHECK(obs.position == doctest::Approx(3.5).epsilon(1e-6));
    CHECK(obs.intensity == doctest::Approx(225.0).epsilon(1e-3));

    const auto flat = locate(peak_spec(3.4, 3.6), ic_fixture([](double) { return 50.0; }, 2021));
    CHECK(flat.status == ObservationStatus::NoExtremumFound);
    const auto slope = locate(peak_spec(3.4, 3.6), ic_fixture([](double v) { return v; }, 2021));
    CHECK(slope.status == ObservationStatus::NoExtremumFound);
    CHECK(locate(peak_spec(4.5, 4.7), c).status == ObservationStatus::WindowOutOfDomain);
}

TEST_CASE("three peaks resolve by window") {
    const DiffCurve c = ic_fixture(
        [](double v) { return gauss(v, 3.5, 0.02, 200) + gauss(v, 3.64, 0.025, 250) + gauss(v, 3.84, 0.03, 210); }, 2021);
    CHECK(locate(peak_spec(3.44, 3.575), c).position == doctest::Approx(3.5).epsilon(2e-4));
    CHECK(locate(peak_spec(3.58, 3.74), c).position == doctest::Approx(3.64).epsilon(2e-4));
    CHECK(locate(peak_spec(3.76, 3.92), c).position == doctest::Approx(3.84).epsilon(2e-4));
    FoiSpec valley = peak_spec(3.53, 3.6);
    valley.feature = FeatureKind::Valley;
    const auto v = locate(valley, c);
    REQUIRE(v.found());
    CHECK(v.position > 3.5);
    CHECK(v.position < 3.64);
}

TEST_CASE("peak distance on a two-peak DV fixture") {
    const DiffCurve c = dv_fixture([](double s) { return 0.004 + gauss(s, 15, 2, 0.01) + gauss(s, 65, 3, 0.012); }, 2021);
    FoiSpec d;
    d.foi_id = 5;
    d.curve_kind = DiffKind::DifferentialVoltage;
    d.feature = FeatureKind::PeakDistance;
    d.window = {5, 28};
    d.pair_window = Window{50, 75};
    const auto obs = locate(d, c);
    REQUIRE(obs.found());
    CHECK(obs.distance == doctest::Approx(50.0).epsilon(1e-6));
}

TEST_CASE("locate is scale covariant") {
    const DiffCurve c = ic_fixture([](double v) { return gauss(v, 3.512, 0.03, 180) + gauss(v, 3.66, 0.02, 90); }, 2021);
    const auto base = locate(peak_spec(3.44, 3.6), c);
    for (const double k : {0.01, 0.5, 3.0, 1000.0}) {
        DiffCurve s = c;
        for (double& y : s.y) y *= k;
        const auto obs = locate(peak_spec(3.44, 3.6), s);
        CHECK(obs.intensity == doctest::Approx(k * base.intensity).epsilon(1e-12));
        CHECK(obs.position == doctest::Approx(base.position).epsilon(1e-12));
    }
}

TEST_CASE("track normalization and drift") {
    // Parabolic peaks: sub-grid refinement is exact.
    std::vector<DiffCurve> curves;
    for (int y = 0; y <= 6; ++y) {
        const double p = 3.5 + 0.05 * y / 6.0;
        curves.push_back(ic_fixture([p](double v) { return std::max(0.0, 225.0 - 1e5 * (v - p) * (v - p)); }, 2021 + y));
    }
    const FoiSpec spec = peak_spec(3.44, 3.6);
    const FoiTrack pos = track(spec, FoiQuantity::Position, curves);
    CHECK(pos.raw_drift_per_year == doctest::Approx(0.05 / 6.0).epsilon(1e-6));
    CHECK(pos.drift_pp_per_year == doctest::Approx(50.0 / 850.0 / 6.0 * 100.0).epsilon(1e-6));
    CHECK(pos.drift_pp_per_year == doctest::Approx(0.98).epsilon(0.001));
    CHECK(pos.points.front().normalized == doctest::Approx((3.5 - 3.3) / 0.85 * 100.0).epsilon(1e-9));
    const FoiTrack inten = track(spec, FoiQuantity::Intensity, curves);
    CHECK(inten.drift_pp_per_year == doctest::Approx(0.0).scale(1.0));
    CHECK(inten.points.front().normalized == doctest::Approx(100.0).epsilon(1e-9));

    // Periods arrive in any order; the earliest normalizes.
    std::vector<DiffCurve> shuffled(curves.rbegin(), curves.rend());
    CHECK(track(spec, FoiQuantity::Position, shuffled).drift_pp_per_year == pos.drift_pp_per_year);
    CHECK(track(spec, FoiQuantity::Position, curves).drift_pp_per_year == pos.drift_pp_per_year);
    CHECK_THROWS_AS(track(spec, FoiQuantity::Position, {curves[0]}), InsufficientObservations);
    CHECK_THROWS_AS(track(spec, FoiQuantity::Distance, curves), DomainError);
}

TEST_CASE("missing periods are skipped, not interpolated") {
    std::vector<DiffCurve> curves;
    for (int y = 0; y < 4; ++y) {
        if (y == 2) {
            curves.push_back(ic_fixture([](double v) { return v; }, 2021 + y));
            continue;
        }
        curves.push_back(ic_fixture([y](double v) { return gauss(v, 3.5 + 0.01 * y, 0.03, 200 - 10 * y); }, 2021 + y));
    }
    const FoiTrack t = track(peak_spec(3.4, 3.6), FoiQuantity::Intensity, curves);
    CHECK(t.points.size() == 3);
    REQUIRE(t.missing.size() == 1);
    CHECK(t.missing[0].year == 2023);
    CHECK(t.drift_pp_per_year == doctest::Approx(-5.0).epsilon(1e-3));
}

TEST_CASE("normalized position is invariant under affine relabeling of the axis") {
    std::vector<DiffCurve> volts, millivolts;
    for (int y = 0; y < 5; ++y) {
        const double p = 3.5 + 0.013 * y;
        volts.push_back(ic_fixture([p](double v) { return gauss(v, p, 0.03, 200); }, 2021 + y));
        DiffCurve m = volts.back();
        for (double& x : m.x) x = 1000.0 * x - 3000.0;
        millivolts.push_back(m);
    }
    const FoiTrack a = track(peak_spec(3.4, 3.65), FoiQuantity::Position, volts);
    const FoiTrack b = track(peak_spec(400, 650), FoiQuantity::Position, millivolts);
    CHECK(b.drift_pp_per_year == doctest::Approx(a.drift_pp_per_year).epsilon(1e-9));
    for (std::size_t k = 0; k < a.points.size(); ++k)
        CHECK(b.points[k].normalized == doctest::Approx(a.points[k].normalized).epsilon(1e-9));
}

TEST_CASE("Gaussian peak drift recovered within five percent") {
    std::vector<DiffCurve> curves;
    for (int y = 0; y < 5; ++y) {
        const double p = 3.48 + 0.007 * y, a = 220.0 - 12.0 * y;
        curves.push_back(ic_fixture([=](double v) { return gauss(v, p, 0.025, a) + gauss(v, 3.7, 0.03, 260); }, 2021 + y));
    }
    const FoiSpec spec = peak_spec(3.43, 3.6);
    const double pos_expect = 0.007 / 0.85 * 100.0;
    const double int_expect = -12.0 / 260.0 * 100.0;
    CHECK(track(spec, FoiQuantity::Position, curves).drift_pp_per_year == doctest::Approx(pos_expect).epsilon(0.05));
    CHECK(track(spec, FoiQuantity::Intensity, curves).drift_pp_per_year == doctest::Approx(int_expect).epsilon(0.05));
}

TEST_CASE("degradation mode voting") {
    const auto lmo = builtin_catalog(Chemistry::LmoNmcBlend);
    const std::vector<FoiTrack> lli = {track_with(1, FoiQuantity::Position, 1.2), track_with(1, FoiQuantity::Intensity, -8.0),
                                       track_with(2, FoiQuantity::Intensity, -3.0), track_with(3, FoiQuantity::Position, 0.9)};
    const DmReport r = attribute_dm(lli, lmo, 0.5);
    CHECK(r.of(DegradationMode::LLI).verdict == Verdict::Dominant);
    CHECK(r.of(DegradationMode::LLI).supporting == std::vector<int>{1, 2, 3});
    CHECK(r.of(DegradationMode::LAM_NE).verdict == Verdict::Possible);

    const std::vector<FoiTrack> quiet = {track_with(1, FoiQuantity::Position, 0.2), track_with(2, FoiQuantity::Intensity, -0.4)};
    for (const auto& m : attribute_dm(quiet, lmo, 0.5).modes) {
        CHECK(m.verdict == Verdict::NotIndicated);
        CHECK(m.supporting.empty());
    }

    const std::vector<FoiTrack> contrary = {track_with(1, FoiQuantity::Position, -1.5)};
    const DmReport c = attribute_dm(contrary, lmo, 0.5);
    CHECK(c.of(DegradationMode::LLI).verdict == Verdict::NotIndicated);
    CHECK(c.of(DegradationMode::LLI).contradicting == std::vector<int>{1});

    const auto j = to_json(r);
    CHECK(j["LLI"]["verdict"] == "dominant");
    CHECK(j["LAM_PE"]["supporting"] == nlohmann::json::array({2}));
}

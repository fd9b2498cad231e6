#include <doctest.h>

#include <random>

#include "ocvtrack/stats.hpp"
#include "oracles.hpp"

using namespace ocvtrack;

TEST_CASE("pearson matches the brute-force oracle on 3 to 7 point vectors") {
    const std::vector<std::pair<std::vector<double>, std::vector<double>>> cases = {
        {{1, 2, 3}, {1, 2, 2}},
        {{1, 2, 3, 4}, {2.5, 0.5, 3.0, 7.25}},
        {{0.1, 0.4, 0.2, 0.9, 0.5}, {10, 9, 11, 4, 8}},
        {{3, 1, 4, 1, 5, 9}, {2, 6, 5, 3, 5, 8}},
        {{100, 97, 94, 91, 88, 85, 82}, {205.7, 194.2, 160.0, 113.1, 110.0, 90.5, 70.2}},
    };
    for (const auto& [x, y] : cases) CHECK(pearson(x, y) == doctest::Approx(oracle::pearson(x, y)).epsilon(1e-12));
}

TEST_CASE("pearson worked examples") {
    CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 2}) ==
          doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-12));
    CHECK(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(pearson(std::vector<double>{1, 2, 3, 4}, std::vector<double>{-1, -2, -3, -4}) ==
          doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("pearson rejects zero variance and length mismatch") {
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), ZeroVariance);
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{4, 4, 4}), ZeroVariance);
    CHECK_THROWS_AS(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2}), LengthMismatch);
}

TEST_CASE("pearson is affine invariant and symmetric") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0, 1);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> x(6), y(6);
        for (auto& v : x) v = n(rng);
        for (auto& v : y) v = n(rng);
        const double r = pearson(x, y);
        CHECK(pearson(y, x) == doctest::Approx(r).epsilon(1e-12));
        const double a = trial % 2 ? 3.5 : -0.25, c = trial % 3 ? 2.0 : -7.0;
        std::vector<double> xa(x), yc(y);
        for (auto& v : xa) v = a * v + 11.0;
        for (auto& v : yc) v = c * v - 4.0;
        const double sign = (a * c > 0) ? 1.0 : -1.0;
        CHECK(pearson(xa, yc) == doctest::Approx(sign * r).epsilon(1e-12).scale(1.0));
        CHECK(std::fabs(r) <= 1.0);
    }
}

TEST_CASE("p-value worked examples") {
    CHECK(p_value(0.0, 5) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(p_value(0.5, 4) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(p_value(0.95, 7) == doctest::Approx(0.001).epsilon(0.25));
    CHECK_THROWS_AS(p_value(1.0, 5), DegenerateR);
    CHECK_THROWS_AS(p_value(-1.0, 5), DegenerateR);
}

TEST_CASE("p-values match the integrated t-density oracle") {
    for (const std::size_t n : {3u, 4u, 5u, 7u, 12u, 30u})
        for (const double r : {-0.97, -0.6, -0.1, 0.05, 0.3, 0.75, 0.91, 0.995})
            CHECK(p_value(r, n) == doctest::Approx(oracle::p_from_r(r, n)).epsilon(1e-6).scale(1.0));
}

TEST_CASE("p-value lies in [0, 1] and decreases in |r|") {
    for (const std::size_t n : {3u, 6u, 20u}) {
        double prev = 1.0 + 1e-15;
        for (int k = 0; k < 100; ++k) {
            const double r = k / 100.0;
            const double p = p_value(r, n);
            CHECK(p >= 0.0);
            CHECK(p <= 1.0);
            CHECK(p < prev);
            CHECK(p_value(-r, n) == doctest::Approx(p).epsilon(1e-12));
            prev = p;
        }
    }
}

TEST_CASE("student t cdf symmetric and closed form for one degree of freedom") {
    for (const double t : {-3.0, -0.5, 0.0, 0.7, 4.0}) {
        CHECK(student_t_cdf(t, 1.0) == doctest::Approx(0.5 + std::atan(t) / std::numbers::pi).epsilon(1e-10));
        CHECK(student_t_cdf(t, 5.0) + student_t_cdf(-t, 5.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK(incomplete_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(incomplete_beta(2.0, 3.0, 1.0) == 1.0);
    // I_x(1, b) = 1 - (1 - x)^b
    CHECK(incomplete_beta(1.0, 4.0, 0.3) == doctest::Approx(1.0 - std::pow(0.7, 4.0)).epsilon(1e-12));
}

TEST_CASE("least squares recovers exact lines and matches the normal equations") {
    const std::vector<double> x{0, 1, 2}, y{100, 124.6, 149.2};
    const LinearFit f = least_squares(x, y);
    CHECK(f.slope == doctest::Approx(24.6).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(100.0).epsilon(1e-12));
    CHECK(f.r_squared == doctest::Approx(1.0).epsilon(1e-12));
    const std::vector<double> xs{0.5, 1.5, 2.25, 3.0, 4.75}, ys{1.0, 3.2, 2.9, 5.1, 6.6};
    CHECK(least_squares(xs, ys).slope == doctest::Approx(oracle::ols_slope(xs, ys)).epsilon(1e-12));
}

TEST_CASE("correlate_tracks mirrors the track layout and skips short overlaps") {
    std::map<PeriodTag, double> soh{{{2021, 0}, 100}, {{2022, 0}, 97}, {{2023, 0}, 94}, {{2024, 0}, 91}};
    TrackSeries proportional{1, FoiQuantity::Intensity, {{{2021, 0}, 200}, {{2022, 0}, 194}, {{2023, 0}, 188}, {{2024, 0}, 182}}};
    TrackSeries noisy{1, FoiQuantity::Position, {{{2021, 0}, 0.0}, {{2022, 0}, 0.9}, {{2023, 0}, 2.1}, {{2024, 0}, 2.8}}};
    TrackSeries short_track{2, FoiQuantity::Intensity, {{{2021, 0}, 1.0}, {{2024, 0}, 2.0}}};
    const auto rep = correlate_tracks({proportional, noisy, short_track}, soh, 3);
    REQUIRE(rep.results.size() == 2);
    CHECK(rep.results[0].degenerate);
    CHECK(rep.results[0].r == doctest::Approx(1.0));
    CHECK(rep.results[0].p_value == 0.0);
    const std::vector<double> s{100, 97, 94, 91}, v{0.0, 0.9, 2.1, 2.8};
    CHECK(rep.results[1].r == doctest::Approx(oracle::pearson(v, s)).epsilon(1e-12));
    CHECK(rep.results[1].n == 4);
    CHECK(rep.skipped.size() == 1);
}

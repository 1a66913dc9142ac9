#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gsne/errors.hpp"
#include "gsne/geo.hpp"
#include "gsne/rng.hpp"

using namespace gsne;

TEST_CASE("planar distance is euclidean") {
    CHECK(distance({0, 0}, {3, 4}, distance_mode::planar) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(distance({1, 1}, {1, 1}, distance_mode::planar) == 0.0);
    CHECK(distance({-2, 0}, {2, 0}, distance_mode::planar) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("haversine equator to pole is a quarter circumference") {
    // Closed form for the quarter great circle: pi * R / 2.
    const double quarter = 0.5 * 3.14159265358979323846 * earth_radius_m;
    const double d = distance({0.0, 0.0}, {0.0, 90.0}, distance_mode::haversine);
    CHECK(std::abs(d - 10007543.398) < 1.0);
    CHECK(d == doctest::Approx(quarter).epsilon(1e-12));
    // Same arc length along the equator.
    const double e = distance({0.0, 0.0}, {90.0, 0.0}, distance_mode::haversine);
    CHECK(e == doctest::Approx(quarter).epsilon(1e-9));
}

TEST_CASE("haversine known city pair sanity") {
    // Antipodal points: half circumference, the maximum possible value.
    const double half = 3.14159265358979323846 * earth_radius_m;
    const double d = distance({0.0, 0.0}, {180.0, 0.0}, distance_mode::haversine);
    CHECK(d == doctest::Approx(half).epsilon(1e-9));
}

TEST_CASE("haversine rejects latitudes outside [-90, 90]") {
    CHECK_THROWS_AS(distance({0.0, 91.0}, {0.0, 0.0}, distance_mode::haversine), input_error);
    CHECK_THROWS_AS(distance({0.0, 0.0}, {10.0, -90.5}, distance_mode::haversine), input_error);
    CHECK_THROWS_AS(distance({0.0, std::nan("")}, {0.0, 0.0}, distance_mode::haversine), input_error);
}

TEST_CASE("distance is symmetric and non-negative") {
    rng r(1234);
    for (int i = 0; i < 200; ++i) {
        const geo_point a{r.uniform(-180, 180), r.uniform(-90, 90)};
        const geo_point b{r.uniform(-180, 180), r.uniform(-90, 90)};
        for (auto mode : {distance_mode::planar, distance_mode::haversine}) {
            const double ab = distance(a, b, mode);
            const double ba = distance(b, a, mode);
            CHECK(ab == doctest::Approx(ba).epsilon(1e-12));
            CHECK(ab >= 0.0);
        }
        CHECK(distance(a, b, distance_mode::haversine) <=
              3.14159265358979323846 * earth_radius_m * (1 + 1e-12));
    }
}

TEST_CASE("edge weight is inverse distance with a floor") {
    CHECK(edge_weight(2000.0, 1.0) == doctest::Approx(5e-4).epsilon(1e-12));
    CHECK(edge_weight(0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(edge_weight(0.5, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(edge_weight(10.0, 2.0) == doctest::Approx(0.1).epsilon(1e-12));
    CHECK_THROWS_AS(edge_weight(1.0, 0.0), input_error);
    CHECK_THROWS_AS(edge_weight(-1.0, 1.0), input_error);
}

TEST_CASE("edge weight decreases with distance") {
    rng r(7);
    for (int i = 0; i < 100; ++i) {
        const double d1 = r.uniform(0.0, 5000.0);
        const double d2 = d1 + r.uniform(0.1, 5000.0);
        CHECK(edge_weight(d1, 1.0) >= edge_weight(d2, 1.0));
    }
}

TEST_CASE("rng streams are deterministic and independent") {
    rng a(42), b(42), c(43), d(42, 1);
    for (int i = 0; i < 32; ++i) CHECK(a() == b());
    bool differs_seed = false, differs_stream = false;
    rng a2(42);
    for (int i = 0; i < 32; ++i) {
        if (a2() != c()) differs_seed = true;
        if (d() != b()) differs_stream = true;
    }
    CHECK(differs_seed);
    CHECK(differs_stream);
}

TEST_CASE("rng normal moments") {
    rng r(99);
    const int n = 200000;
    double sum = 0, sumsq = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        sum += x;
        sumsq += x * x;
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(std::abs(mean) < 0.01);
    CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("rng state restore resumes the identical sequence") {
    rng r(5);
    for (int i = 0; i < 17; ++i) r.normal();
    const auto st = r.save_state();
    const bool hc = r.has_cached_normal();
    const double cv = r.cached_normal();
    rng q;
    q.restore_state(st, hc, cv);
    for (int i = 0; i < 100; ++i) {
        CHECK(r.normal() == q.normal());
        CHECK(r() == q());
        CHECK(r.uniform_index(1000) == q.uniform_index(1000));
    }
}

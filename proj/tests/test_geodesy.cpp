#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "curbsight/geodesy.hpp"
#include "curbsight/rng.hpp"

using namespace curbsight;

TEST_CASE("to_local_xy identity at the reference") {
    const GeoPoint p{41.8, -72.25};
    const LocalXY xy = to_local_xy(p, p);
    CHECK(xy.x == 0.0);
    CHECK(xy.y == 0.0);
}

TEST_CASE("to_local_xy eastward offset scales by cos(latitude)") {
    const GeoPoint ref{41.8, -72.25};
    const LocalXY xy = to_local_xy({41.8, -72.249}, ref);
    // 0.001 deg * 111319.4908 m/deg * cos(41.8 deg)
    CHECK(xy.x == doctest::Approx(0.001 * 111319.49079327358 * std::cos(41.8 * kDegToRad))
                      .epsilon(1e-12));
    CHECK(std::abs(xy.x - 82.99) < 0.01);
    CHECK(xy.y == 0.0);
}

TEST_CASE("to_local_xy northward offset is latitude arc length") {
    const LocalXY xy = to_local_xy({41.801, -72.25}, {41.8, -72.25});
    CHECK(xy.x == 0.0);
    CHECK(xy.y == doctest::Approx(111.3194908).epsilon(1e-9));
}

TEST_CASE("to_local_xy rejects invalid coordinates") {
    CHECK_THROWS_AS(to_local_xy({100.0, 0.0}, {0.0, 0.0}), InvalidInput);
    CHECK_THROWS_AS(to_local_xy({std::nan(""), 0.0}, {0.0, 0.0}), InvalidInput);
}

TEST_CASE("from_local_xy inverts to_local_xy") {
    const GeoPoint ref{41.8, -72.25};
    CHECK(from_local_xy({0.0, 0.0}, ref).lat == ref.lat);
    CHECK(from_local_xy({0.0, 0.0}, ref).lon == ref.lon);

    const GeoPoint back = from_local_xy({82.99, 0.0}, ref);
    CHECK(back.lat == doctest::Approx(41.8).epsilon(1e-12));
    CHECK(back.lon == doctest::Approx(-72.249).epsilon(1e-7));
}

TEST_CASE("from_local_xy rejects polar reference") {
    CHECK_THROWS_AS(from_local_xy({1.0, 1.0}, {90.0, 0.0}), GeometryError);
}

TEST_CASE("round trip within 1e-9 degrees over 10k random offsets under 1 km") {
    Rng rng(42);
    for (int i = 0; i < 10000; ++i) {
        const GeoPoint ref{rng.uniform(-60.0, 60.0), rng.uniform(-179.0, 179.0)};
        const LocalXY xy{rng.uniform(-1000.0, 1000.0), rng.uniform(-1000.0, 1000.0)};
        const GeoPoint p = from_local_xy(xy, ref);
        const GeoPoint back = from_local_xy(to_local_xy(p, ref), ref);
        CHECK(std::abs(back.lat - p.lat) < 1e-9);
        CHECK(std::abs(back.lon - p.lon) < 1e-9);
    }
}

TEST_CASE("haversine examples") {
    CHECK(haversine_distance({41.8, -72.25}, {41.8, -72.25}) == 0.0);
    CHECK(haversine_distance({0.0, 0.0}, {0.001, 0.0}) ==
          doctest::Approx(111.3194908).epsilon(1e-9));
    CHECK(haversine_distance({0.0, 0.0}, {0.0, 0.001}) ==
          doctest::Approx(111.3194908).epsilon(1e-9));
}

TEST_CASE("haversine symmetry and triangle inequality on random triples") {
    Rng rng(7);
    for (int i = 0; i < 500; ++i) {
        const GeoPoint a{rng.uniform(-80.0, 80.0), rng.uniform(-180.0, 180.0)};
        const GeoPoint b{rng.uniform(-80.0, 80.0), rng.uniform(-180.0, 180.0)};
        const GeoPoint c{rng.uniform(-80.0, 80.0), rng.uniform(-180.0, 180.0)};
        CHECK(haversine_distance(a, b) == haversine_distance(b, a));
        CHECK(haversine_distance(a, c) <=
              haversine_distance(a, b) + haversine_distance(b, c) + 1e-6);
    }
}

TEST_CASE("local norm agrees with haversine within 0.1% under 500 m") {
    Rng rng(11);
    for (int i = 0; i < 2000; ++i) {
        const GeoPoint ref{rng.uniform(-60.0, 60.0), rng.uniform(-179.0, 179.0)};
        const LocalXY xy{rng.uniform(-350.0, 350.0), rng.uniform(-350.0, 350.0)};
        const GeoPoint p = from_local_xy(xy, ref);
        const double flat = norm(to_local_xy(p, ref));
        const double arc = haversine_distance(p, ref);
        if (arc > 1.0) CHECK(std::abs(flat - arc) / arc < 1e-3);
    }
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "curbsight/rng.hpp"
#include "curbsight/triangulate.hpp"

using namespace curbsight;

TEST_CASE("bearing composes compass azimuth and pixel angle") {
    CameraPose pose;
    pose.azimuth_deg = 0.0;
    CHECK(bearing(pose, 0.0) == 90.0);  // facing north -> due north
    pose.azimuth_deg = 90.0;
    CHECK(bearing(pose, 0.0) == 0.0);  // facing east -> due east
    pose.azimuth_deg = 0.0;
    CHECK(bearing(pose, 30.0) == 120.0);  // object left of center -> north-west
}

TEST_CASE("candidate_point trigonometry") {
    const GeoPoint ref{41.8, -72.25};
    CameraPose pose;
    pose.position = ref;

    pose.azimuth_deg = 90.0;  // bearing 0
    auto c = candidate_point(pose, 0.0, 10.0, ref);
    CHECK(c.xy.x == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(c.xy.y == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));

    pose.azimuth_deg = 0.0;  // bearing 90
    c = candidate_point(pose, 0.0, 10.0, ref);
    CHECK(c.xy.x == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
    CHECK(c.xy.y == doctest::Approx(10.0).epsilon(1e-12));

    // camera offset (5, 5), bearing 45, depth sqrt(2) -> (6, 6)
    pose.position = from_local_xy({5.0, 5.0}, ref);
    pose.azimuth_deg = 45.0;
    c = candidate_point(pose, 0.0, std::sqrt(2.0), ref);
    CHECK(c.xy.x == doctest::Approx(6.0).epsilon(1e-9));
    CHECK(c.xy.y == doctest::Approx(6.0).epsilon(1e-9));

    CHECK_THROWS_AS(candidate_point(pose, 0.0, -1.0, ref), InvalidInput);
}

TEST_CASE("geometric median: degenerate inputs") {
    CHECK_THROWS_AS(geometric_median({}), InvalidInput);

    auto r = geometric_median({{3.0, 4.0}});
    CHECK(r.point.x == 3.0);
    CHECK(r.point.y == 4.0);

    r = geometric_median({{0.0, 0.0}, {2.0, 4.0}});  // midpoint by convention
    CHECK(r.point.x == 1.0);
    CHECK(r.point.y == 2.0);
}

TEST_CASE("geometric median: unit square corners") {
    const auto r = geometric_median({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    CHECK(r.converged);
    CHECK(std::abs(r.point.x - 0.5) < 1e-6);
    CHECK(std::abs(r.point.y - 0.5) < 1e-6);
}

TEST_CASE("geometric median: right triangle analytic stationary point") {
    // On the symmetry axis x=y=t, stationarity gives 12t^2 - 12t + 2 = 0,
    // t = (3 - sqrt(3)) / 6.
    const double t = (3.0 - std::sqrt(3.0)) / 6.0;
    const auto r = geometric_median({{0, 0}, {1, 0}, {0, 1}});
    CHECK(r.converged);
    CHECK(std::abs(r.point.x - t) < 1e-4);
    CHECK(std::abs(r.point.y - t) < 1e-4);
    CHECK(t == doctest::Approx(0.21132).epsilon(1e-4));
}

TEST_CASE("geometric median: collinear points reduce to the 1-D median") {
    const auto r = geometric_median({{0, 0}, {1, 0}, {5, 0}});
    CHECK(std::abs(r.point.x - 1.0) < 1e-6);
    CHECK(std::abs(r.point.y) < 1e-6);
}

TEST_CASE("geometric median: coincident points handled (Vardi-Zhang step)") {
    // Majority at one point: the median is that point.
    const auto r = geometric_median({{0, 0}, {0, 0}, {0, 0}, {5, 0}, {0, 7}});
    CHECK(std::abs(r.point.x) < 1e-6);
    CHECK(std::abs(r.point.y) < 1e-6);
}

namespace {
double objective(const LocalXY& p, const std::vector<LocalXY>& pts) {
    return sum_of_distances(p, pts);
}

/// Weiszfeld optimality: the subgradient norm of the smooth part is at most
/// the multiplicity of any coincident point (0 when none coincide).
bool subgradient_ok(const LocalXY& p, const std::vector<LocalXY>& pts, double slack) {
    double gx = 0.0, gy = 0.0, coincident = 0.0;
    for (const auto& q : pts) {
        const double d = std::hypot(p.x - q.x, p.y - q.y);
        if (d < 1e-7) {
            coincident += 1.0;
            continue;
        }
        gx += (p.x - q.x) / d;
        gy += (p.y - q.y) / d;
    }
    return std::hypot(gx, gy) <= coincident + slack;
}
}  // namespace

TEST_CASE("geometric median: subgradient certificate on random point sets") {
    Rng rng(101);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 3 + rng.uniform_index(48);
        std::vector<LocalXY> pts;
        for (std::size_t i = 0; i < n; ++i)
            pts.push_back({rng.uniform(-100.0, 100.0), rng.uniform(-100.0, 100.0)});
        const auto r = geometric_median(pts, 1e-9, 5000);
        CHECK(subgradient_ok(r.point, pts, 1e-3));
        // objective no worse than at the centroid or any input point
        LocalXY centroid{0, 0};
        for (const auto& p : pts) {
            centroid.x += p.x / static_cast<double>(n);
            centroid.y += p.y / static_cast<double>(n);
        }
        const double obj = objective(r.point, pts);
        CHECK(obj <= objective(centroid, pts) + 1e-6);
        for (const auto& p : pts) CHECK(obj <= objective(p, pts) + 1e-6);
    }
}

TEST_CASE("geometric median: robustness against a single outlier") {
    Rng rng(202);
    int median_wins = 0, trials = 100;
    for (int trial = 0; trial < trials; ++trial) {
        std::vector<LocalXY> pts;
        for (int i = 0; i < 7; ++i)
            pts.push_back({rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0)});
        const auto base_med = geometric_median(pts, 1e-9, 5000).point;
        LocalXY base_cent{0, 0};
        for (const auto& p : pts) {
            base_cent.x += p.x / 7.0;
            base_cent.y += p.y / 7.0;
        }
        const double ang = rng.uniform(0.0, 6.28318);
        pts[0] = {100.0 * std::cos(ang), 100.0 * std::sin(ang)};
        const auto out_med = geometric_median(pts, 1e-9, 5000).point;
        LocalXY out_cent{0, 0};
        for (const auto& p : pts) {
            out_cent.x += p.x / 7.0;
            out_cent.y += p.y / 7.0;
        }
        const double med_move = std::hypot(out_med.x - base_med.x, out_med.y - base_med.y);
        const double cent_move =
            std::hypot(out_cent.x - base_cent.x, out_cent.y - base_cent.y);
        if (med_move < cent_move) ++median_wins;
    }
    CHECK(median_wins == trials);
}

TEST_CASE("geometric median: translation equivariance") {
    Rng rng(303);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<LocalXY> pts;
        for (int i = 0; i < 9; ++i)
            pts.push_back({rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0)});
        const LocalXY t{rng.uniform(-50.0, 50.0), rng.uniform(-50.0, 50.0)};
        std::vector<LocalXY> shifted;
        for (const auto& p : pts) shifted.push_back({p.x + t.x, p.y + t.y});
        const auto a = geometric_median(pts, 1e-9, 5000).point;
        const auto b = geometric_median(shifted, 1e-9, 5000).point;
        CHECK(std::abs(b.x - (a.x + t.x)) < 1e-5);
        CHECK(std::abs(b.y - (a.y + t.y)) < 1e-5);
    }
}

TEST_CASE("geolocate_object: minimum observation gate and exact recovery") {
    const CameraIntrinsics intr;
    const GeoPoint origin{41.8, -72.25};
    const GeoPoint target = from_local_xy({6.0, 40.0}, origin);

    std::vector<TriangulationObservation> obs;
    for (int i = 0; i < 5; ++i) {
        TriangulationObservation o;
        o.pose.position = from_local_xy({0.0, 8.0 * i}, origin);
        o.pose.azimuth_deg = 0.0;  // facing north
        o.pose.frame_id = i * 30;
        const LocalXY d = to_local_xy(target, o.pose.position);
        o.corrected_depth_m = std::hypot(d.x, d.y);
        const double bearing_math = std::atan2(d.y, d.x) / kDegToRad;
        const double theta = bearing_math - 90.0;
        o.pixel.u = angle_to_pixel(theta, intr);
        obs.push_back(o);
    }

    const auto est = geolocate_object(obs, intr);
    CHECK(est.n_candidates == 5);
    CHECK(haversine_distance(est.location, target) < 1e-3);
    CHECK(est.dispersion_m < 1e-3);

    obs.resize(2);
    CHECK_THROWS_AS(geolocate_object(obs, intr), InsufficientObservations);
}

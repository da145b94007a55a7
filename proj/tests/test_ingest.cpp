#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "curbsight/ingest.hpp"
#include "curbsight/rng.hpp"

using namespace curbsight;

TEST_CASE("sample_frames keeps stride multiples") {
    Track t;
    for (int i = 0; i < 90; ++i) {
        CameraPose p;
        p.frame_id = i;
        p.position = {41.8, -72.25};
        t.poses.push_back(p);
    }
    CHECK(sample_frames(t, 30).poses.size() == 3);
    CHECK(sample_frames(t, 1).poses.size() == 90);
    CHECK_THROWS_AS(sample_frames(t, 0), InvalidInput);

    Track none;
    CameraPose p;
    p.frame_id = 7;
    none.poses.push_back(p);
    CHECK_THROWS_AS(sample_frames(none, 30), InvalidInput);
}

TEST_CASE("correct_gps_offset: translation examples") {
    const GeoPoint origin{41.8, -72.25};
    Track t;
    for (int i = 0; i < 5; ++i) {
        CameraPose p;
        p.frame_id = i;
        p.position = from_local_xy({0.0, 10.0 * i}, origin);
        t.poses.push_back(p);
    }

    // single pair offset (4, 0): every pose moves 4 m east
    const GeoPoint obs = origin;
    const GeoPoint act = from_local_xy({4.0, 0.0}, origin);
    const auto corr = correct_gps_offset(t, {{obs, act}});
    CHECK(corr.shift_m.x == doctest::Approx(4.0).epsilon(1e-9));
    CHECK(corr.shift_m.y == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    for (int i = 0; i < 5; ++i) {
        const LocalXY xy = to_local_xy(corr.track.poses[i].position, origin);
        CHECK(xy.x == doctest::Approx(4.0).epsilon(1e-6));
        CHECK(xy.y == doctest::Approx(10.0 * i).epsilon(1e-6));
    }
    CHECK(corr.residuals_m[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));

    // zero-offset pair: identity
    const auto ident = correct_gps_offset(t, {{origin, origin}});
    CHECK(haversine_distance(ident.track.poses[2].position, t.poses[2].position) < 1e-9);

    // two pairs (3,2) and (5,2): mean (4,2), residuals 1 m
    const auto two = correct_gps_offset(
        t, {{origin, from_local_xy({3.0, 2.0}, origin)},
            {from_local_xy({50.0, 0.0}, origin), from_local_xy({55.0, 2.0}, origin)}});
    CHECK(two.shift_m.x == doctest::Approx(4.0).epsilon(1e-6));
    CHECK(two.shift_m.y == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(two.residuals_m[0] == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(two.residuals_m[1] == doctest::Approx(1.0).epsilon(1e-6));

    CHECK_THROWS_AS(correct_gps_offset(t, {}), InvalidInput);
}

TEST_CASE("correct_gps_offset preserves pairwise pose distances") {
    const GeoPoint origin{41.8, -72.25};
    Rng rng(4);
    Track t;
    for (int i = 0; i < 8; ++i) {
        CameraPose p;
        p.position = from_local_xy({rng.uniform(-200.0, 200.0), rng.uniform(-200.0, 200.0)},
                                   origin);
        t.poses.push_back(p);
    }
    const auto corr =
        correct_gps_offset(t, {{origin, from_local_xy({7.0, -3.0}, origin)}});
    for (std::size_t i = 0; i + 1 < t.poses.size(); ++i) {
        const double before =
            haversine_distance(t.poses[i].position, t.poses[i + 1].position);
        const double after = haversine_distance(corr.track.poses[i].position,
                                                corr.track.poses[i + 1].position);
        CHECK(after == doctest::Approx(before).epsilon(1e-7));
    }

    // flagged when a control pair is separated beyond the warn threshold
    const auto warn =
        correct_gps_offset(t, {{origin, from_local_xy({80.0, 0.0}, origin)}}, 50.0);
    CHECK(warn.suspicious[0]);
    CHECK_THROWS_AS(
        correct_gps_offset(t, {{origin, from_local_xy({80.0, 0.0}, origin)}}, 50.0, true),
        InvalidInput);
}

namespace {
DemGrid constant_grid(double value, std::size_t n = 5) {
    DemGrid dem;
    dem.xllcorner = -72.25;
    dem.yllcorner = 41.8;
    dem.cellsize = 1e-4;
    dem.nrows = dem.ncols = n;
    dem.values.assign(n * n, value);
    return dem;
}
}  // namespace

TEST_CASE("sample_dem: constant grid, cell centers, bounds, nodata") {
    const DemGrid dem = constant_grid(42.0);
    // anywhere inside
    CHECK(sample_dem(dem, {41.80012, -72.24988}).elevation_m == doctest::Approx(42.0));
    // exact cell center of cell (col 1, south-row 1)
    const GeoPoint center{dem.yllcorner + 1.5 * dem.cellsize,
                          dem.xllcorner + 1.5 * dem.cellsize};
    CHECK(sample_dem(dem, center).elevation_m == doctest::Approx(42.0));
    CHECK_THROWS_AS(sample_dem(dem, {41.9, -72.25}), OutOfCoverage);

    DemGrid holey = dem;
    holey.values[2 * 5 + 2] = holey.nodata;
    const GeoPoint near_hole{dem.yllcorner + 2.5 * dem.cellsize,
                             dem.xllcorner + 2.5 * dem.cellsize};
    CHECK(sample_dem(holey, near_hole).nodata);
}

TEST_CASE("sample_dem: bilinear interpolation reproduces a planar gradient") {
    DemGrid dem = constant_grid(0.0, 8);
    // plane: z = 100 + 3*col + 5*south_row (in cell units)
    for (std::size_t r = 0; r < dem.nrows; ++r)
        for (std::size_t c = 0; c < dem.ncols; ++c) {
            const double south_row = static_cast<double>(dem.nrows - 1 - r);
            dem.values[r * dem.ncols + c] = 100.0 + 3.0 * static_cast<double>(c) + 5.0 * south_row;
        }
    Rng rng(6);
    for (int i = 0; i < 200; ++i) {
        // stay inside the cell-center hull so no edge clamping engages
        const double col = rng.uniform(0.5, static_cast<double>(dem.ncols) - 0.5);
        const double row_s = rng.uniform(0.5, static_cast<double>(dem.nrows) - 0.5);
        const GeoPoint p{dem.yllcorner + row_s * dem.cellsize,
                         dem.xllcorner + col * dem.cellsize};
        const double expected = 100.0 + 3.0 * (col - 0.5) + 5.0 * (row_s - 0.5);
        CHECK(sample_dem(dem, p).elevation_m == doctest::Approx(expected).epsilon(1e-9));
    }
}

TEST_CASE("observation CSV round trip and schema diagnostics") {
    std::vector<Observation> obs(2);
    obs[0].object_id = 1;
    obs[0].frame_id = 30;
    obs[0].pixel = {1920.0, 1000.0, 512.25, 64.5, 200.125};
    obs[0].depth_samples = {9.5, 10.0, 10.5};
    obs[1].object_id = 2;
    obs[1].frame_id = 60;
    obs[1].pixel = {100.0, 900.0, 300.0, 30.0, 0.0};
    obs[1].depth_samples = {5.0, 5.0, 5.0};

    std::stringstream ss;
    write_observations(ss, obs);
    const auto back = parse_observations(ss, "mem");
    REQUIRE(back.size() == 2);
    CHECK(back[0].pixel.pixel_height == obs[0].pixel.pixel_height);
    CHECK(back[0].pixel.pixel_crown_width == obs[0].pixel.pixel_crown_width);
    CHECK(back[1].depth_samples == obs[1].depth_samples);

    // serialize again: byte-stable writer
    std::stringstream ss2;
    write_observations(ss2, back);
    std::stringstream ss3;
    write_observations(ss3, obs);
    CHECK(ss2.str() == ss3.str());

    // missing depth sample -> parse error naming the line
    std::stringstream bad(
        "object_id,frame_id,u,v,pixel_height,pixel_width,depth1,depth2,depth3\n"
        "1,30,5,5,10,10,4.0,,3.0\n");
    try {
        parse_observations(bad, "bad.csv");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line_number == 2);
        CHECK(e.file_name == "bad.csv");
    }

    std::stringstream neg(
        "object_id,frame_id,u,v,pixel_height,pixel_width,depth1,depth2,depth3\n"
        "1,30,5,5,10,10,4.0,-1.0,3.0\n");
    CHECK_THROWS_AS(parse_observations(neg, "neg.csv"), ParseError);
}

TEST_CASE("track CSV: round trip, GPS gaps, derived azimuth") {
    std::stringstream ss(
        "frame_id,timestamp_s,lat,lon,azimuth_deg\n"
        "0,0,41.8,-72.25,10\n"
        "30,1,,,20\n"         // no GPS -> skipped
        "60,2,41.8001,-72.25,\n"  // azimuth derived from displacement
        "90,3,41.8002,-72.25,350\n");
    const Track t = parse_track(ss, "mem");
    REQUIRE(t.poses.size() == 3);
    CHECK(t.poses[0].azimuth_deg == 10.0);
    CHECK(t.poses[1].frame_id == 60);
    // displacement due north -> azimuth 0
    CHECK(t.poses[1].azimuth_deg == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
    CHECK(t.poses[2].azimuth_deg == 350.0);

    std::stringstream out;
    write_track(out, t);
    const Track t2 = parse_track(out, "mem2");
    CHECK(t2.poses.size() == t.poses.size());
    CHECK(t2.poses[1].position.lat == t.poses[1].position.lat);

    std::stringstream decreasing(
        "frame_id,timestamp_s,lat,lon,azimuth_deg\n"
        "0,5,41.8,-72.25,0\n"
        "30,4,41.8,-72.25,0\n");
    CHECK_THROWS_AS(parse_track(decreasing, "mem3"), ParseError);
}

TEST_CASE("DEM ASCII round trip including nodata") {
    DemGrid dem = constant_grid(7.0, 3);
    dem.values[4] = dem.nodata;
    std::stringstream ss;
    write_dem(ss, dem);
    const DemGrid back = parse_dem(ss, "mem");
    CHECK(back.nrows == 3);
    CHECK(back.ncols == 3);
    CHECK(back.values == dem.values);
    CHECK(back.cellsize == dem.cellsize);

    std::stringstream truncated("ncols 3\nnrows 3\nxllcorner 0\n");
    CHECK_THROWS_AS(parse_dem(truncated, "mem"), ParseError);
}

TEST_CASE("ground truth GeoJSON round trip") {
    std::vector<SceneObject> objects(2);
    objects[0] = {1, ObjectKind::tree, {41.8, -72.25}, 12.5, 0.4, 5.5, 101.0};
    objects[1] = {2, ObjectKind::pole, {41.8001, -72.2501}, 9.0, 0.3, 0.0, 102.0};
    const auto fc = ground_truth_to_geojson(objects);
    const auto back = ground_truth_from_geojson(fc);
    REQUIRE(back.size() == 2);
    CHECK(back[0].kind == ObjectKind::tree);
    CHECK(back[0].crown_width_m == 5.5);
    CHECK(back[0].location.lat == objects[0].location.lat);
    CHECK(back[1].kind == ObjectKind::pole);
    // poles carry no crown property
    CHECK_FALSE(fc.at("features").at(1).at("properties").contains("crown_width_m"));
}

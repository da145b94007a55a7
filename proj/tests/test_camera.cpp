#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "curbsight/camera.hpp"
#include "curbsight/rng.hpp"

using namespace curbsight;

namespace {
CameraIntrinsics hfov120() {
    CameraIntrinsics c;
    c.hfov_deg = 120.0;
    c.focal_length_mm = 1.0;  // keep sensor-derived hfov irrelevant here
    c.sensor_width_mm = 2.0 * std::tan(60.0 * kDegToRad);
    return c;
}
}  // namespace

TEST_CASE("pixel_to_angle center, edge, and interior pixels") {
    const CameraIntrinsics c = hfov120();
    CHECK(pixel_to_angle(1920.0, c) == 0.0);
    CHECK(pixel_to_angle(0.0, c) == doctest::Approx(60.0));
    CHECK(pixel_to_angle(2880.0, c) == doctest::Approx(-30.0));
    CHECK_THROWS_AS(pixel_to_angle(-1.0, c), InvalidInput);
    CHECK_THROWS_AS(pixel_to_angle(5000.0, c), InvalidInput);
}

TEST_CASE("pixel_to_angle is odd about the image center") {
    const CameraIntrinsics c = hfov120();
    for (double k : {1.0, 100.0, 500.0, 1919.0})
        CHECK(pixel_to_angle(1920.0 + k, c) ==
              doctest::Approx(-pixel_to_angle(1920.0 - k, c)).epsilon(1e-12));
}

TEST_CASE("angle_to_pixel inverts pixel_to_angle") {
    const CameraIntrinsics c;  // defaults, hfov derived
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const double u = rng.uniform(0.0, c.image_width_px);
        CHECK(angle_to_pixel(pixel_to_angle(u, c), c) == doctest::Approx(u).epsilon(1e-12));
    }
}

TEST_CASE("hfov_from_sensor") {
    CameraIntrinsics c;
    c.sensor_width_mm = 7.2;
    c.focal_length_mm = 3.6;
    CHECK(hfov_from_sensor(c) == doctest::Approx(90.0));
    c.sensor_width_mm = 5.184;
    CHECK(hfov_from_sensor(c) ==
          doctest::Approx(2.0 * std::atan(0.72) / kDegToRad).epsilon(1e-12));
    CHECK(hfov_from_sensor(c) == doctest::Approx(71.6).epsilon(0.01));
    c.sensor_width_mm = 1e-9;
    CHECK(hfov_from_sensor(c) == doctest::Approx(0.0).epsilon(1e-6));
}

TEST_CASE("intrinsics validation") {
    CameraIntrinsics c;
    CHECK_NOTHROW(validate(c));
    c.hfov_deg = hfov_from_sensor(c) + 0.5;  // within tolerance
    CHECK_NOTHROW(validate(c));
    c.hfov_deg = hfov_from_sensor(c) + 10.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
    c = CameraIntrinsics{};
    c.focal_length_mm = 0.0;
    CHECK_THROWS_AS(validate(c), ConfigError);
}

TEST_CASE("estimate_height worked example") {
    CameraIntrinsics c;  // f 3.6, S_h 3.888, I_h 2160
    PixelMeasurement m;
    m.pixel_height = 1080.0;
    CHECK(estimate_height(m, 10.0, c) == doctest::Approx(5.4).epsilon(1e-12));
    CHECK(estimate_height(m, 20.0, c) == doctest::Approx(10.8).epsilon(1e-12));
    m.pixel_height = 0.0;
    CHECK(estimate_height(m, 10.0, c) == 0.0);
    m.pixel_height = 100.0;
    CHECK_THROWS_AS(estimate_height(m, 0.0, c), InvalidInput);
}

TEST_CASE("estimate_width worked example") {
    CameraIntrinsics c;  // f 3.6, S_w 5.184, I_w 3840
    PixelMeasurement m;
    m.pixel_width = 384.0;
    CHECK(estimate_width(m, 10.0, c) == doctest::Approx(1.44).epsilon(1e-12));
    m.pixel_width = 768.0;
    CHECK(estimate_width(m, 10.0, c) == doctest::Approx(2.88).epsilon(1e-12));
    m.pixel_width = 0.0;
    CHECK(estimate_width(m, 10.0, c) == 0.0);
    CHECK(estimate_width_px(384.0, 10.0, c) == doctest::Approx(1.44).epsilon(1e-12));
}

TEST_CASE("height and width are linear in pixel extent and distance") {
    CameraIntrinsics c;
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
        PixelMeasurement m;
        m.pixel_height = rng.uniform(1.0, 2000.0);
        m.pixel_width = rng.uniform(1.0, 2000.0);
        const double d = rng.uniform(1.0, 50.0);
        const double s = rng.uniform(0.1, 5.0);
        PixelMeasurement ms = m;
        ms.pixel_height *= s;
        ms.pixel_width *= s;
        CHECK(estimate_height(ms, d, c) ==
              doctest::Approx(s * estimate_height(m, d, c)).epsilon(1e-12));
        CHECK(estimate_width(m, s * d, c) ==
              doctest::Approx(s * estimate_width(m, d, c)).epsilon(1e-12));
    }
}

TEST_CASE("terrain correction: flat, upslope, downslope") {
    CHECK(terrain_corrected_height(5.0, 10.0, {100.0, 100.0}) == 5.0);

    // D = 10, delta = +3: D_h = sqrt(91), tan(slope) = 3/sqrt(91)
    const double dh = std::sqrt(100.0 - 9.0);
    const double expected_up = 5.0 + 5.0 * (3.0 / dh);
    CHECK(terrain_corrected_height(5.0, 10.0, {100.0, 103.0}) ==
          doctest::Approx(expected_up).epsilon(1e-12));
    CHECK(dh == doctest::Approx(9.539).epsilon(1e-3));
    CHECK(expected_up == doctest::Approx(6.572).epsilon(1e-3));

    const double expected_down = 5.0 - 5.0 * (3.0 / dh);
    CHECK(terrain_corrected_height(5.0, 10.0, {100.0, 97.0}) ==
          doctest::Approx(expected_down).epsilon(1e-12));
    CHECK(expected_down == doctest::Approx(3.428).epsilon(1e-3));

    CHECK_THROWS_AS(terrain_corrected_height(5.0, 2.0, {100.0, 103.0}), GeometryError);
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "curbsight/simulate.hpp"
#include "curbsight/triangulate.hpp"

using namespace curbsight;

TEST_CASE("generate_scene: deterministic, class mix, flat DEM") {
    SceneConfig cfg;
    const Scene a = generate_scene(cfg, 5);
    const Scene b = generate_scene(cfg, 5);
    REQUIRE(a.objects.size() == b.objects.size());
    for (std::size_t i = 0; i < a.objects.size(); ++i) {
        CHECK(a.objects[i].location.lat == b.objects[i].location.lat);
        CHECK(a.objects[i].height_m == b.objects[i].height_m);
    }
    CHECK(a.track.poses.size() == b.track.poses.size());

    // class mix mirrors the configured counts (field-study mix: 38/17/8)
    SceneConfig mix;
    mix.n_trees = 38;
    mix.n_poles = 17;
    mix.n_other = 8;
    const Scene s = generate_scene(mix, 1);
    std::map<ObjectKind, int> counts;
    for (const auto& o : s.objects) counts[o.kind]++;
    CHECK(counts[ObjectKind::tree] == 38);
    CHECK(counts[ObjectKind::pole] == 17);
    CHECK(counts[ObjectKind::other] == 8);
    CHECK(s.objects.size() == 63);

    // flat DEM config: every base elevation equals the base
    SceneConfig flat;
    flat.dem_north_slope = 0.0;
    flat.dem_east_slope = 0.0;
    const Scene f = generate_scene(flat, 2);
    for (const auto& o : f.objects)
        CHECK(o.base_elevation_m == doctest::Approx(flat.dem_base_elevation_m));
}

TEST_CASE("pose spacing follows the speed class; frame ids stride by 30") {
    SceneConfig cfg;
    cfg.speed_class = SpeedClass::slow;
    const Scene slow = generate_scene(cfg, 3);
    cfg.speed_class = SpeedClass::high;
    const Scene fast = generate_scene(cfg, 3);
    CHECK(slow.track.poses.size() > fast.track.poses.size());
    const double d_slow = haversine_distance(slow.track.poses[0].position,
                                             slow.track.poses[1].position);
    const double d_fast = haversine_distance(fast.track.poses[0].position,
                                             fast.track.poses[1].position);
    CHECK(d_slow == doctest::Approx(8.0).epsilon(1e-4));
    CHECK(d_fast == doctest::Approx(14.0).epsilon(1e-4));
    CHECK(slow.track.poses[1].frame_id == 30);
    CHECK(slow.track.poses[2].frame_id == 60);
    CHECK(mount_height_m(Mount::inside) == 1.2);
    CHECK(mount_height_m(Mount::outside) == 0.9);
}

TEST_CASE("project_observation: forward pinhole worked example") {
    SceneConfig cfg;  // flat DEM at 100 m
    const Scene scene = generate_scene(cfg, 1);
    const CameraIntrinsics intr;

    // object 10 m due north of the first pose, on flat ground at camera level:
    // mount height cancels nothing here, so choose elevations equal.
    SceneObject obj;
    obj.object_id = 99;
    obj.kind = ObjectKind::other;
    CameraPose pose = scene.track.poses.front();
    obj.location = from_local_xy({0.0, 10.0}, pose.position);
    obj.base_elevation_m = cfg.dem_base_elevation_m + intr.mount_height_m;  // delta = 0
    obj.height_m = 5.4;
    obj.width_m = 1.44;

    const auto proj = project_observation(obj, pose, intr, scene.dem, 30.0);
    REQUIRE(proj.has_value());
    CHECK(proj->true_distance_m == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(proj->pixel.u == doctest::Approx(intr.image_width_px / 2.0).epsilon(1e-6));
    // h = H * f * I_h / (D * S) = 5.4 * 3.6 * 2160 / (10 * 3.888) = 1080
    CHECK(proj->pixel.pixel_height == doctest::Approx(1080.0).epsilon(1e-9));
    CHECK(proj->pixel.pixel_width == doctest::Approx(384.0).epsilon(1e-9));

    // round trip through the measurement path
    CHECK(estimate_height(proj->pixel, proj->true_distance_m, intr) ==
          doctest::Approx(5.4).epsilon(1e-12));
    CHECK(estimate_width(proj->pixel, proj->true_distance_m, intr) ==
          doctest::Approx(1.44).epsilon(1e-12));

    // outside the frustum: object abeam of a north-facing camera
    SceneObject beam = obj;
    beam.location = from_local_xy({10.0, 0.0}, pose.position);
    CHECK_FALSE(project_observation(beam, pose, intr, scene.dem, 30.0).has_value());

    // beyond max range
    SceneObject far = obj;
    far.location = from_local_xy({0.0, 50.0}, pose.position);
    CHECK_FALSE(project_observation(far, pose, intr, scene.dem, 30.0).has_value());
}

TEST_CASE("inject_depth_bias: knee model") {
    NoiseConfig noise;
    noise.depth_knee_m = 15.0;
    noise.depth_compression = 0.5;
    noise.depth_sample_sigma_m = 0.0;
    Rng rng(1);
    auto s = inject_depth_bias(10.0, noise, rng);
    CHECK(s[0] == 10.0);
    CHECK(s[1] == 10.0);
    CHECK(s[2] == 10.0);
    s = inject_depth_bias(30.0, noise, rng);
    CHECK(s[0] == doctest::Approx(22.5));  // 15 + 0.5 * 15

    noise.depth_sample_sigma_m = 0.5;
    s = inject_depth_bias(10.0, noise, rng);
    const double mean = (s[0] + s[1] + s[2]) / 3.0;
    double var = 0.0;
    for (double v : s) var += (v - mean) * (v - mean);
    CHECK(var > 0.0);

    CHECK_THROWS_AS(inject_depth_bias(-1.0, noise, rng), InvalidInput);
}

TEST_CASE("render_observations: determinism and systematic offset") {
    SceneConfig cfg;
    cfg.trajectory_length_m = 120.0;
    cfg.object_span_m = 130.0;
    cfg.n_trees = 4;
    cfg.n_poles = 2;
    cfg.n_other = 1;
    const Scene scene = generate_scene(cfg, 11);
    const CameraIntrinsics intr;

    NoiseConfig noise;
    noise.seed = 21;
    noise.gps_systematic_east_m = 3.0;
    noise.gps_systematic_north_m = 2.0;

    const RenderedScene r1 = render_observations(scene, intr, noise);
    const RenderedScene r2 = render_observations(scene, intr, noise);
    REQUIRE(r1.observations.size() == r2.observations.size());
    for (std::size_t i = 0; i < r1.observations.size(); ++i)
        CHECK(r1.observations[i].depth_samples == r2.observations[i].depth_samples);

    // zero jitter: every pose displaced by exactly the systematic vector
    for (std::size_t i = 0; i < scene.track.poses.size(); ++i) {
        const LocalXY d = to_local_xy(r1.noised_track.poses[i].position,
                                      scene.track.poses[i].position);
        CHECK(d.x == doctest::Approx(3.0).epsilon(1e-6));
        CHECK(d.y == doctest::Approx(2.0).epsilon(1e-6));
    }

    // the control pair encodes the same systematic offset
    REQUIRE(r1.control_points.size() == 1);
    const LocalXY cp = to_local_xy(r1.control_points[0].observed,
                                   r1.control_points[0].actual);
    CHECK(cp.x == doctest::Approx(3.0).epsilon(1e-6));
    CHECK(cp.y == doctest::Approx(2.0).epsilon(1e-6));

    // every observation satisfies schema invariants
    for (const auto& o : r1.observations) {
        for (double d : o.depth_samples) CHECK(d > 0.0);
        CHECK(o.pixel.u >= 0.0);
        CHECK(o.pixel.u < intr.image_width_px);
        CHECK(o.pixel.pixel_height >= 0.0);
    }
    CHECK(r1.distances.size() == r1.observations.size());
}

TEST_CASE("high speed class sees fewer sub-knee frames per object") {
    SceneConfig cfg;
    cfg.n_trees = 8;
    cfg.n_poles = 0;
    cfg.n_other = 0;
    cfg.lateral_min_m = 2.0;
    cfg.lateral_max_m = 5.0;

    const auto near_counts = [&](SpeedClass sc) {
        SceneConfig c = cfg;
        c.speed_class = sc;
        Scene scene = generate_scene(c, 17);
        std::map<std::int64_t, int> per_object;
        for (const auto& pose : scene.track.poses)
            for (const auto& obj : scene.objects) {
                const auto proj =
                    project_observation(obj, pose, CameraIntrinsics{}, scene.dem, 30.0);
                if (proj && proj->true_distance_m <= 15.0) per_object[obj.object_id]++;
            }
        double total = 0.0;
        for (const auto& [id, n] : per_object) total += n;
        return total / std::max<std::size_t>(1, per_object.size());
    };
    CHECK(near_counts(SpeedClass::slow) > near_counts(SpeedClass::high));
}

TEST_CASE("zero-noise forward model inverts exactly through triangulation") {
    SceneConfig cfg;
    cfg.dem_north_slope = 0.01;  // gentle slope exercises the terrain path
    const Scene scene = generate_scene(cfg, 23);
    const CameraIntrinsics intr;
    NoiseConfig zero;
    zero.depth_compression = 1.0;
    const RenderedScene r = render_observations(scene, intr, zero);

    std::map<std::int64_t, std::vector<TriangulationObservation>> by_object;
    std::map<std::int64_t, const CameraPose*> pose_of;
    for (const auto& p : r.noised_track.poses) pose_of[p.frame_id] = &p;
    for (const auto& o : r.observations) {
        TriangulationObservation t;
        t.pose = *pose_of.at(o.frame_id);
        t.pixel = o.pixel;
        t.corrected_depth_m =
            (o.depth_samples[0] + o.depth_samples[1] + o.depth_samples[2]) / 3.0;
        by_object[o.object_id].push_back(t);
    }

    std::map<std::int64_t, const SceneObject*> truth;
    for (const auto& o : scene.objects) truth[o.object_id] = &o;

    int located = 0;
    for (const auto& [id, obs] : by_object) {
        if (obs.size() < 3) continue;
        const auto est = geolocate_object(obs, intr);
        CHECK(haversine_distance(est.location, truth.at(id)->location) < 1e-3);
        ++located;
    }
    CHECK(located >= 10);
}

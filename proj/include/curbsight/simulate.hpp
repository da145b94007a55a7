#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "curbsight/camera.hpp"
#include "curbsight/errors.hpp"
#include "curbsight/geodesy.hpp"
#include "curbsight/ingest.hpp"
#include "curbsight/observation.hpp"
#include "curbsight/rng.hpp"
#include "curbsight/triangulate.hpp"

namespace curbsight {

/// Scene layout knobs. Distances in meters, angles in degrees.
struct SceneConfig {
    GeoPoint origin{41.8, -72.25};
    double road_heading_deg = 0.0;  // compass; 0 = due north
    double trajectory_length_m = 300.0;
    double object_span_m = 330.0;   // objects may sit beyond the trajectory end
    std::size_t n_trees = 12;
    std::size_t n_poles = 5;
    std::size_t n_other = 3;
    double lateral_min_m = 2.0;
    double lateral_max_m = 12.0;
    double max_range_m = 30.0;
    SpeedClass speed_class = SpeedClass::slow;
    Mount mount = Mount::inside;
    // Planar DEM: elevation = base + north_slope * north_m + east_slope * east_m
    double dem_base_elevation_m = 100.0;
    double dem_north_slope = 0.0;
    double dem_east_slope = 0.0;
    double dem_cellsize_deg = 1e-4;
};

/// Pose spacings at 1 Hz representative of the two speed bands
/// (~29 km/h and ~50 km/h).
inline double pose_spacing_m(SpeedClass s) { return s == SpeedClass::slow ? 8.0 : 14.0; }
inline double mount_height_m(Mount m) { return m == Mount::inside ? 1.2 : 0.9; }

/// Sensor noise model. The depth bias is piecewise linear: identity below the
/// knee, compressed slope beyond it.
struct NoiseConfig {
    double gps_systematic_east_m = 0.0;
    double gps_systematic_north_m = 0.0;
    double gps_jitter_sigma_m = 0.0;
    double depth_knee_m = 15.0;
    double depth_compression = 1.0;  // slope beyond the knee, (0, 1]
    double depth_sample_sigma_m = 0.0;
    double pixel_jitter_sigma_px = 0.0;
    double pixel_jitter_speed_scale = 1.0;  // extra factor for the high speed class
    std::uint64_t seed = 0;
};

struct Scene {
    std::vector<SceneObject> objects;
    Track track;  // true poses
    DemGrid dem;
};

namespace detail_sim {

/// Local frame of the scene origin: +x east, +y north.
inline LocalXY road_point(const SceneConfig& cfg, double along_m, double lateral_m) {
    const double head = (90.0 - cfg.road_heading_deg) * kDegToRad;  // math convention
    const double fx = std::cos(head), fy = std::sin(head);
    // lateral +1 = right of travel direction
    const double rx = fy, ry = -fx;
    return {along_m * fx + lateral_m * rx, along_m * fy + lateral_m * ry};
}

inline double plane_elevation(const SceneConfig& cfg, const LocalXY& xy) {
    return cfg.dem_base_elevation_m + cfg.dem_north_slope * xy.y + cfg.dem_east_slope * xy.x;
}

}  // namespace detail_sim

/// Build the planar DEM covering the scene bounding box with margin.
inline DemGrid build_dem(const SceneConfig& cfg) {
    const double extent = cfg.object_span_m + 150.0;
    DemGrid dem;
    dem.cellsize = cfg.dem_cellsize_deg;
    const double cell_m_lat = dem.cellsize * kMetersPerDegree;
    const double cos_ref = std::cos(cfg.origin.lat * kDegToRad);
    const double cell_m_lon = cell_m_lat * cos_ref;
    dem.nrows = static_cast<std::size_t>(std::ceil(2.0 * extent / cell_m_lat)) + 1;
    dem.ncols = static_cast<std::size_t>(std::ceil(2.0 * extent / cell_m_lon)) + 1;
    dem.yllcorner = cfg.origin.lat - (static_cast<double>(dem.nrows) * dem.cellsize) / 2.0;
    dem.xllcorner = cfg.origin.lon - (static_cast<double>(dem.ncols) * dem.cellsize) / 2.0;
    dem.values.resize(dem.nrows * dem.ncols);
    for (std::size_t r = 0; r < dem.nrows; ++r) {
        for (std::size_t c = 0; c < dem.ncols; ++c) {
            // row 0 is the northernmost row; cell centers
            const double lat =
                dem.yllcorner + (static_cast<double>(dem.nrows - 1 - r) + 0.5) * dem.cellsize;
            const double lon = dem.xllcorner + (static_cast<double>(c) + 0.5) * dem.cellsize;
            const LocalXY xy = to_local_xy({lat, lon}, cfg.origin);
            dem.values[r * dem.ncols + c] = detail_sim::plane_elevation(cfg, xy);
        }
    }
    return dem;
}

/// Deterministic synthetic scene: straight road, objects at random lateral
/// offsets on both sides, planar DEM.
inline Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
    Scene scene;
    scene.dem = build_dem(cfg);

    scene.track.speed_class = cfg.speed_class;
    scene.track.mount = cfg.mount;
    const double spacing = pose_spacing_m(cfg.speed_class);
    const std::size_t n_poses =
        static_cast<std::size_t>(std::floor(cfg.trajectory_length_m / spacing)) + 1;
    for (std::size_t i = 0; i < n_poses; ++i) {
        CameraPose pose;
        const LocalXY xy = detail_sim::road_point(cfg, static_cast<double>(i) * spacing, 0.0);
        pose.position = from_local_xy(xy, cfg.origin);
        pose.azimuth_deg = normalize_angle_deg(cfg.road_heading_deg);
        pose.timestamp_s = static_cast<double>(i);
        pose.frame_id = static_cast<std::int64_t>(i) * 30;
        scene.track.poses.push_back(pose);
    }

    Rng rng(seed);
    const std::size_t total = cfg.n_trees + cfg.n_poles + cfg.n_other;
    for (std::size_t i = 0; i < total; ++i) {
        SceneObject obj;
        obj.object_id = static_cast<std::int64_t>(i + 1);
        if (i < cfg.n_trees)
            obj.kind = ObjectKind::tree;
        else if (i < cfg.n_trees + cfg.n_poles)
            obj.kind = ObjectKind::pole;
        else
            obj.kind = ObjectKind::other;

        // Spread objects evenly along the span with a random offset so every
        // distance regime is populated.
        const double slot = cfg.object_span_m / static_cast<double>(total);
        const double along = slot * (static_cast<double>(i) + rng.uniform(0.2, 0.8));
        const double side = rng.uniform01() < 0.5 ? -1.0 : 1.0;
        const double lateral = side * rng.uniform(cfg.lateral_min_m, cfg.lateral_max_m);
        const LocalXY xy = detail_sim::road_point(cfg, along, lateral);
        obj.location = from_local_xy(xy, cfg.origin);
        obj.base_elevation_m = detail_sim::plane_elevation(cfg, xy);

        switch (obj.kind) {
            case ObjectKind::tree:
                obj.height_m = rng.uniform(6.0, 15.0);
                obj.width_m = rng.uniform(0.2, 0.8);  // trunk (DBH)
                obj.crown_width_m = rng.uniform(2.0, 8.0);
                break;
            case ObjectKind::pole:
                obj.height_m = rng.uniform(8.0, 12.0);
                obj.width_m = rng.uniform(0.25, 0.35);
                break;
            case ObjectKind::other:
                obj.height_m = rng.uniform(2.0, 5.0);
                obj.width_m = rng.uniform(0.3, 1.5);
                break;
        }
        scene.objects.push_back(obj);
    }
    return scene;
}

struct ProjectedObservation {
    PixelMeasurement pixel;
    double true_distance_m = 0.0;  // ground (horizontal) distance camera->object
};

/// Exact forward pinhole projection of an object from a pose; empty when the
/// bearing falls outside the horizontal frustum or beyond max range. The
/// pixel height is chosen so the inverse pipeline (pixel angle, pinhole
/// height, slope correction) reproduces the true object height exactly.
inline std::optional<ProjectedObservation> project_observation(
    const SceneObject& object, const CameraPose& pose, const CameraIntrinsics& intrinsics,
    const DemGrid& dem, double max_range_m = 30.0) {
    const LocalXY d = to_local_xy(object.location, pose.position);
    const double dist = std::hypot(d.x, d.y);
    if (dist < 0.5 || dist > max_range_m) return std::nullopt;

    const double bearing_math = std::atan2(d.y, d.x) / kDegToRad;
    double theta = bearing_math - (90.0 - pose.azimuth_deg);
    theta = std::remainder(theta, 360.0);
    if (std::abs(theta) > effective_hfov(intrinsics) / 2.0) return std::nullopt;

    const DemSample cam_ground = sample_dem(dem, pose.position);
    if (cam_ground.nodata) return std::nullopt;
    const double camera_elev = cam_ground.elevation_m + intrinsics.mount_height_m;
    const double delta = object.base_elevation_m - camera_elev;
    if (dist <= std::abs(delta)) return std::nullopt;

    const double d_horizontal = std::sqrt(dist * dist - delta * delta);
    const double slope_factor = 1.0 + delta / d_horizontal;  // 1 + tan(slope)
    if (slope_factor <= 0.1) return std::nullopt;
    const double apparent_height = object.height_m / slope_factor;

    ProjectedObservation out;
    out.true_distance_m = dist;
    out.pixel.u = angle_to_pixel(theta, intrinsics);
    out.pixel.pixel_height = apparent_height * intrinsics.focal_length_mm *
                             intrinsics.image_height_px /
                             (dist * intrinsics.sensor_height_mm);
    out.pixel.pixel_width = object.width_m * intrinsics.focal_length_mm *
                            intrinsics.image_width_px / (dist * intrinsics.sensor_width_mm);
    if (object.kind == ObjectKind::tree)
        out.pixel.pixel_crown_width = object.crown_width_m * intrinsics.focal_length_mm *
                                      intrinsics.image_width_px /
                                      (dist * intrinsics.sensor_width_mm);
    out.pixel.v = std::min(intrinsics.image_height_px - 1.0,
                           intrinsics.image_height_px * 0.55 + out.pixel.pixel_height / 4.0);
    if (out.pixel.u < 0.0 || out.pixel.u >= intrinsics.image_width_px) return std::nullopt;
    return out;
}

/// Piecewise-linear range bias plus per-sample gaussian noise; three samples.
inline std::array<double, 3> inject_depth_bias(double true_distance_m,
                                               const NoiseConfig& noise, Rng& rng) {
    if (!(true_distance_m > 0.0))
        throw InvalidInput("inject_depth_bias: distance must be positive");
    double mean = true_distance_m;
    if (true_distance_m > noise.depth_knee_m)
        mean = noise.depth_knee_m + noise.depth_compression * (true_distance_m - noise.depth_knee_m);
    std::array<double, 3> samples{};
    for (auto& s : samples)
        s = std::max(0.01, rng.gaussian(mean, noise.depth_sample_sigma_m));
    return samples;
}

struct TrueDistanceRecord {
    std::int64_t object_id = 0;
    std::int64_t frame_id = 0;
    double distance_m = 0.0;
};

struct RenderedScene {
    std::vector<Observation> observations;
    Track noised_track;                       // what the pipeline sees
    Track true_track;                         // kept for scoring
    std::vector<SceneObject> ground_truth;
    std::vector<TrueDistanceRecord> distances;  // per-observation training targets
    std::vector<ControlPair> control_points;
};

/// Full render: per pose x object visibility, noised GPS poses, jittered
/// pixels, biased depth samples. Deterministic under the noise seed; each
/// pose and pose-object pair draws from its own derived sub-stream, so the
/// output does not depend on iteration order.
inline RenderedScene render_observations(const Scene& scene,
                                         const CameraIntrinsics& intrinsics,
                                         const NoiseConfig& noise,
                                         double max_range_m = 30.0) {
    RenderedScene out;
    out.ground_truth = scene.objects;
    out.true_track = scene.track;
    out.noised_track.speed_class = scene.track.speed_class;
    out.noised_track.mount = scene.track.mount;

    const double pixel_sigma =
        noise.pixel_jitter_sigma_px *
        (scene.track.speed_class == SpeedClass::high ? noise.pixel_jitter_speed_scale : 1.0);

    for (std::size_t i = 0; i < scene.track.poses.size(); ++i) {
        const CameraPose& true_pose = scene.track.poses[i];
        Rng pose_rng(Rng::derive_seed(noise.seed, i));
        CameraPose noised = true_pose;
        const LocalXY shift{
            noise.gps_systematic_east_m + pose_rng.gaussian(0.0, noise.gps_jitter_sigma_m),
            noise.gps_systematic_north_m + pose_rng.gaussian(0.0, noise.gps_jitter_sigma_m)};
        noised.position = from_local_xy(shift, true_pose.position);
        out.noised_track.poses.push_back(noised);

        for (std::size_t j = 0; j < scene.objects.size(); ++j) {
            const auto proj = project_observation(scene.objects[j], true_pose, intrinsics,
                                                  scene.dem, max_range_m);
            if (!proj) continue;
            Rng obs_rng(Rng::derive_seed(noise.seed, 1000003ULL * (i + 1) + j));
            Observation obs;
            obs.object_id = scene.objects[j].object_id;
            obs.frame_id = true_pose.frame_id;
            obs.pixel = proj->pixel;
            if (pixel_sigma > 0.0) {
                obs.pixel.u = std::clamp(obs.pixel.u + obs_rng.gaussian(0.0, pixel_sigma),
                                         0.0, intrinsics.image_width_px - 1.0);
                obs.pixel.pixel_height = std::max(
                    1.0, obs.pixel.pixel_height + obs_rng.gaussian(0.0, pixel_sigma));
                obs.pixel.pixel_width = std::max(
                    0.5, obs.pixel.pixel_width + obs_rng.gaussian(0.0, pixel_sigma / 2.0));
            }
            obs.depth_samples = inject_depth_bias(proj->true_distance_m, noise, obs_rng);
            out.observations.push_back(obs);
            out.distances.push_back(
                {obs.object_id, obs.frame_id, proj->true_distance_m});
        }
    }

    // One control pair: the first pose as seen with only the systematic
    // offset (a landmark alignment removes the systematic part, not the
    // per-pose jitter).
    if (!scene.track.poses.empty()) {
        const GeoPoint true_first = scene.track.poses.front().position;
        const GeoPoint observed_first = from_local_xy(
            {noise.gps_systematic_east_m, noise.gps_systematic_north_m}, true_first);
        out.control_points.push_back({observed_first, true_first});
    }
    return out;
}

}  // namespace curbsight

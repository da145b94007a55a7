#pragma once

#include <cmath>
#include <numbers>

#include "curbsight/errors.hpp"

namespace curbsight {

/// Sensor/lens geometry of the dashcam. Focal length and sensor dimensions
/// share one length unit (mm); all ratios are unitless so the choice never
/// leaks into results.
struct CameraIntrinsics {
    double focal_length_mm = 3.6;
    double sensor_width_mm = 5.184;
    double sensor_height_mm = 3.888;
    double image_width_px = 3840.0;
    double image_height_px = 2160.0;
    double hfov_deg = 0.0;  // 0 = derive from sensor geometry
    double mount_height_m = 1.2;
};

/// Annotated per-frame pixel measurement of one object.
struct PixelMeasurement {
    double u = 0.0;
    double v = 0.0;
    double pixel_height = 0.0;
    double pixel_width = 0.0;
    double pixel_crown_width = 0.0;  // 0 when not annotated (non-trees)
};

/// Elevations feeding the terrain slope correction.
struct TerrainContext {
    double camera_elevation_m = 0.0;
    double object_base_elevation_m = 0.0;
};

/// Horizontal FOV implied by the sensor geometry, degrees.
inline double hfov_from_sensor(const CameraIntrinsics& c) {
    return 2.0 * std::atan(c.sensor_width_mm / (2.0 * c.focal_length_mm)) * 180.0 /
           std::numbers::pi;
}

inline double effective_hfov(const CameraIntrinsics& c) {
    return c.hfov_deg > 0.0 ? c.hfov_deg : hfov_from_sensor(c);
}

/// Throws ConfigError when the intrinsics are not self-consistent.
inline void validate(const CameraIntrinsics& c, double hfov_tolerance_deg = 2.0) {
    if (c.focal_length_mm <= 0 || c.sensor_width_mm <= 0 || c.sensor_height_mm <= 0 ||
        c.image_width_px <= 0 || c.image_height_px <= 0 || c.mount_height_m <= 0)
        throw ConfigError("intrinsics: all dimensions must be strictly positive");
    if (c.hfov_deg != 0.0) {
        if (c.hfov_deg <= 0.0 || c.hfov_deg >= 180.0)
            throw ConfigError("intrinsics: hfov must lie in (0, 180) degrees");
        if (std::abs(c.hfov_deg - hfov_from_sensor(c)) > hfov_tolerance_deg)
            throw ConfigError("intrinsics: supplied hfov disagrees with sensor-derived hfov");
    }
}

/// Horizontal pixel column -> angle off the optical axis, degrees.
/// Positive angles are left of image center.
inline double pixel_to_angle(double u, const CameraIntrinsics& c) {
    if (u < 0.0 || u > c.image_width_px)
        throw InvalidInput("pixel_to_angle: u outside image");
    return -((u - c.image_width_px / 2.0) / c.image_width_px) * effective_hfov(c);
}

/// Inverse of pixel_to_angle; used by the simulator's forward projection.
inline double angle_to_pixel(double theta_deg, const CameraIntrinsics& c) {
    return c.image_width_px / 2.0 - theta_deg * c.image_width_px / effective_hfov(c);
}

/// Metric height from pixel height and camera-object distance.
inline double estimate_height(const PixelMeasurement& m, double distance_m,
                              const CameraIntrinsics& c) {
    if (distance_m <= 0.0)
        throw InvalidInput("estimate_height: distance must be positive");
    return m.pixel_height * distance_m * c.sensor_height_mm /
           (c.focal_length_mm * c.image_height_px);
}

inline double estimate_width(const PixelMeasurement& m, double distance_m,
                             const CameraIntrinsics& c) {
    if (distance_m <= 0.0)
        throw InvalidInput("estimate_width: distance must be positive");
    return m.pixel_width * distance_m * c.sensor_width_mm /
           (c.focal_length_mm * c.image_width_px);
}

/// Width estimate for an arbitrary pixel extent (crown annotations).
inline double estimate_width_px(double pixel_width, double distance_m,
                                const CameraIntrinsics& c) {
    if (distance_m <= 0.0)
        throw InvalidInput("estimate_width_px: distance must be positive");
    return pixel_width * distance_m * c.sensor_width_mm /
           (c.focal_length_mm * c.image_width_px);
}

/// Slope correction: adds the elevation-induced height offset for objects
/// whose base sits above or below the camera.
inline double terrain_corrected_height(double height_m, double distance_m,
                                       const TerrainContext& ctx) {
    const double delta = ctx.object_base_elevation_m - ctx.camera_elevation_m;
    if (distance_m <= std::abs(delta))
        throw GeometryError("terrain_corrected_height: distance <= |elevation difference|");
    const double d_horizontal = std::sqrt(distance_m * distance_m - delta * delta);
    const double slope = std::atan2(delta, d_horizontal);
    return height_m + height_m * std::tan(slope);
}

}  // namespace curbsight

#pragma once

#include <cmath>
#include <numbers>

#include "curbsight/errors.hpp"

namespace curbsight {

/// Earth radius (m) shared by the tangent-plane projection and the haversine
/// error metric. WGS84 equatorial radius; configurable at call sites that
/// need to match external tools using the mean radius 6,371,000 m.
inline constexpr double kEarthRadiusM = 6378137.0;

inline constexpr double kDegToRad = std::numbers::pi / 180.0;

/// Meters per degree of great-circle arc at kEarthRadiusM.
inline constexpr double kMetersPerDegree = kEarthRadiusM * kDegToRad;

/// WGS84 latitude/longitude in degrees.
struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;
};

/// Meters east/north of an (externally tracked) reference GeoPoint.
struct LocalXY {
    double x = 0.0;
    double y = 0.0;
};

inline bool is_valid(const GeoPoint& p) {
    return std::isfinite(p.lat) && std::isfinite(p.lon) && p.lat >= -90.0 &&
           p.lat <= 90.0 && p.lon >= -180.0 && p.lon <= 180.0;
}

/// Equirectangular projection onto the tangent plane at `reference`.
/// Valid for small areas (offsets well under a degree).
inline LocalXY to_local_xy(const GeoPoint& point, const GeoPoint& reference) {
    if (!is_valid(point) || !is_valid(reference))
        throw InvalidInput("to_local_xy: non-finite or out-of-range coordinate");
    const double cos_ref = std::cos(reference.lat * kDegToRad);
    return {(point.lon - reference.lon) * kMetersPerDegree * cos_ref,
            (point.lat - reference.lat) * kMetersPerDegree};
}

/// Exact algebraic inverse of to_local_xy.
inline GeoPoint from_local_xy(const LocalXY& xy, const GeoPoint& reference) {
    if (!is_valid(reference))
        throw InvalidInput("from_local_xy: invalid reference");
    const double cos_ref = std::cos(reference.lat * kDegToRad);
    if (std::abs(cos_ref) < 1e-12)
        throw GeometryError("from_local_xy: polar reference degenerates the projection");
    return {reference.lat + xy.y / kMetersPerDegree,
            reference.lon + xy.x / (kMetersPerDegree * cos_ref)};
}

/// Great-circle distance in meters.
inline double haversine_distance(const GeoPoint& a, const GeoPoint& b,
                                 double radius = kEarthRadiusM) {
    if (!is_valid(a) || !is_valid(b))
        throw InvalidInput("haversine_distance: invalid GeoPoint");
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dphi = (b.lat - a.lat) * kDegToRad;
    const double dlam = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlam / 2.0);
    const double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    return 2.0 * radius * std::asin(std::min(1.0, std::sqrt(h)));
}

inline double norm(const LocalXY& v) { return std::hypot(v.x, v.y); }

}  // namespace curbsight

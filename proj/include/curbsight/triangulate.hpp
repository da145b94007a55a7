#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "curbsight/camera.hpp"
#include "curbsight/errors.hpp"
#include "curbsight/geodesy.hpp"

namespace curbsight {

/// Per-frame camera state joined from the GPS track.
struct CameraPose {
    GeoPoint position;
    double azimuth_deg = 0.0;  // clockwise from true north, [0, 360)
    double timestamp_s = 0.0;
    std::int64_t frame_id = 0;
};

struct CandidatePoint {
    LocalXY xy;
    std::int64_t source_frame = 0;
    double depth_used = 0.0;
    double bearing_used = 0.0;
};

struct GeolocationEstimate {
    GeoPoint location;
    std::size_t n_candidates = 0;
    double dispersion_m = 0.0;  // mean candidate distance to the median
    bool converged = false;
};

inline double normalize_angle_deg(double a) {
    a = std::fmod(a, 360.0);
    if (a < 0.0) a += 360.0;
    return a;
}

/// Compass azimuth + pixel angle -> math-convention bearing measured
/// counterclockwise from local east, so a candidate offset is
/// (d*cos(bearing), d*sin(bearing)).
inline double bearing(const CameraPose& pose, double theta_deg) {
    return normalize_angle_deg(90.0 - pose.azimuth_deg + theta_deg);
}

inline CandidatePoint candidate_point(const CameraPose& pose, double theta_deg,
                                      double depth_m, const GeoPoint& reference) {
    if (depth_m <= 0.0)
        throw InvalidInput("candidate_point: depth must be positive");
    const double b = bearing(pose, theta_deg);
    const LocalXY cam = to_local_xy(pose.position, reference);
    const double b_rad = b * kDegToRad;
    return {{cam.x + depth_m * std::cos(b_rad), cam.y + depth_m * std::sin(b_rad)},
            pose.frame_id, depth_m, b};
}

struct MedianResult {
    LocalXY point;
    bool converged = false;
    std::size_t iterations = 0;
};

inline double sum_of_distances(const LocalXY& p, const std::vector<LocalXY>& pts) {
    double s = 0.0;
    for (const auto& q : pts) s += std::hypot(p.x - q.x, p.y - q.y);
    return s;
}

/// Geometric median by Weiszfeld iteration with the Vardi-Zhang step when an
/// iterate lands on an input point. Initialized at the centroid. Convergence
/// is declared when the step length falls below tol or the objective
/// improvement falls below tol*1e-3.
inline MedianResult geometric_median(const std::vector<LocalXY>& points,
                                     double tol_m = 1e-6,
                                     std::size_t max_iter = 1000) {
    if (points.empty())
        throw InvalidInput("geometric_median: empty point set");
    if (points.size() == 1) return {points[0], true, 0};
    if (points.size() == 2)
        return {{(points[0].x + points[1].x) / 2.0, (points[0].y + points[1].y) / 2.0},
                true, 0};

    LocalXY y{0.0, 0.0};
    for (const auto& p : points) {
        y.x += p.x;
        y.y += p.y;
    }
    y.x /= static_cast<double>(points.size());
    y.y /= static_cast<double>(points.size());

    double obj = sum_of_distances(y, points);
    const double coincide_eps = 1e-12;

    for (std::size_t it = 0; it < max_iter; ++it) {
        double wsum = 0.0;
        LocalXY num{0.0, 0.0};
        LocalXY r{0.0, 0.0};  // subgradient of the non-coincident part
        double coincident_count = 0.0;
        for (const auto& p : points) {
            const double d = std::hypot(y.x - p.x, y.y - p.y);
            if (d < coincide_eps) {
                coincident_count += 1.0;
                continue;
            }
            const double w = 1.0 / d;
            wsum += w;
            num.x += w * p.x;
            num.y += w * p.y;
            r.x += (p.x - y.x) * w;
            r.y += (p.y - y.y) * w;
        }
        if (wsum == 0.0) return {y, true, it};  // all points coincide with y

        LocalXY next;
        if (coincident_count > 0.0) {
            const double rnorm = std::hypot(r.x, r.y);
            if (rnorm <= coincident_count) return {y, true, it};  // optimality
            const double step = (rnorm - coincident_count) / wsum;
            next = {y.x + step * r.x / rnorm, y.y + step * r.y / rnorm};
        } else {
            next = {num.x / wsum, num.y / wsum};
        }

        const double step_len = std::hypot(next.x - y.x, next.y - y.y);
        const double next_obj = sum_of_distances(next, points);
        const bool done = step_len < tol_m || (obj - next_obj) < tol_m * 1e-3;
        y = next;
        obj = next_obj;
        if (done) return {y, true, it + 1};
    }
    return {y, false, max_iter};
}

/// One observation ready for triangulation: pose, pixel, corrected depth.
struct TriangulationObservation {
    CameraPose pose;
    PixelMeasurement pixel;
    double corrected_depth_m = 0.0;
};

/// Full per-object geolocation: pixel angles, candidate points in the local
/// frame anchored at the first observing pose, geometric median, back to
/// geographic coordinates.
inline GeolocationEstimate geolocate_object(
    const std::vector<TriangulationObservation>& observations,
    const CameraIntrinsics& intrinsics, std::size_t min_candidates = 3,
    double tol_m = 1e-6, std::size_t max_iter = 1000) {
    if (observations.size() < min_candidates)
        throw InsufficientObservations(
            "geolocate_object: " + std::to_string(observations.size()) + " observations, " +
            std::to_string(min_candidates) + " required");

    const GeoPoint reference = observations.front().pose.position;
    std::vector<LocalXY> pts;
    pts.reserve(observations.size());
    for (const auto& obs : observations) {
        const double theta = pixel_to_angle(obs.pixel.u, intrinsics);
        pts.push_back(candidate_point(obs.pose, theta, obs.corrected_depth_m, reference).xy);
    }

    const MedianResult med = geometric_median(pts, tol_m, max_iter);
    double dispersion = 0.0;
    for (const auto& p : pts)
        dispersion += std::hypot(p.x - med.point.x, p.y - med.point.y);
    dispersion /= static_cast<double>(pts.size());

    return {from_local_xy(med.point, reference), pts.size(), dispersion, med.converged};
}

}  // namespace curbsight

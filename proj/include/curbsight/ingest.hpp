#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "curbsight/errors.hpp"
#include "curbsight/geodesy.hpp"
#include "curbsight/observation.hpp"
#include "curbsight/triangulate.hpp"

namespace curbsight {

enum class SpeedClass { slow, high };
enum class Mount { inside, outside };

inline std::string to_string(SpeedClass s) { return s == SpeedClass::slow ? "slow" : "high"; }
inline std::string to_string(Mount m) { return m == Mount::inside ? "inside" : "outside"; }

/// Ordered camera poses with acquisition metadata.
struct Track {
    std::vector<CameraPose> poses;
    SpeedClass speed_class = SpeedClass::slow;
    Mount mount = Mount::inside;
};

enum class ObjectKind { tree, pole, other };

inline std::string to_string(ObjectKind k) {
    switch (k) {
        case ObjectKind::tree: return "tree";
        case ObjectKind::pole: return "pole";
        default: return "other";
    }
}

inline ObjectKind object_kind_from_string(const std::string& s) {
    if (s == "tree") return ObjectKind::tree;
    if (s == "pole") return ObjectKind::pole;
    if (s == "other") return ObjectKind::other;
    throw InvalidInput("unknown object kind: " + s);
}

/// Ground-truth description of one roadside object.
struct SceneObject {
    std::int64_t object_id = 0;
    ObjectKind kind = ObjectKind::other;
    GeoPoint location;
    double height_m = 0.0;
    double width_m = 0.0;
    double crown_width_m = 0.0;  // trees only
    double base_elevation_m = 0.0;
};

/// Row/col elevation raster in the ESRI ASCII grid layout (cell registration
/// via xllcorner/yllcorner; row 0 of the matrix is the northernmost row).
struct DemGrid {
    double xllcorner = 0.0;  // degrees lon
    double yllcorner = 0.0;  // degrees lat
    double cellsize = 0.0;   // degrees
    double nodata = -9999.0;
    std::size_t nrows = 0;
    std::size_t ncols = 0;
    std::vector<double> values;  // row-major, north to south

    double at(std::size_t row, std::size_t col) const { return values[row * ncols + col]; }
};

// ---------------------------------------------------------------------------
// Frame sampling and GPS correction
// ---------------------------------------------------------------------------

/// Keep poses whose frame index is a multiple of stride. Poses without GPS
/// never make it into a Track, so the GPS-metadata requirement is enforced at
/// parse time.
inline Track sample_frames(const Track& track, std::int64_t stride = 30) {
    if (stride < 1) throw InvalidInput("sample_frames: stride must be >= 1");
    Track out;
    out.speed_class = track.speed_class;
    out.mount = track.mount;
    for (const auto& p : track.poses)
        if (p.frame_id % stride == 0) out.poses.push_back(p);
    if (out.poses.empty()) throw InvalidInput("sample_frames: no usable frames");
    return out;
}

struct ControlPair {
    GeoPoint observed;
    GeoPoint actual;
};

struct GpsCorrection {
    Track track;
    LocalXY shift_m;                     // applied translation, meters east/north
    std::vector<double> residuals_m;     // per control pair after correction
    std::vector<bool> suspicious;        // pair farther than the warn threshold
};

/// Rigid translation by the mean (actual - observed) offset across control
/// pairs, expressed in the tangent frame of the first control point.
inline GpsCorrection correct_gps_offset(const Track& track,
                                        const std::vector<ControlPair>& pairs,
                                        double warn_distance_m = 50.0,
                                        bool hard_fail = false) {
    if (pairs.empty()) throw InvalidInput("correct_gps_offset: need at least 1 control pair");
    const GeoPoint ref = pairs.front().observed;
    LocalXY mean_shift{0.0, 0.0};
    std::vector<bool> suspicious;
    for (const auto& p : pairs) {
        const LocalXY obs = to_local_xy(p.observed, ref);
        const LocalXY act = to_local_xy(p.actual, ref);
        const double sep = std::hypot(act.x - obs.x, act.y - obs.y);
        suspicious.push_back(sep > warn_distance_m);
        if (sep > warn_distance_m && hard_fail)
            throw InvalidInput("correct_gps_offset: control pair separated by " +
                               std::to_string(sep) + " m");
        mean_shift.x += act.x - obs.x;
        mean_shift.y += act.y - obs.y;
    }
    mean_shift.x /= static_cast<double>(pairs.size());
    mean_shift.y /= static_cast<double>(pairs.size());

    GpsCorrection result;
    result.shift_m = mean_shift;
    result.suspicious = suspicious;
    for (const auto& p : pairs) {
        const LocalXY obs = to_local_xy(p.observed, ref);
        const LocalXY act = to_local_xy(p.actual, ref);
        result.residuals_m.push_back(
            std::hypot(act.x - obs.x - mean_shift.x, act.y - obs.y - mean_shift.y));
    }
    result.track = track;
    for (auto& pose : result.track.poses) {
        const LocalXY xy = to_local_xy(pose.position, ref);
        pose.position = from_local_xy({xy.x + mean_shift.x, xy.y + mean_shift.y}, ref);
    }
    return result;
}

// ---------------------------------------------------------------------------
// DEM sampling
// ---------------------------------------------------------------------------

struct DemSample {
    double elevation_m = 0.0;
    bool nodata = false;
};

/// Bilinear interpolation of the four surrounding cell centers. Points within
/// half a cell of the raster edge clamp to the border cells. Any nodata
/// corner poisons the sample.
inline DemSample sample_dem(const DemGrid& dem, const GeoPoint& point) {
    const double x = (point.lon - dem.xllcorner) / dem.cellsize;  // cells from west edge
    const double y = (point.lat - dem.yllcorner) / dem.cellsize;  // cells from south edge
    if (x < 0.0 || y < 0.0 || x > static_cast<double>(dem.ncols) ||
        y > static_cast<double>(dem.nrows))
        throw OutOfCoverage("sample_dem: point outside DEM bounds");

    const double fx = x - 0.5;  // cell-center coordinates
    const double fy = y - 0.5;
    const auto clamp_col = [&](double v) {
        return std::clamp(v, 0.0, static_cast<double>(dem.ncols - 1));
    };
    const auto clamp_row = [&](double v) {
        return std::clamp(v, 0.0, static_cast<double>(dem.nrows - 1));
    };
    const double cx = clamp_col(fx);
    const double cy = clamp_row(fy);
    const std::size_t c0 = static_cast<std::size_t>(std::floor(cx));
    const std::size_t c1 = std::min(c0 + 1, dem.ncols - 1);
    const std::size_t south0 = static_cast<std::size_t>(std::floor(cy));
    const std::size_t south1 = std::min(south0 + 1, dem.nrows - 1);
    const double tx = cx - std::floor(cx);
    const double ty = cy - std::floor(cy);

    // matrix rows run north to south
    const std::size_t r0 = dem.nrows - 1 - south0;
    const std::size_t r1 = dem.nrows - 1 - south1;
    const double v00 = dem.at(r0, c0), v01 = dem.at(r0, c1);
    const double v10 = dem.at(r1, c0), v11 = dem.at(r1, c1);
    for (double v : {v00, v01, v10, v11})
        if (v == dem.nodata) return {0.0, true};

    const double south_row = v00 * (1.0 - tx) + v01 * tx;
    const double north_row = v10 * (1.0 - tx) + v11 * tx;
    return {south_row * (1.0 - ty) + north_row * ty, false};
}

// ---------------------------------------------------------------------------
// CSV helpers
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::stringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.push_back("");
    return fields;
}

inline double parse_double(const std::string& s, const std::string& file, std::size_t line,
                           const std::string& field) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError(file, line, field, "not a number: '" + s + "'");
    }
}

inline std::int64_t parse_int(const std::string& s, const std::string& file, std::size_t line,
                              const std::string& field) {
    try {
        std::size_t pos = 0;
        const std::int64_t v = std::stoll(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        throw ParseError(file, line, field, "not an integer: '" + s + "'");
    }
}

inline std::string format_double(double v) {
    std::ostringstream ss;
    ss.precision(17);
    ss << v;
    return ss.str();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Observation CSV
// header: object_id,frame_id,u,v,pixel_height,pixel_width,depth1,depth2,depth3
//         [,pixel_crown_width]
// ---------------------------------------------------------------------------

inline const std::string kObservationHeader =
    "object_id,frame_id,u,v,pixel_height,pixel_width,depth1,depth2,depth3,"
    "pixel_crown_width";

inline std::vector<Observation> parse_observations(std::istream& in,
                                                   const std::string& file_name) {
    std::string line;
    if (!std::getline(in, line))
        throw ParseError(file_name, 0, "header", "empty file");
    const auto header = detail::split_csv_line(line);
    if (header.size() != 9 && header.size() != 10)
        throw ParseError(file_name, 1, "header", "expected 9 or 10 columns");
    if (header[0] != "object_id" || header[1] != "frame_id")
        throw ParseError(file_name, 1, "header", "unexpected header: " + line);

    std::vector<Observation> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != header.size())
            throw ParseError(file_name, line_no, "row",
                             "expected " + std::to_string(header.size()) + " fields, got " +
                                 std::to_string(f.size()));
        Observation o;
        o.object_id = detail::parse_int(f[0], file_name, line_no, "object_id");
        o.frame_id = detail::parse_int(f[1], file_name, line_no, "frame_id");
        o.pixel.u = detail::parse_double(f[2], file_name, line_no, "u");
        o.pixel.v = detail::parse_double(f[3], file_name, line_no, "v");
        o.pixel.pixel_height = detail::parse_double(f[4], file_name, line_no, "pixel_height");
        o.pixel.pixel_width = detail::parse_double(f[5], file_name, line_no, "pixel_width");
        for (int i = 0; i < 3; ++i) {
            o.depth_samples[static_cast<std::size_t>(i)] = detail::parse_double(
                f[static_cast<std::size_t>(6 + i)], file_name, line_no,
                "depth" + std::to_string(i + 1));
            if (!(o.depth_samples[static_cast<std::size_t>(i)] > 0.0))
                throw ParseError(file_name, line_no, "depth" + std::to_string(i + 1),
                                 "depth samples must be positive");
        }
        if (header.size() == 10 && !f[9].empty())
            o.pixel.pixel_crown_width =
                detail::parse_double(f[9], file_name, line_no, "pixel_crown_width");
        if (o.pixel.pixel_height < 0.0 || o.pixel.pixel_width < 0.0)
            throw ParseError(file_name, line_no, "pixel_height",
                             "pixel extents must be nonnegative");
        out.push_back(o);
    }
    return out;
}

inline std::vector<Observation> parse_observations_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "file", "cannot open");
    return parse_observations(in, path);
}

inline void write_observations(std::ostream& out, const std::vector<Observation>& obs) {
    out << kObservationHeader << "\n";
    for (const auto& o : obs) {
        out << o.object_id << ',' << o.frame_id << ',' << detail::format_double(o.pixel.u)
            << ',' << detail::format_double(o.pixel.v) << ','
            << detail::format_double(o.pixel.pixel_height) << ','
            << detail::format_double(o.pixel.pixel_width);
        for (double d : o.depth_samples) out << ',' << detail::format_double(d);
        out << ',';
        if (o.pixel.pixel_crown_width > 0.0)
            out << detail::format_double(o.pixel.pixel_crown_width);
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Track CSV
// header: frame_id,timestamp_s,lat,lon,azimuth_deg[,speed_class,mount]
// lat/lon may be empty (no GPS -> row skipped); empty azimuth is derived from
// consecutive positions.
// ---------------------------------------------------------------------------

inline const std::string kTrackHeader = "frame_id,timestamp_s,lat,lon,azimuth_deg";

inline Track parse_track(std::istream& in, const std::string& file_name) {
    std::string line;
    if (!std::getline(in, line)) throw ParseError(file_name, 0, "header", "empty file");
    const auto header = detail::split_csv_line(line);
    if (header.size() != 5 || header[0] != "frame_id")
        throw ParseError(file_name, 1, "header", "unexpected header: " + line);

    Track track;
    std::vector<bool> azimuth_missing;
    std::size_t line_no = 1;
    double last_ts = -std::numeric_limits<double>::infinity();
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 5)
            throw ParseError(file_name, line_no, "row", "expected 5 fields");
        if (f[2].empty() || f[3].empty()) continue;  // no GPS metadata
        CameraPose pose;
        pose.frame_id = detail::parse_int(f[0], file_name, line_no, "frame_id");
        pose.timestamp_s = detail::parse_double(f[1], file_name, line_no, "timestamp_s");
        pose.position.lat = detail::parse_double(f[2], file_name, line_no, "lat");
        pose.position.lon = detail::parse_double(f[3], file_name, line_no, "lon");
        if (!is_valid(pose.position))
            throw ParseError(file_name, line_no, "lat", "coordinate out of range");
        if (pose.timestamp_s < last_ts)
            throw ParseError(file_name, line_no, "timestamp_s", "timestamps must not decrease");
        last_ts = pose.timestamp_s;
        if (f[4].empty()) {
            azimuth_missing.push_back(true);
            pose.azimuth_deg = 0.0;
        } else {
            azimuth_missing.push_back(false);
            pose.azimuth_deg = normalize_angle_deg(
                detail::parse_double(f[4], file_name, line_no, "azimuth_deg"));
        }
        track.poses.push_back(pose);
    }
    // Derive missing azimuths from the displacement to the next pose.
    for (std::size_t i = 0; i < track.poses.size(); ++i) {
        if (!azimuth_missing[i]) continue;
        if (track.poses.size() < 2)
            throw ParseError(file_name, 0, "azimuth_deg",
                             "cannot derive azimuth from a single pose");
        const std::size_t a = i + 1 < track.poses.size() ? i : i - 1;
        const std::size_t b = a + 1;
        const LocalXY d =
            to_local_xy(track.poses[b].position, track.poses[a].position);
        track.poses[i].azimuth_deg =
            normalize_angle_deg(90.0 - std::atan2(d.y, d.x) / kDegToRad);
    }
    return track;
}

inline Track parse_track_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "file", "cannot open");
    return parse_track(in, path);
}

inline void write_track(std::ostream& out, const Track& track) {
    out << kTrackHeader << "\n";
    for (const auto& p : track.poses)
        out << p.frame_id << ',' << detail::format_double(p.timestamp_s) << ','
            << detail::format_double(p.position.lat) << ','
            << detail::format_double(p.position.lon) << ','
            << detail::format_double(p.azimuth_deg) << "\n";
}

// ---------------------------------------------------------------------------
// Control points CSV: observed_lat,observed_lon,true_lat,true_lon
// ---------------------------------------------------------------------------

inline std::vector<ControlPair> parse_control_points_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "file", "cannot open");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path, 0, "header", "empty file");
    std::vector<ControlPair> pairs;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 4) throw ParseError(path, line_no, "row", "expected 4 fields");
        ControlPair p;
        p.observed.lat = detail::parse_double(f[0], path, line_no, "observed_lat");
        p.observed.lon = detail::parse_double(f[1], path, line_no, "observed_lon");
        p.actual.lat = detail::parse_double(f[2], path, line_no, "true_lat");
        p.actual.lon = detail::parse_double(f[3], path, line_no, "true_lon");
        pairs.push_back(p);
    }
    return pairs;
}

inline void write_control_points(std::ostream& out, const std::vector<ControlPair>& pairs) {
    out << "observed_lat,observed_lon,true_lat,true_lon\n";
    for (const auto& p : pairs)
        out << detail::format_double(p.observed.lat) << ','
            << detail::format_double(p.observed.lon) << ','
            << detail::format_double(p.actual.lat) << ','
            << detail::format_double(p.actual.lon) << "\n";
}

// ---------------------------------------------------------------------------
// ESRI ASCII DEM
// ---------------------------------------------------------------------------

inline DemGrid parse_dem(std::istream& in, const std::string& file_name) {
    DemGrid dem;
    std::map<std::string, double> header;
    std::string key;
    for (int i = 0; i < 6; ++i) {
        double value = 0.0;
        if (!(in >> key >> value))
            throw ParseError(file_name, static_cast<std::size_t>(i + 1), "header",
                             "truncated ESRI ASCII header");
        std::transform(key.begin(), key.end(), key.begin(),
                       [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
        header[key] = value;
    }
    for (const char* k : {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize"})
        if (!header.count(k))
            throw ParseError(file_name, 1, k, "missing ESRI ASCII header field");
    dem.ncols = static_cast<std::size_t>(header["ncols"]);
    dem.nrows = static_cast<std::size_t>(header["nrows"]);
    dem.xllcorner = header["xllcorner"];
    dem.yllcorner = header["yllcorner"];
    dem.cellsize = header["cellsize"];
    dem.nodata = header.count("nodata_value") ? header["nodata_value"] : -9999.0;
    if (dem.ncols < 1 || dem.nrows < 1 || dem.cellsize <= 0.0)
        throw ParseError(file_name, 1, "ncols", "invalid grid dimensions");
    dem.values.resize(dem.nrows * dem.ncols);
    for (std::size_t i = 0; i < dem.values.size(); ++i) {
        if (!(in >> dem.values[i]))
            throw ParseError(file_name, 7, "data",
                             "expected " + std::to_string(dem.values.size()) + " cells");
    }
    return dem;
}

inline DemGrid parse_dem_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "file", "cannot open");
    return parse_dem(in, path);
}

inline void write_dem(std::ostream& out, const DemGrid& dem) {
    out << "ncols " << dem.ncols << "\n"
        << "nrows " << dem.nrows << "\n"
        << "xllcorner " << detail::format_double(dem.xllcorner) << "\n"
        << "yllcorner " << detail::format_double(dem.yllcorner) << "\n"
        << "cellsize " << detail::format_double(dem.cellsize) << "\n"
        << "NODATA_value " << detail::format_double(dem.nodata) << "\n";
    for (std::size_t r = 0; r < dem.nrows; ++r) {
        for (std::size_t c = 0; c < dem.ncols; ++c) {
            if (c) out << ' ';
            out << detail::format_double(dem.at(r, c));
        }
        out << "\n";
    }
}

// ---------------------------------------------------------------------------
// Ground truth GeoJSON (FeatureCollection of Points)
// ---------------------------------------------------------------------------

inline nlohmann::ordered_json ground_truth_to_geojson(const std::vector<SceneObject>& objects) {
    nlohmann::ordered_json features = nlohmann::ordered_json::array();
    for (const auto& o : objects) {
        nlohmann::ordered_json props;
        props["object_id"] = o.object_id;
        props["kind"] = to_string(o.kind);
        props["height_m"] = o.height_m;
        props["width_m"] = o.width_m;
        if (o.kind == ObjectKind::tree) props["crown_width_m"] = o.crown_width_m;
        props["base_elevation_m"] = o.base_elevation_m;
        nlohmann::ordered_json feature;
        feature["type"] = "Feature";
        feature["geometry"] = {{"type", "Point"},
                               {"coordinates", {o.location.lon, o.location.lat}}};
        feature["properties"] = props;
        features.push_back(feature);
    }
    nlohmann::ordered_json fc;
    fc["type"] = "FeatureCollection";
    fc["features"] = features;
    return fc;
}

inline std::vector<SceneObject> ground_truth_from_geojson(const nlohmann::json& fc) {
    if (fc.at("type").get<std::string>() != "FeatureCollection")
        throw InvalidInput("ground truth: expected a FeatureCollection");
    std::vector<SceneObject> objects;
    for (const auto& feature : fc.at("features")) {
        SceneObject o;
        const auto& props = feature.at("properties");
        o.object_id = props.at("object_id").get<std::int64_t>();
        o.kind = object_kind_from_string(props.at("kind").get<std::string>());
        o.height_m = props.at("height_m").get<double>();
        o.width_m = props.at("width_m").get<double>();
        if (props.contains("crown_width_m"))
            o.crown_width_m = props.at("crown_width_m").get<double>();
        o.base_elevation_m = props.value("base_elevation_m", 0.0);
        const auto& coords = feature.at("geometry").at("coordinates");
        o.location.lon = coords.at(0).get<double>();
        o.location.lat = coords.at(1).get<double>();
        objects.push_back(o);
    }
    return objects;
}

inline std::vector<SceneObject> ground_truth_from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "file", "cannot open");
    nlohmann::json j;
    in >> j;
    return ground_truth_from_geojson(j);
}

}  // namespace curbsight

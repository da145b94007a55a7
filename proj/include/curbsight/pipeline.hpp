#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "curbsight/camera.hpp"
#include "curbsight/depth_correct.hpp"
#include "curbsight/errors.hpp"
#include "curbsight/geodesy.hpp"
#include "curbsight/ingest.hpp"
#include "curbsight/simulate.hpp"
#include "curbsight/stats.hpp"
#include "curbsight/svg.hpp"
#include "curbsight/triangulate.hpp"

namespace curbsight {

// ---------------------------------------------------------------------------
// Run configuration (strict JSON: unknown keys rejected)
// ---------------------------------------------------------------------------

namespace detail_cfg {

inline void check_keys(const nlohmann::json& j, const std::set<std::string>& allowed,
                       const std::string& context) {
    if (!j.is_object()) throw ConfigError(context + ": expected an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError(context + ": unknown key '" + key + "'");
}

template <typename T>
void read_if(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail_cfg

struct TrainConfig {
    std::vector<GbrtHyperparams> grid = default_hyperparam_grid();
    std::size_t k_folds = 10;
    double train_fraction = 0.70;
    std::uint64_t seed = 1;
    double weight_epsilon = 0.01;
    double min_prediction_m = 0.5;
};

struct GeolocateConfig {
    std::size_t min_candidates = 3;
    double max_depth_m = 0.0;  // 0 = no depth filter
    bool use_correction = true;
    double tol_m = 1e-6;
    std::size_t max_iter = 1000;
};

struct MeasureConfig {
    bool mean_over_frames = false;
};

/// Per-scenario input files for the evaluation stage.
struct ScenarioPaths {
    std::string observations;
    std::string track;
    std::string estimates;
    std::string measurements;
    std::string control_points;  // optional
};

struct EvaluateConfig {
    std::vector<double> bin_edges{0.0, 10.0, 20.0, 30.0};
    std::map<std::string, ScenarioPaths> scenarios;  // label -> files
    std::string truth;                               // shared ground truth
};

struct RunPaths {
    std::string observations;
    std::string track;
    std::string dem;
    std::string truth;
    std::string control_points;
    std::string distances;
    std::string model;
    std::string estimates;
    std::string measurements;
};

struct RunConfig {
    CameraIntrinsics intrinsics;
    SceneConfig scene;
    NoiseConfig noise;
    std::vector<std::string> simulate_scenarios;  // empty = single dataset
    TrainConfig train;
    GeolocateConfig geolocate;
    MeasureConfig measure;
    EvaluateConfig evaluate;
    RunPaths paths;
    std::string scenario_label = "In_Slow";
};

inline CameraIntrinsics parse_intrinsics(const nlohmann::json& j) {
    detail_cfg::check_keys(j,
                           {"focal_length_mm", "sensor_width_mm", "sensor_height_mm",
                            "image_width_px", "image_height_px", "hfov_deg", "mount_height_m"},
                           "intrinsics");
    CameraIntrinsics c;
    detail_cfg::read_if(j, "focal_length_mm", c.focal_length_mm);
    detail_cfg::read_if(j, "sensor_width_mm", c.sensor_width_mm);
    detail_cfg::read_if(j, "sensor_height_mm", c.sensor_height_mm);
    detail_cfg::read_if(j, "image_width_px", c.image_width_px);
    detail_cfg::read_if(j, "image_height_px", c.image_height_px);
    detail_cfg::read_if(j, "hfov_deg", c.hfov_deg);
    detail_cfg::read_if(j, "mount_height_m", c.mount_height_m);
    validate(c);
    return c;
}

inline SceneConfig parse_scene_config(const nlohmann::json& j) {
    detail_cfg::check_keys(
        j,
        {"origin_lat", "origin_lon", "road_heading_deg", "trajectory_length_m",
         "object_span_m", "n_trees", "n_poles", "n_other", "lateral_min_m", "lateral_max_m",
         "max_range_m", "speed_class", "mount", "dem_base_elevation_m", "dem_north_slope",
         "dem_east_slope", "dem_cellsize_deg"},
        "simulate.scene");
    SceneConfig s;
    detail_cfg::read_if(j, "origin_lat", s.origin.lat);
    detail_cfg::read_if(j, "origin_lon", s.origin.lon);
    detail_cfg::read_if(j, "road_heading_deg", s.road_heading_deg);
    detail_cfg::read_if(j, "trajectory_length_m", s.trajectory_length_m);
    detail_cfg::read_if(j, "object_span_m", s.object_span_m);
    detail_cfg::read_if(j, "n_trees", s.n_trees);
    detail_cfg::read_if(j, "n_poles", s.n_poles);
    detail_cfg::read_if(j, "n_other", s.n_other);
    detail_cfg::read_if(j, "lateral_min_m", s.lateral_min_m);
    detail_cfg::read_if(j, "lateral_max_m", s.lateral_max_m);
    detail_cfg::read_if(j, "max_range_m", s.max_range_m);
    detail_cfg::read_if(j, "dem_base_elevation_m", s.dem_base_elevation_m);
    detail_cfg::read_if(j, "dem_north_slope", s.dem_north_slope);
    detail_cfg::read_if(j, "dem_east_slope", s.dem_east_slope);
    detail_cfg::read_if(j, "dem_cellsize_deg", s.dem_cellsize_deg);
    if (j.contains("speed_class"))
        s.speed_class = j.at("speed_class").get<std::string>() == "high" ? SpeedClass::high
                                                                         : SpeedClass::slow;
    if (j.contains("mount"))
        s.mount = j.at("mount").get<std::string>() == "outside" ? Mount::outside
                                                                : Mount::inside;
    return s;
}

inline NoiseConfig parse_noise_config(const nlohmann::json& j) {
    detail_cfg::check_keys(j,
                           {"gps_systematic_east_m", "gps_systematic_north_m",
                            "gps_jitter_sigma_m", "depth_knee_m", "depth_compression",
                            "depth_sample_sigma_m", "pixel_jitter_sigma_px",
                            "pixel_jitter_speed_scale", "seed"},
                           "simulate.noise");
    NoiseConfig n;
    detail_cfg::read_if(j, "gps_systematic_east_m", n.gps_systematic_east_m);
    detail_cfg::read_if(j, "gps_systematic_north_m", n.gps_systematic_north_m);
    detail_cfg::read_if(j, "gps_jitter_sigma_m", n.gps_jitter_sigma_m);
    detail_cfg::read_if(j, "depth_knee_m", n.depth_knee_m);
    detail_cfg::read_if(j, "depth_compression", n.depth_compression);
    detail_cfg::read_if(j, "depth_sample_sigma_m", n.depth_sample_sigma_m);
    detail_cfg::read_if(j, "pixel_jitter_sigma_px", n.pixel_jitter_sigma_px);
    detail_cfg::read_if(j, "pixel_jitter_speed_scale", n.pixel_jitter_speed_scale);
    detail_cfg::read_if(j, "seed", n.seed);
    if (n.depth_compression <= 0.0 || n.depth_compression > 1.0)
        throw ConfigError("noise.depth_compression must lie in (0, 1]");
    if (n.gps_jitter_sigma_m < 0.0 || n.depth_sample_sigma_m < 0.0 ||
        n.pixel_jitter_sigma_px < 0.0)
        throw ConfigError("noise sigmas must be nonnegative");
    return n;
}

inline std::vector<GbrtHyperparams> parse_grid(const nlohmann::json& j) {
    detail_cfg::check_keys(j, {"n_trees", "max_depth", "learning_rate", "min_samples_leaf"},
                           "train.grid");
    std::vector<int> trees{50, 100, 200}, depths{2, 3, 4}, leaves{2, 5};
    std::vector<double> lrs{0.05, 0.1, 0.3};
    detail_cfg::read_if(j, "n_trees", trees);
    detail_cfg::read_if(j, "max_depth", depths);
    detail_cfg::read_if(j, "learning_rate", lrs);
    detail_cfg::read_if(j, "min_samples_leaf", leaves);
    std::vector<GbrtHyperparams> grid;
    for (int t : trees)
        for (int d : depths)
            for (double lr : lrs)
                for (int l : leaves) grid.push_back({t, d, lr, l});
    return grid;
}

inline ScenarioPaths parse_scenario_paths(const nlohmann::json& j) {
    detail_cfg::check_keys(
        j, {"observations", "track", "estimates", "measurements", "control_points"},
        "evaluate.scenarios");
    ScenarioPaths p;
    detail_cfg::read_if(j, "observations", p.observations);
    detail_cfg::read_if(j, "track", p.track);
    detail_cfg::read_if(j, "estimates", p.estimates);
    detail_cfg::read_if(j, "measurements", p.measurements);
    detail_cfg::read_if(j, "control_points", p.control_points);
    return p;
}

inline RunConfig parse_run_config(const nlohmann::json& j) {
    detail_cfg::check_keys(j,
                           {"intrinsics", "simulate", "train", "geolocate", "measure",
                            "evaluate", "paths", "scenario_label"},
                           "config");
    RunConfig cfg;
    if (j.contains("intrinsics")) cfg.intrinsics = parse_intrinsics(j.at("intrinsics"));
    if (j.contains("simulate")) {
        const auto& sim = j.at("simulate");
        detail_cfg::check_keys(sim, {"scene", "noise", "scenarios"}, "simulate");
        if (sim.contains("scene")) cfg.scene = parse_scene_config(sim.at("scene"));
        if (sim.contains("noise")) cfg.noise = parse_noise_config(sim.at("noise"));
        detail_cfg::read_if(sim, "scenarios", cfg.simulate_scenarios);
    }
    if (j.contains("train")) {
        const auto& t = j.at("train");
        detail_cfg::check_keys(t,
                               {"grid", "k_folds", "train_fraction", "seed", "weight_epsilon",
                                "min_prediction_m"},
                               "train");
        if (t.contains("grid")) cfg.train.grid = parse_grid(t.at("grid"));
        detail_cfg::read_if(t, "k_folds", cfg.train.k_folds);
        detail_cfg::read_if(t, "train_fraction", cfg.train.train_fraction);
        detail_cfg::read_if(t, "seed", cfg.train.seed);
        detail_cfg::read_if(t, "weight_epsilon", cfg.train.weight_epsilon);
        detail_cfg::read_if(t, "min_prediction_m", cfg.train.min_prediction_m);
    }
    if (j.contains("geolocate")) {
        const auto& g = j.at("geolocate");
        detail_cfg::check_keys(
            g, {"min_candidates", "max_depth_m", "use_correction", "tol_m", "max_iter"},
            "geolocate");
        detail_cfg::read_if(g, "min_candidates", cfg.geolocate.min_candidates);
        detail_cfg::read_if(g, "max_depth_m", cfg.geolocate.max_depth_m);
        detail_cfg::read_if(g, "use_correction", cfg.geolocate.use_correction);
        detail_cfg::read_if(g, "tol_m", cfg.geolocate.tol_m);
        detail_cfg::read_if(g, "max_iter", cfg.geolocate.max_iter);
    }
    if (j.contains("measure")) {
        detail_cfg::check_keys(j.at("measure"), {"mean_over_frames"}, "measure");
        detail_cfg::read_if(j.at("measure"), "mean_over_frames",
                            cfg.measure.mean_over_frames);
    }
    if (j.contains("evaluate")) {
        const auto& e = j.at("evaluate");
        detail_cfg::check_keys(e, {"bin_edges", "scenarios", "truth"}, "evaluate");
        detail_cfg::read_if(e, "bin_edges", cfg.evaluate.bin_edges);
        detail_cfg::read_if(e, "truth", cfg.evaluate.truth);
        if (e.contains("scenarios"))
            for (const auto& [label, paths] : e.at("scenarios").items())
                cfg.evaluate.scenarios[label] = parse_scenario_paths(paths);
    }
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        detail_cfg::check_keys(p,
                               {"observations", "track", "dem", "truth", "control_points",
                                "distances", "model", "estimates", "measurements"},
                               "paths");
        detail_cfg::read_if(p, "observations", cfg.paths.observations);
        detail_cfg::read_if(p, "track", cfg.paths.track);
        detail_cfg::read_if(p, "dem", cfg.paths.dem);
        detail_cfg::read_if(p, "truth", cfg.paths.truth);
        detail_cfg::read_if(p, "control_points", cfg.paths.control_points);
        detail_cfg::read_if(p, "distances", cfg.paths.distances);
        detail_cfg::read_if(p, "model", cfg.paths.model);
        detail_cfg::read_if(p, "estimates", cfg.paths.estimates);
        detail_cfg::read_if(p, "measurements", cfg.paths.measurements);
    }
    detail_cfg::read_if(j, "scenario_label", cfg.scenario_label);
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    return parse_run_config(j);
}

// ---------------------------------------------------------------------------
// Shared helpers
// ---------------------------------------------------------------------------

inline void write_text_file(const std::string& path, const std::string& content) {
    std::filesystem::create_directories(std::filesystem::path(path).parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

inline void write_json_file(const std::string& path, const nlohmann::ordered_json& j) {
    write_text_file(path, j.dump(2) + "\n");
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

/// "Scenario labels cross mount with speed band."
inline std::pair<Mount, SpeedClass> scenario_from_label(const std::string& label) {
    if (label == "In_Slow") return {Mount::inside, SpeedClass::slow};
    if (label == "In_Speed") return {Mount::inside, SpeedClass::high};
    if (label == "Out_Slow") return {Mount::outside, SpeedClass::slow};
    if (label == "Out_Speed") return {Mount::outside, SpeedClass::high};
    throw ConfigError("unknown scenario label: " + label);
}

inline std::map<std::int64_t, CameraPose> pose_index(const Track& track) {
    std::map<std::int64_t, CameraPose> index;
    for (const auto& p : track.poses) index[p.frame_id] = p;
    return index;
}

// ---------------------------------------------------------------------------
// simulate stage
// ---------------------------------------------------------------------------

struct SimulatedDataset {
    std::string directory;
    RenderedScene rendered;
    Scene scene;
};

inline void write_dataset(const std::string& dir, const Scene& scene,
                          const RenderedScene& rendered) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream out(dir + "/observations.csv", std::ios::binary);
        write_observations(out, rendered.observations);
    }
    {
        std::ofstream out(dir + "/track.csv", std::ios::binary);
        write_track(out, rendered.noised_track);
    }
    {
        std::ofstream out(dir + "/dem.asc", std::ios::binary);
        write_dem(out, scene.dem);
    }
    {
        std::ofstream out(dir + "/control_points.csv", std::ios::binary);
        write_control_points(out, rendered.control_points);
    }
    {
        std::ofstream out(dir + "/distances.csv", std::ios::binary);
        out << "object_id,frame_id,distance_m\n";
        for (const auto& d : rendered.distances)
            out << d.object_id << ',' << d.frame_id << ','
                << detail::format_double(d.distance_m) << "\n";
    }
    write_json_file(dir + "/truth.geojson", ground_truth_to_geojson(rendered.ground_truth));
}

/// Render one dataset, or one per scenario label (same objects and DEM,
/// scenario-specific trajectory/mount/noise stream) for the paired design.
inline std::vector<SimulatedDataset> cmd_simulate(const RunConfig& cfg, std::uint64_t seed,
                                                  const std::string& out_dir) {
    std::vector<SimulatedDataset> results;
    if (cfg.simulate_scenarios.empty()) {
        Scene scene = generate_scene(cfg.scene, seed);
        NoiseConfig noise = cfg.noise;
        noise.seed = Rng::derive_seed(seed, 0xA5A5);
        RenderedScene rendered =
            render_observations(scene, cfg.intrinsics, noise, cfg.scene.max_range_m);
        write_dataset(out_dir, scene, rendered);
        results.push_back({out_dir, std::move(rendered), std::move(scene)});
        return results;
    }

    // Objects and DEM are shared; only the trajectory and noise stream vary.
    Scene base = generate_scene(cfg.scene, seed);
    for (std::size_t i = 0; i < cfg.simulate_scenarios.size(); ++i) {
        const std::string& label = cfg.simulate_scenarios[i];
        const auto [mount, speed] = scenario_from_label(label);
        SceneConfig scenario_cfg = cfg.scene;
        scenario_cfg.mount = mount;
        scenario_cfg.speed_class = speed;
        Scene scene = generate_scene(scenario_cfg, seed);
        scene.objects = base.objects;  // identical object set across scenarios
        scene.dem = base.dem;
        CameraIntrinsics intr = cfg.intrinsics;
        intr.mount_height_m = mount_height_m(mount);
        NoiseConfig noise = cfg.noise;
        noise.seed = Rng::derive_seed(seed, 0xA5A5 + i);
        RenderedScene rendered =
            render_observations(scene, intr, noise, scenario_cfg.max_range_m);
        const std::string dir = out_dir + "/" + label;
        write_dataset(dir, scene, rendered);
        results.push_back({dir, std::move(rendered), std::move(scene)});
    }
    return results;
}

// ---------------------------------------------------------------------------
// train stage
// ---------------------------------------------------------------------------

inline std::vector<TrainingSample> build_training_samples(
    const std::vector<Observation>& observations, const Track& track,
    const std::vector<TrueDistanceRecord>& distances, const CameraIntrinsics& intrinsics,
    double weight_epsilon) {
    const auto poses = pose_index(track);
    std::map<std::pair<std::int64_t, std::int64_t>, double> dist_of;
    for (const auto& d : distances) dist_of[{d.object_id, d.frame_id}] = d.distance_m;

    std::vector<TrainingSample> samples;
    for (const auto& obs : observations) {
        const auto pose_it = poses.find(obs.frame_id);
        if (pose_it == poses.end())
            throw InvalidInput("observation frame " + std::to_string(obs.frame_id) +
                               " missing from track");
        const auto dist_it = dist_of.find({obs.object_id, obs.frame_id});
        if (dist_it == dist_of.end()) continue;  // no measured distance for this sighting
        TrainingSample s;
        s.features = extract_features(obs, pose_it->second, intrinsics);
        s.ground_distance_m = dist_it->second;
        s.weight = variance_weight(obs.depth_samples, weight_epsilon);
        s.frame_id = obs.frame_id;
        samples.push_back(s);
    }
    return samples;
}

inline std::vector<TrueDistanceRecord> parse_distances_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "file", "cannot open");
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path, 0, "header", "empty file");
    std::vector<TrueDistanceRecord> out;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::split_csv_line(line);
        if (f.size() != 3) throw ParseError(path, line_no, "row", "expected 3 fields");
        TrueDistanceRecord r;
        r.object_id = detail::parse_int(f[0], path, line_no, "object_id");
        r.frame_id = detail::parse_int(f[1], path, line_no, "frame_id");
        r.distance_m = detail::parse_double(f[2], path, line_no, "distance_m");
        out.push_back(r);
    }
    return out;
}

struct TrainOutput {
    CorrectionModel model;
    CvReport report;
};

inline nlohmann::ordered_json cv_report_to_json(const CvReport& r) {
    nlohmann::ordered_json j;
    j["k_folds"] = r.k_folds;
    j["fold_maes_transformed"] = r.fold_maes;
    j["mean_cv_mae_transformed"] = r.mean_cv_mae;
    j["best_hyperparams"] = {{"n_trees", r.best_hyperparams.n_trees},
                             {"max_depth", r.best_hyperparams.max_depth},
                             {"learning_rate", r.best_hyperparams.learning_rate},
                             {"min_samples_leaf", r.best_hyperparams.min_samples_leaf}};
    j["test_transformed"] = {{"mse", r.test_transformed.mse},
                             {"mae", r.test_transformed.mae},
                             {"r2", r.test_transformed.r2},
                             {"r2_defined", r.test_transformed.r2_defined}};
    j["test_original"] = {{"mse", r.test_original.mse},
                          {"mae", r.test_original.mae},
                          {"r2", r.test_original.r2},
                          {"r2_defined", r.test_original.r2_defined}};
    j["reference_field_study"] = {
        {"mean_cv_mae_transformed", kReferenceDepthModelMetrics.cv_mae_transformed},
        {"mae_transformed", kReferenceDepthModelMetrics.mae_transformed},
        {"r2_transformed", kReferenceDepthModelMetrics.r2_transformed},
        {"mae_original", kReferenceDepthModelMetrics.mae_original},
        {"r2_original", kReferenceDepthModelMetrics.r2_original}};
    return j;
}

inline TrainOutput cmd_train(const RunConfig& cfg, const std::string& out_dir) {
    const auto observations = parse_observations_file(cfg.paths.observations);
    const Track track = parse_track_file(cfg.paths.track);
    const auto distances = parse_distances_file(cfg.paths.distances);

    auto samples = build_training_samples(observations, track, distances, cfg.intrinsics,
                                          cfg.train.weight_epsilon);
    auto [train_set, test_set] =
        split_by_frame(samples, cfg.train.train_fraction, cfg.train.seed);
    GridSearchResult result = grid_search_cv(train_set, test_set, cfg.train.grid,
                                             cfg.train.k_folds, cfg.train.seed);
    result.model.min_prediction_m = cfg.train.min_prediction_m;

    std::filesystem::create_directories(out_dir);
    write_json_file(out_dir + "/model.json", model_to_json(result.model));
    write_json_file(out_dir + "/cv_report.json", cv_report_to_json(result.report));
    return {std::move(result.model), std::move(result.report)};
}

// ---------------------------------------------------------------------------
// geolocate stage
// ---------------------------------------------------------------------------

struct ObjectGeolocation {
    std::int64_t object_id = 0;
    std::optional<GeolocationEstimate> estimate;
    std::string failure_reason;  // set when estimate is absent
};

/// Corrected depth for one observation: model prediction, or the raw sample
/// mean in no-correction mode.
inline double corrected_depth(const Observation& obs, const CameraPose& pose,
                              const CameraIntrinsics& intrinsics,
                              const CorrectionModel* model) {
    const DepthFeatures f = extract_features(obs, pose, intrinsics);
    return model ? predict(*model, f) : f.raw_depth;
}

inline std::vector<ObjectGeolocation> geolocate_all(
    const std::vector<Observation>& observations, const Track& track,
    const CameraIntrinsics& intrinsics, const GeolocateConfig& gcfg,
    const CorrectionModel* model) {
    const auto poses = pose_index(track);
    std::map<std::int64_t, std::vector<TriangulationObservation>> by_object;
    for (const auto& obs : observations) {
        const auto it = poses.find(obs.frame_id);
        if (it == poses.end())
            throw InvalidInput("observation frame " + std::to_string(obs.frame_id) +
                               " missing from track");
        const double depth = corrected_depth(obs, it->second, intrinsics, model);
        if (gcfg.max_depth_m > 0.0 && depth > gcfg.max_depth_m) continue;
        by_object[obs.object_id].push_back({it->second, obs.pixel, depth});
    }

    std::vector<ObjectGeolocation> results;
    for (const auto& [object_id, tri_obs] : by_object) {
        ObjectGeolocation r;
        r.object_id = object_id;
        try {
            r.estimate = geolocate_object(tri_obs, intrinsics, gcfg.min_candidates,
                                          gcfg.tol_m, gcfg.max_iter);
        } catch (const InsufficientObservations& e) {
            r.failure_reason = e.what();
        }
        results.push_back(std::move(r));
    }
    return results;  // std::map iteration = sorted by object_id
}

inline nlohmann::ordered_json estimates_to_geojson(const std::vector<ObjectGeolocation>& all) {
    nlohmann::ordered_json features = nlohmann::ordered_json::array();
    for (const auto& r : all) {
        if (!r.estimate) continue;
        nlohmann::ordered_json feature;
        feature["type"] = "Feature";
        feature["geometry"] = {
            {"type", "Point"},
            {"coordinates", {r.estimate->location.lon, r.estimate->location.lat}}};
        feature["properties"] = {{"object_id", r.object_id},
                                 {"n_candidates", r.estimate->n_candidates},
                                 {"dispersion_m", r.estimate->dispersion_m},
                                 {"converged", r.estimate->converged}};
        features.push_back(feature);
    }
    nlohmann::ordered_json fc;
    fc["type"] = "FeatureCollection";
    fc["features"] = features;
    return fc;
}

struct EstimateRecord {
    std::int64_t object_id = 0;
    GeoPoint location;
    std::size_t n_candidates = 0;
    double dispersion_m = 0.0;
    bool converged = false;
};

inline std::vector<EstimateRecord> estimates_from_file(const std::string& path) {
    const nlohmann::json fc = read_json_file(path);
    std::vector<EstimateRecord> out;
    for (const auto& feature : fc.at("features")) {
        EstimateRecord r;
        const auto& props = feature.at("properties");
        r.object_id = props.at("object_id").get<std::int64_t>();
        r.n_candidates = props.at("n_candidates").get<std::size_t>();
        r.dispersion_m = props.at("dispersion_m").get<double>();
        r.converged = props.at("converged").get<bool>();
        const auto& coords = feature.at("geometry").at("coordinates");
        r.location.lon = coords.at(0).get<double>();
        r.location.lat = coords.at(1).get<double>();
        out.push_back(r);
    }
    return out;
}

/// Load the track and apply the systematic GPS correction when control
/// points are configured.
inline Track load_corrected_track(const std::string& track_path,
                                  const std::string& control_path) {
    Track track = parse_track_file(track_path);
    if (!control_path.empty()) {
        const auto pairs = parse_control_points_file(control_path);
        track = correct_gps_offset(track, pairs).track;
    }
    return track;
}

inline std::vector<ObjectGeolocation> cmd_geolocate(const RunConfig& cfg,
                                                    const std::string& out_dir) {
    const auto observations = parse_observations_file(cfg.paths.observations);
    const Track track = load_corrected_track(cfg.paths.track, cfg.paths.control_points);

    std::optional<CorrectionModel> model;
    if (cfg.geolocate.use_correction) {
        if (cfg.paths.model.empty())
            throw ConfigError("geolocate.use_correction requires paths.model");
        model = model_from_json(read_json_file(cfg.paths.model));
    }

    const auto results = geolocate_all(observations, track, cfg.intrinsics, cfg.geolocate,
                                       model ? &*model : nullptr);

    std::filesystem::create_directories(out_dir);
    write_json_file(out_dir + "/estimates.geojson", estimates_to_geojson(results));

    nlohmann::ordered_json report;
    nlohmann::ordered_json objects = nlohmann::ordered_json::array();
    for (const auto& r : results) {
        nlohmann::ordered_json o;
        o["object_id"] = r.object_id;
        o["status"] = r.estimate ? "located" : "unlocatable";
        if (!r.estimate) o["reason"] = r.failure_reason;
        objects.push_back(o);
    }
    report["objects"] = objects;
    report["correction_model"] = cfg.geolocate.use_correction;
    write_json_file(out_dir + "/geolocate_report.json", report);
    return results;
}

// ---------------------------------------------------------------------------
// measure stage
// ---------------------------------------------------------------------------

struct StructuralEstimate {
    std::int64_t object_id = 0;
    double height_m = 0.0;
    bool dem_corrected = false;
    double width_m = 0.0;
    std::optional<double> crown_width_m;
    double distance_used_m = 0.0;
    std::int64_t frame_used = 0;
};

/// Height/width from the nearest (smallest corrected depth) frame, with DEM
/// slope correction at the estimated location when coverage allows.
inline std::vector<StructuralEstimate> measure_all(
    const std::vector<Observation>& observations, const Track& track,
    const std::vector<EstimateRecord>& estimates, const DemGrid& dem,
    const CameraIntrinsics& intrinsics, const MeasureConfig& mcfg,
    const CorrectionModel* model) {
    const auto poses = pose_index(track);
    std::map<std::int64_t, std::vector<const Observation*>> by_object;
    for (const auto& obs : observations) by_object[obs.object_id].push_back(&obs);

    std::vector<StructuralEstimate> results;
    for (const auto& est : estimates) {
        const auto it = by_object.find(est.object_id);
        if (it == by_object.end()) continue;

        struct FrameMeasure {
            double depth;
            const Observation* obs;
            const CameraPose* pose;
        };
        std::vector<FrameMeasure> frames;
        for (const Observation* obs : it->second) {
            const auto pit = poses.find(obs->frame_id);
            if (pit == poses.end()) continue;
            frames.push_back(
                {corrected_depth(*obs, pit->second, intrinsics, model), obs, &pit->second});
        }
        if (frames.empty()) continue;
        std::sort(frames.begin(), frames.end(), [](const FrameMeasure& a, const FrameMeasure& b) {
            return a.depth < b.depth;
        });

        const auto measure_one = [&](const FrameMeasure& fm, StructuralEstimate& out) {
            out.height_m = estimate_height(fm.obs->pixel, fm.depth, intrinsics);
            out.width_m = estimate_width(fm.obs->pixel, fm.depth, intrinsics);
            if (fm.obs->pixel.pixel_crown_width > 0.0)
                out.crown_width_m =
                    estimate_width_px(fm.obs->pixel.pixel_crown_width, fm.depth, intrinsics);
            try {
                const DemSample cam = sample_dem(dem, fm.pose->position);
                const DemSample obj = sample_dem(dem, est.location);
                if (!cam.nodata && !obj.nodata) {
                    TerrainContext ctx{cam.elevation_m + intrinsics.mount_height_m,
                                       obj.elevation_m};
                    out.height_m = terrain_corrected_height(out.height_m, fm.depth, ctx);
                    out.dem_corrected = true;
                }
            } catch (const OutOfCoverage&) {
                // uncorrected height, flag stays false
            } catch (const GeometryError&) {
            }
        };

        StructuralEstimate r;
        r.object_id = est.object_id;
        if (!mcfg.mean_over_frames) {
            const FrameMeasure& nearest = frames.front();
            r.distance_used_m = nearest.depth;
            r.frame_used = nearest.obs->frame_id;
            measure_one(nearest, r);
        } else {
            // Sensitivity mode: average structural values over all frames.
            double h = 0.0, w = 0.0, crown = 0.0, d = 0.0;
            std::size_t n_crown = 0;
            bool any_corrected = false;
            for (const auto& fm : frames) {
                StructuralEstimate tmp;
                measure_one(fm, tmp);
                h += tmp.height_m;
                w += tmp.width_m;
                d += fm.depth;
                if (tmp.crown_width_m) {
                    crown += *tmp.crown_width_m;
                    ++n_crown;
                }
                any_corrected = any_corrected || tmp.dem_corrected;
            }
            const double n = static_cast<double>(frames.size());
            r.height_m = h / n;
            r.width_m = w / n;
            r.distance_used_m = d / n;
            r.frame_used = frames.front().obs->frame_id;
            r.dem_corrected = any_corrected;
            if (n_crown > 0) r.crown_width_m = crown / static_cast<double>(n_crown);
        }
        results.push_back(std::move(r));
    }
    return results;
}

inline nlohmann::ordered_json measurements_to_json(const std::vector<StructuralEstimate>& all) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& m : all) {
        nlohmann::ordered_json j;
        j["object_id"] = m.object_id;
        j["height_m"] = m.height_m;
        j["dem_corrected"] = m.dem_corrected;
        j["width_m"] = m.width_m;
        j["dbh_cm"] = m.width_m * 100.0;
        if (m.crown_width_m) j["crown_width_m"] = *m.crown_width_m;
        j["distance_used_m"] = m.distance_used_m;
        j["frame_used"] = m.frame_used;
        arr.push_back(j);
    }
    nlohmann::ordered_json out;
    out["schema_version"] = 1;
    out["measurements"] = arr;
    return out;
}

inline std::vector<StructuralEstimate> measurements_from_file(const std::string& path) {
    const nlohmann::json j = read_json_file(path);
    std::vector<StructuralEstimate> out;
    for (const auto& m : j.at("measurements")) {
        StructuralEstimate s;
        s.object_id = m.at("object_id").get<std::int64_t>();
        s.height_m = m.at("height_m").get<double>();
        s.dem_corrected = m.at("dem_corrected").get<bool>();
        s.width_m = m.at("width_m").get<double>();
        if (m.contains("crown_width_m")) s.crown_width_m = m.at("crown_width_m").get<double>();
        s.distance_used_m = m.at("distance_used_m").get<double>();
        s.frame_used = m.at("frame_used").get<std::int64_t>();
        out.push_back(s);
    }
    return out;
}

inline std::vector<StructuralEstimate> cmd_measure(const RunConfig& cfg,
                                                   const std::string& out_dir) {
    const auto observations = parse_observations_file(cfg.paths.observations);
    const Track track = load_corrected_track(cfg.paths.track, cfg.paths.control_points);
    const auto estimates = estimates_from_file(cfg.paths.estimates);
    const DemGrid dem = parse_dem_file(cfg.paths.dem);

    std::optional<CorrectionModel> model;
    if (cfg.geolocate.use_correction) {
        if (cfg.paths.model.empty())
            throw ConfigError("measure with correction requires paths.model");
        model = model_from_json(read_json_file(cfg.paths.model));
    }

    const auto results = measure_all(observations, track, estimates, dem, cfg.intrinsics,
                                     cfg.measure, model ? &*model : nullptr);
    std::filesystem::create_directories(out_dir);
    write_json_file(out_dir + "/measurements.json", measurements_to_json(results));
    return results;
}

}  // namespace curbsight

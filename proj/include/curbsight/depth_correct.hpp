#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "curbsight/errors.hpp"
#include "curbsight/gbrt.hpp"
#include "curbsight/observation.hpp"
#include "curbsight/rng.hpp"
#include "curbsight/stats.hpp"
#include "curbsight/triangulate.hpp"

namespace curbsight {

/// Model inputs: averaged raw depth plus spatial context (normalized pixel
/// location, frame position, heading).
struct DepthFeatures {
    double raw_depth = 0.0;
    double u_norm = 0.0;
    double v_norm = 0.0;
    double lat = 0.0;
    double lon = 0.0;
    double azimuth = 0.0;

    std::vector<double> as_vector() const {
        return {raw_depth, u_norm, v_norm, lat, lon, azimuth};
    }
};

inline const std::vector<std::string> kDepthFeatureNames = {
    "raw_depth", "u_norm", "v_norm", "lat", "lon", "azimuth"};

struct TrainingSample {
    DepthFeatures features;
    double ground_distance_m = 0.0;
    double weight = 1.0;
    std::int64_t frame_id = 0;
};

struct GbrtHyperparams {
    int n_trees = 100;
    int max_depth = 3;
    double learning_rate = 0.1;
    int min_samples_leaf = 2;

    bool operator==(const GbrtHyperparams&) const = default;
};

/// Desk-scale default grid spanning under- to over-fit regimes.
inline std::vector<GbrtHyperparams> default_hyperparam_grid() {
    std::vector<GbrtHyperparams> grid;
    for (int trees : {50, 100, 200})
        for (int depth : {2, 3, 4})
            for (double lr : {0.05, 0.1, 0.3})
                for (int leaf : {2, 5}) grid.push_back({trees, depth, lr, leaf});
    return grid;
}

/// Boosted ensemble on the sqrt-transformed target. The metric prediction is
/// the square of the transformed prediction, clamped below at
/// min_prediction_m.
struct CorrectionModel {
    std::vector<RegressionTree> trees;
    double learning_rate = 0.1;
    double base_prediction = 0.0;  // transformed scale
    GbrtHyperparams hyperparams;
    std::uint64_t train_seed = 0;
    double min_prediction_m = 0.5;
    std::vector<double> training_loss;  // weighted squared error per iteration

    double predict_transformed(const DepthFeatures& f) const {
        const std::vector<double> x = f.as_vector();
        double p = base_prediction;
        for (const auto& t : trees) p += learning_rate * t.predict(x);
        return p;
    }
};

inline double predict(const CorrectionModel& model, const DepthFeatures& f) {
    const double t = model.predict_transformed(f);
    return std::max(model.min_prediction_m, t * t);
}

inline DepthFeatures extract_features(const Observation& obs, const CameraPose& pose,
                                      const CameraIntrinsics& intrinsics) {
    for (double d : obs.depth_samples)
        if (!(d > 0.0))
            throw InvalidInput("extract_features: observation needs 3 positive depth samples");
    DepthFeatures f;
    f.raw_depth = (obs.depth_samples[0] + obs.depth_samples[1] + obs.depth_samples[2]) / 3.0;
    f.u_norm = obs.pixel.u / intrinsics.image_width_px;
    f.v_norm = obs.pixel.v / intrinsics.image_height_px;
    f.lat = pose.position.lat;
    f.lon = pose.position.lon;
    f.azimuth = pose.azimuth_deg;
    return f;
}

/// Inverse-variance weight of the three per-observation depth samples
/// (sample variance, n-1 denominator), floored by epsilon. Raw weights are
/// normalized to mean 1 at training time.
inline double variance_weight(const std::array<double, 3>& samples, double epsilon = 0.01) {
    const double mean = (samples[0] + samples[1] + samples[2]) / 3.0;
    double var = 0.0;
    for (double s : samples) var += (s - mean) * (s - mean);
    var /= 2.0;
    return 1.0 / (epsilon + var);
}

/// Normalize weights to mean 1 in place.
inline void normalize_weights(std::vector<TrainingSample>& samples) {
    double sum = 0.0;
    for (const auto& s : samples) sum += s.weight;
    if (sum <= 0.0) throw InvalidInput("normalize_weights: nonpositive weight sum");
    const double scale = static_cast<double>(samples.size()) / sum;
    for (auto& s : samples) s.weight *= scale;
}

/// Partition at the frame level: every sample of a frame lands wholly on one
/// side. Deterministic under seed.
inline std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> split_by_frame(
    const std::vector<TrainingSample>& samples, double train_fraction = 0.70,
    std::uint64_t seed = 0) {
    std::set<std::int64_t> frame_set;
    for (const auto& s : samples) frame_set.insert(s.frame_id);
    if (frame_set.size() < 2)
        throw InvalidInput("split_by_frame: need at least 2 distinct frames");
    std::vector<std::int64_t> frames(frame_set.begin(), frame_set.end());
    Rng rng(seed);
    rng.shuffle(frames);
    std::size_t n_train = static_cast<std::size_t>(
        std::llround(train_fraction * static_cast<double>(frames.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, frames.size() - 1);
    std::set<std::int64_t> train_frames(frames.begin(),
                                        frames.begin() + static_cast<std::ptrdiff_t>(n_train));
    std::pair<std::vector<TrainingSample>, std::vector<TrainingSample>> out;
    for (const auto& s : samples) {
        if (train_frames.count(s.frame_id))
            out.first.push_back(s);
        else
            out.second.push_back(s);
    }
    return out;
}

/// Fit weighted squared-error gradient boosting to sqrt(ground_distance).
inline CorrectionModel train(const std::vector<TrainingSample>& train_set,
                             const GbrtHyperparams& hp, std::uint64_t seed = 0) {
    if (train_set.empty()) throw InvalidInput("train: empty training set");
    for (const auto& s : train_set)
        if (!(s.ground_distance_m > 0.0))
            throw InvalidInput("train: targets must be positive");

    std::vector<TrainingSample> samples = train_set;
    normalize_weights(samples);

    const std::size_t n = samples.size();
    std::vector<std::vector<double>> x(n);
    std::vector<double> y(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = samples[i].features.as_vector();
        y[i] = std::sqrt(samples[i].ground_distance_m);
        w[i] = samples[i].weight;
    }

    CorrectionModel model;
    model.hyperparams = hp;
    model.learning_rate = hp.learning_rate;
    model.train_seed = seed;

    double wsum = 0.0, wy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        wsum += w[i];
        wy += w[i] * y[i];
    }
    model.base_prediction = wy / wsum;

    std::vector<double> pred(n, model.base_prediction);
    auto loss = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += w[i] * (y[i] - pred[i]) * (y[i] - pred[i]);
        return s / wsum;
    };
    model.training_loss.push_back(loss());

    if (n >= 2) {
        std::vector<double> residual(n);
        for (int t = 0; t < hp.n_trees; ++t) {
            for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - pred[i];
            RegressionTree tree;
            tree.fit(x, residual, w, hp.max_depth, hp.min_samples_leaf);
            for (std::size_t i = 0; i < n; ++i) pred[i] += hp.learning_rate * tree.predict(x[i]);
            model.trees.push_back(std::move(tree));
            model.training_loss.push_back(loss());
        }
    }
    return model;
}

struct CvReport {
    std::vector<double> fold_maes;  // transformed scale
    double mean_cv_mae = 0.0;
    GbrtHyperparams best_hyperparams;
    RegressionMetrics test_transformed;
    RegressionMetrics test_original;
    std::size_t k_folds = 0;
};

inline double transformed_mae(const CorrectionModel& model,
                              const std::vector<TrainingSample>& samples) {
    if (samples.empty()) return std::numeric_limits<double>::infinity();
    double s = 0.0;
    for (const auto& smp : samples)
        s += std::abs(std::sqrt(smp.ground_distance_m) -
                      model.predict_transformed(smp.features));
    return s / static_cast<double>(samples.size());
}

/// Assign distinct frames to k folds (shuffled under seed, round robin).
inline std::map<std::int64_t, std::size_t> frame_folds(
    const std::vector<TrainingSample>& samples, std::size_t k, std::uint64_t seed) {
    std::set<std::int64_t> frame_set;
    for (const auto& s : samples) frame_set.insert(s.frame_id);
    std::vector<std::int64_t> frames(frame_set.begin(), frame_set.end());
    Rng rng(seed);
    rng.shuffle(frames);
    std::map<std::int64_t, std::size_t> fold_of;
    for (std::size_t i = 0; i < frames.size(); ++i) fold_of[frames[i]] = i % k;
    return fold_of;
}

struct GridSearchResult {
    CorrectionModel model;  // best config retrained on the full training set
    CvReport report;
};

/// Grid search with frame-level k-fold CV minimizing mean transformed-scale
/// MAE. Failed cells score +infinity. Ties resolve to the earliest grid cell.
inline GridSearchResult grid_search_cv(const std::vector<TrainingSample>& train_set,
                                       const std::vector<TrainingSample>& test_set,
                                       const std::vector<GbrtHyperparams>& grid,
                                       std::size_t k = 10, std::uint64_t seed = 0) {
    if (grid.empty()) throw InvalidInput("grid_search_cv: empty grid");
    if (k < 2) throw InvalidInput("grid_search_cv: k must be >= 2");

    const auto fold_of = frame_folds(train_set, k, seed);

    double best_score = std::numeric_limits<double>::infinity();
    std::size_t best_cell = 0;
    std::vector<double> best_fold_maes;

    for (std::size_t cell = 0; cell < grid.size(); ++cell) {
        std::vector<double> fold_maes;
        bool failed = false;
        for (std::size_t fold = 0; fold < k; ++fold) {
            std::vector<TrainingSample> cv_train, cv_val;
            for (const auto& s : train_set) {
                if (fold_of.at(s.frame_id) == fold)
                    cv_val.push_back(s);
                else
                    cv_train.push_back(s);
            }
            if (cv_val.empty()) continue;  // fewer frames than folds
            try {
                const CorrectionModel m = train(cv_train, grid[cell], seed);
                fold_maes.push_back(transformed_mae(m, cv_val));
            } catch (const InvalidInput&) {
                failed = true;
                break;
            }
        }
        if (failed || fold_maes.empty()) continue;
        double mean = 0.0;
        for (double v : fold_maes) mean += v;
        mean /= static_cast<double>(fold_maes.size());
        if (mean < best_score) {
            best_score = mean;
            best_cell = cell;
            best_fold_maes = fold_maes;
        }
    }
    if (!std::isfinite(best_score))
        throw InvalidInput("grid_search_cv: every grid cell failed");

    GridSearchResult result;
    result.model = train(train_set, grid[best_cell], seed);
    result.report.fold_maes = best_fold_maes;
    result.report.mean_cv_mae = best_score;
    result.report.best_hyperparams = grid[best_cell];
    result.report.k_folds = k;

    if (!test_set.empty()) {
        std::vector<double> at, pt, ao, po;
        for (const auto& s : test_set) {
            at.push_back(std::sqrt(s.ground_distance_m));
            pt.push_back(result.model.predict_transformed(s.features));
            ao.push_back(s.ground_distance_m);
            po.push_back(predict(result.model, s.features));
        }
        result.report.test_transformed = regression_metrics(at, pt);
        result.report.test_original = regression_metrics(ao, po);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Serialization (versioned JSON)
// ---------------------------------------------------------------------------

inline constexpr int kModelSchemaVersion = 1;

inline nlohmann::ordered_json model_to_json(const CorrectionModel& model) {
    nlohmann::ordered_json j;
    j["schema_version"] = kModelSchemaVersion;
    j["transform"] = "sqrt";
    j["base_prediction"] = model.base_prediction;
    j["learning_rate"] = model.learning_rate;
    j["min_prediction_m"] = model.min_prediction_m;
    j["train_seed"] = model.train_seed;
    j["feature_names"] = kDepthFeatureNames;
    j["hyperparams"] = {{"n_trees", model.hyperparams.n_trees},
                        {"max_depth", model.hyperparams.max_depth},
                        {"learning_rate", model.hyperparams.learning_rate},
                        {"min_samples_leaf", model.hyperparams.min_samples_leaf}};
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& t : model.trees) trees.push_back(t.to_json());
    j["trees"] = trees;
    return j;
}

inline CorrectionModel model_from_json(const nlohmann::json& j) {
    if (j.at("schema_version").get<int>() != kModelSchemaVersion)
        throw InvalidInput("model_from_json: unsupported schema version");
    if (j.at("transform").get<std::string>() != "sqrt")
        throw InvalidInput("model_from_json: unknown transform");
    CorrectionModel m;
    m.base_prediction = j.at("base_prediction").get<double>();
    m.learning_rate = j.at("learning_rate").get<double>();
    m.min_prediction_m = j.at("min_prediction_m").get<double>();
    m.train_seed = j.at("train_seed").get<std::uint64_t>();
    const auto& hp = j.at("hyperparams");
    m.hyperparams = {hp.at("n_trees").get<int>(), hp.at("max_depth").get<int>(),
                     hp.at("learning_rate").get<double>(),
                     hp.at("min_samples_leaf").get<int>()};
    for (const auto& t : j.at("trees")) m.trees.push_back(RegressionTree::from_json(t));
    return m;
}

}  // namespace curbsight

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "curbsight/errors.hpp"

namespace curbsight {

/// Axis-aligned regression tree, exact greedy split search on weighted
/// squared error. Deterministic: candidate thresholds are midpoints of sorted
/// unique feature values scanned in ascending order, ties broken toward the
/// lower threshold.
class RegressionTree {
public:
    struct Node {
        int feature = -1;      // -1 = leaf
        double threshold = 0.0;
        int left = -1;
        int right = -1;
        double value = 0.0;
    };

    void fit(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
             const std::vector<double>& w, int max_depth, int min_samples_leaf) {
        nodes_.clear();
        std::vector<std::size_t> idx(x.size());
        std::iota(idx.begin(), idx.end(), 0);
        build(x, y, w, idx, 0, max_depth, min_samples_leaf);
    }

    double predict(const std::vector<double>& features) const {
        int i = 0;
        while (nodes_[static_cast<std::size_t>(i)].feature >= 0) {
            const Node& nd = nodes_[static_cast<std::size_t>(i)];
            i = features[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left
                                                                               : nd.right;
        }
        return nodes_[static_cast<std::size_t>(i)].value;
    }

    nlohmann::ordered_json to_json() const {
        nlohmann::ordered_json arr = nlohmann::ordered_json::array();
        for (const Node& nd : nodes_) {
            nlohmann::ordered_json j;
            j["feature"] = nd.feature;
            j["threshold"] = nd.threshold;
            j["left"] = nd.left;
            j["right"] = nd.right;
            j["value"] = nd.value;
            arr.push_back(j);
        }
        return arr;
    }

    static RegressionTree from_json(const nlohmann::json& arr) {
        RegressionTree t;
        for (const auto& j : arr) {
            Node nd;
            nd.feature = j.at("feature").get<int>();
            nd.threshold = j.at("threshold").get<double>();
            nd.left = j.at("left").get<int>();
            nd.right = j.at("right").get<int>();
            nd.value = j.at("value").get<double>();
            t.nodes_.push_back(nd);
        }
        if (t.nodes_.empty()) throw InvalidInput("RegressionTree: empty node list");
        return t;
    }

    const std::vector<Node>& nodes() const { return nodes_; }

private:
    int build(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
              const std::vector<double>& w, const std::vector<std::size_t>& idx,
              int depth, int max_depth, int min_samples_leaf) {
        double wsum = 0.0, wy = 0.0;
        for (std::size_t i : idx) {
            wsum += w[i];
            wy += w[i] * y[i];
        }
        const double mean = wsum > 0.0 ? wy / wsum : 0.0;

        const int node_id = static_cast<int>(nodes_.size());
        nodes_.push_back({-1, 0.0, -1, -1, mean});

        if (depth >= max_depth || idx.size() < 2 * static_cast<std::size_t>(min_samples_leaf))
            return node_id;

        double parent_sse = 0.0;
        for (std::size_t i : idx) parent_sse += w[i] * (y[i] - mean) * (y[i] - mean);

        int best_feature = -1;
        double best_threshold = 0.0;
        double best_sse = parent_sse;
        const std::size_t n_features = x.empty() ? 0 : x[0].size();

        std::vector<std::size_t> order(idx);
        for (std::size_t f = 0; f < n_features; ++f) {
            std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                return x[a][f] < x[b][f];
            });
            // prefix sums over the sorted order
            double lw = 0.0, lwy = 0.0, lwyy = 0.0;
            double tw = 0.0, twy = 0.0, twyy = 0.0;
            for (std::size_t i : order) {
                tw += w[i];
                twy += w[i] * y[i];
                twyy += w[i] * y[i] * y[i];
            }
            for (std::size_t k = 0; k + 1 < order.size(); ++k) {
                const std::size_t i = order[k];
                lw += w[i];
                lwy += w[i] * y[i];
                lwyy += w[i] * y[i] * y[i];
                if (x[order[k]][f] == x[order[k + 1]][f]) continue;  // not a boundary
                const std::size_t n_left = k + 1;
                const std::size_t n_right = order.size() - n_left;
                if (n_left < static_cast<std::size_t>(min_samples_leaf) ||
                    n_right < static_cast<std::size_t>(min_samples_leaf))
                    continue;
                const double rw = tw - lw, rwy = twy - lwy, rwyy = twyy - lwyy;
                if (lw <= 0.0 || rw <= 0.0) continue;
                const double sse = (lwyy - lwy * lwy / lw) + (rwyy - rwy * rwy / rw);
                if (sse < best_sse - 1e-12) {  // strict improvement keeps lowest threshold
                    best_sse = sse;
                    best_feature = static_cast<int>(f);
                    best_threshold = (x[order[k]][f] + x[order[k + 1]][f]) / 2.0;
                }
            }
        }

        if (best_feature < 0) return node_id;

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : idx) {
            if (x[i][static_cast<std::size_t>(best_feature)] <= best_threshold)
                left_idx.push_back(i);
            else
                right_idx.push_back(i);
        }
        if (left_idx.empty() || right_idx.empty()) return node_id;

        nodes_[static_cast<std::size_t>(node_id)].feature = best_feature;
        nodes_[static_cast<std::size_t>(node_id)].threshold = best_threshold;
        const int l = build(x, y, w, left_idx, depth + 1, max_depth, min_samples_leaf);
        const int r = build(x, y, w, right_idx, depth + 1, max_depth, min_samples_leaf);
        nodes_[static_cast<std::size_t>(node_id)].left = l;
        nodes_[static_cast<std::size_t>(node_id)].right = r;
        return node_id;
    }

    std::vector<Node> nodes_;
};

}  // namespace curbsight

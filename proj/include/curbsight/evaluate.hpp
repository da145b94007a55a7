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

#include "curbsight/pipeline.hpp"
#include "curbsight/stats.hpp"
#include "curbsight/svg.hpp"

namespace curbsight {

struct PerObjectRecord {
    std::int64_t object_id = 0;
    ObjectKind kind = ObjectKind::other;
    double geo_error_m = 0.0;
    double first_distance_m = 0.0;
    double last_distance_m = 0.0;
    std::optional<double> height_error_m;
    std::optional<double> dbh_error_cm;
    std::optional<double> crown_error_m;
};

struct ScenarioEvaluation {
    std::string label;
    std::vector<PerObjectRecord> records;       // located objects with matching truth
    std::vector<std::int64_t> unlocatable;      // in truth, absent from estimates
    std::vector<std::int64_t> unknown_ids;      // in estimates, absent from truth
    SummaryRow geolocation_summary;
    std::vector<DistanceBin> bins;              // abs geolocation error vs last distance
    TestResult spearman_first;
    TestResult spearman_last;
    std::vector<std::array<double, 2>> depth_scatter;      // (true, raw mean)
    std::vector<std::array<double, 2>> predicted_scatter;  // (true, corrected)
};

/// Score one scenario against ground truth.
inline ScenarioEvaluation evaluate_scenario(
    const std::string& label, const std::vector<EstimateRecord>& estimates,
    const std::vector<StructuralEstimate>& measurements,
    const std::vector<Observation>& observations, const Track& track,
    const std::vector<SceneObject>& truth, const std::vector<double>& bin_edges,
    const CorrectionModel* model, const CameraIntrinsics& intrinsics) {
    ScenarioEvaluation ev;
    ev.label = label;

    std::map<std::int64_t, const SceneObject*> truth_of;
    for (const auto& t : truth) truth_of[t.object_id] = &t;
    std::map<std::int64_t, const StructuralEstimate*> measure_of;
    for (const auto& m : measurements) measure_of[m.object_id] = &m;
    const auto poses = pose_index(track);

    // first/last observing pose per object (by frame order)
    std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> frame_range;
    for (const auto& obs : observations) {
        auto it = frame_range.find(obs.object_id);
        if (it == frame_range.end())
            frame_range[obs.object_id] = {obs.frame_id, obs.frame_id};
        else {
            it->second.first = std::min(it->second.first, obs.frame_id);
            it->second.second = std::max(it->second.second, obs.frame_id);
        }
    }

    std::set<std::int64_t> located;
    for (const auto& est : estimates) {
        located.insert(est.object_id);
        const auto t = truth_of.find(est.object_id);
        if (t == truth_of.end()) {
            ev.unknown_ids.push_back(est.object_id);
            continue;
        }
        PerObjectRecord rec;
        rec.object_id = est.object_id;
        rec.kind = t->second->kind;
        rec.geo_error_m = haversine_distance(est.location, t->second->location);
        const auto fr = frame_range.find(est.object_id);
        if (fr != frame_range.end()) {
            const auto p1 = poses.find(fr->second.first);
            const auto p2 = poses.find(fr->second.second);
            if (p1 != poses.end())
                rec.first_distance_m =
                    haversine_distance(p1->second.position, t->second->location);
            if (p2 != poses.end())
                rec.last_distance_m =
                    haversine_distance(p2->second.position, t->second->location);
        }
        const auto m = measure_of.find(est.object_id);
        if (m != measure_of.end()) {
            rec.height_error_m = m->second->height_m - t->second->height_m;
            if (t->second->kind != ObjectKind::other)
                rec.dbh_error_cm = (m->second->width_m - t->second->width_m) * 100.0;
            if (t->second->kind == ObjectKind::tree && m->second->crown_width_m)
                rec.crown_error_m = *m->second->crown_width_m - t->second->crown_width_m;
        }
        ev.records.push_back(rec);
    }
    for (const auto& t : truth)
        if (!located.count(t.object_id)) ev.unlocatable.push_back(t.object_id);

    if (!ev.records.empty()) {
        std::vector<double> errors, last_d, first_d;
        for (const auto& r : ev.records) {
            errors.push_back(r.geo_error_m);
            last_d.push_back(r.last_distance_m);
            first_d.push_back(r.first_distance_m);
        }
        ev.geolocation_summary = summarize(errors);
        ev.bins = bin_by_distance(errors, last_d, bin_edges);
        if (errors.size() >= 3) {
            ev.spearman_first = spearman(errors, first_d);
            ev.spearman_last = spearman(errors, last_d);
        } else {
            ev.spearman_first.defined = false;
            ev.spearman_last.defined = false;
        }
    }

    // depth scatter: raw sample mean (and corrected prediction) vs true
    // camera-object ground distance
    for (const auto& obs : observations) {
        const auto t = truth_of.find(obs.object_id);
        const auto p = poses.find(obs.frame_id);
        if (t == truth_of.end() || p == poses.end()) continue;
        const LocalXY d = to_local_xy(t->second->location, p->second.position);
        const double true_dist = std::hypot(d.x, d.y);
        const DepthFeatures f = extract_features(obs, p->second, intrinsics);
        ev.depth_scatter.push_back({true_dist, f.raw_depth});
        if (model) ev.predicted_scatter.push_back({true_dist, predict(*model, f)});
    }
    return ev;
}

struct CrossScenarioTests {
    std::optional<TestResult> friedman_result;
    struct Pairwise {
        std::string comparison;
        TestResult result;
        double p_bonferroni = 1.0;
    };
    std::vector<Pairwise> pairwise;
    std::optional<TestResult> speed_effect;  // pooled slow vs fast per object
    std::optional<TestResult> mount_effect;  // pooled inside vs outside
    std::vector<std::int64_t> paired_objects;
    std::vector<std::int64_t> dropped_unpaired;
};

/// Paired tests across scenarios; objects must be located in every scenario
/// to enter the paired design, the rest are dropped with a warning list.
inline CrossScenarioTests cross_scenario_tests(
    const std::map<std::string, ScenarioEvaluation>& scenarios) {
    CrossScenarioTests out;
    if (scenarios.size() < 2) return out;

    std::map<std::string, std::map<std::int64_t, double>> err;
    std::set<std::int64_t> all_ids;
    for (const auto& [label, ev] : scenarios)
        for (const auto& r : ev.records) {
            err[label][r.object_id] = r.geo_error_m;
            all_ids.insert(r.object_id);
        }
    for (std::int64_t id : all_ids) {
        bool everywhere = true;
        for (const auto& [label, ev] : scenarios)
            if (!err[label].count(id)) everywhere = false;
        if (everywhere)
            out.paired_objects.push_back(id);
        else
            out.dropped_unpaired.push_back(id);
    }
    if (out.paired_objects.size() < 2) return out;

    std::vector<std::vector<double>> matrix;
    for (std::int64_t id : out.paired_objects) {
        std::vector<double> row;
        for (const auto& [label, ev] : scenarios) row.push_back(err[label][id]);
        matrix.push_back(row);
    }
    out.friedman_result = friedman(matrix);

    const auto have = [&](const char* l) { return scenarios.count(l) > 0; };
    if (have("In_Slow") && have("In_Speed") && have("Out_Slow") && have("Out_Speed")) {
        const auto column = [&](const char* l) {
            std::vector<double> v;
            for (std::int64_t id : out.paired_objects) v.push_back(err[l][id]);
            return v;
        };
        const std::vector<double> in_slow = column("In_Slow"), in_speed = column("In_Speed"),
                                  out_slow = column("Out_Slow"),
                                  out_speed = column("Out_Speed");

        const std::vector<std::pair<std::string, std::pair<const std::vector<double>*,
                                                           const std::vector<double>*>>>
            pairs = {{"In_Slow vs In_Speed", {&in_slow, &in_speed}},
                     {"Out_Slow vs Out_Speed", {&out_slow, &out_speed}},
                     {"In_Slow vs Out_Slow", {&in_slow, &out_slow}},
                     {"In_Speed vs Out_Speed", {&in_speed, &out_speed}}};
        std::vector<double> raw_p;
        for (const auto& [name, ab] : pairs) {
            CrossScenarioTests::Pairwise pw;
            pw.comparison = name;
            pw.result = wilcoxon_signed_rank(*ab.first, *ab.second);
            raw_p.push_back(pw.result.p_value);
            out.pairwise.push_back(pw);
        }
        const auto adjusted = bonferroni(raw_p, raw_p.size());
        for (std::size_t i = 0; i < adjusted.size(); ++i)
            out.pairwise[i].p_bonferroni = adjusted[i];

        std::vector<double> slow, fast, inside, outside;
        for (std::size_t i = 0; i < in_slow.size(); ++i) {
            slow.push_back((in_slow[i] + out_slow[i]) / 2.0);
            fast.push_back((in_speed[i] + out_speed[i]) / 2.0);
            inside.push_back((in_slow[i] + in_speed[i]) / 2.0);
            outside.push_back((out_slow[i] + out_speed[i]) / 2.0);
        }
        out.speed_effect = wilcoxon_signed_rank(slow, fast);
        out.mount_effect = wilcoxon_signed_rank(inside, outside);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Report serialization and rendering
// ---------------------------------------------------------------------------

namespace detail_report {

inline nlohmann::ordered_json summary_to_json(const SummaryRow& s) {
    return {{"n", s.n},       {"mean", s.mean}, {"mae", s.mae},   {"median", s.median},
            {"std", s.std_dev}, {"min", s.min},   {"q25", s.q25},   {"q75", s.q75},
            {"max", s.max},   {"iqr", s.iqr}};
}

inline nlohmann::ordered_json test_to_json(const TestResult& t) {
    const char* method = t.method == TestMethod::wilcoxon
                             ? "wilcoxon"
                             : (t.method == TestMethod::friedman ? "friedman" : "spearman");
    return {{"method", method},
            {"statistic", t.statistic},
            {"p_value", t.p_value},
            {"n", t.n},
            {"defined", t.defined}};
}

/// Structural error summaries grouped by object class and attribute.
inline nlohmann::ordered_json structural_to_json(const std::vector<PerObjectRecord>& records) {
    nlohmann::ordered_json out;
    const std::vector<std::pair<std::string, ObjectKind>> classes = {
        {"tree", ObjectKind::tree}, {"pole", ObjectKind::pole}, {"other", ObjectKind::other}};
    for (const auto& [name, kind] : classes) {
        std::vector<double> h, dbh, crown;
        for (const auto& r : records) {
            if (r.kind != kind) continue;
            if (r.height_error_m) h.push_back(*r.height_error_m);
            if (r.dbh_error_cm) dbh.push_back(*r.dbh_error_cm);
            if (r.crown_error_m) crown.push_back(*r.crown_error_m);
        }
        nlohmann::ordered_json cls;
        const auto emit = [&](const char* attr, const std::vector<double>& v) {
            if (v.empty()) return;
            std::vector<double> abs_v(v.size());
            for (std::size_t i = 0; i < v.size(); ++i) abs_v[i] = std::abs(v[i]);
            cls[attr] = {{"signed", summary_to_json(summarize(v))},
                         {"absolute", summary_to_json(summarize(abs_v))}};
        };
        emit("height_m", h);
        emit("dbh_cm", dbh);
        emit("crown_width_m", crown);
        if (!cls.empty()) out[name] = cls;
    }
    return out;
}

}  // namespace detail_report

inline nlohmann::ordered_json report_to_json(
    const std::map<std::string, ScenarioEvaluation>& scenarios,
    const CrossScenarioTests& tests, const std::vector<double>& bin_edges) {
    using detail_report::summary_to_json;
    using detail_report::test_to_json;

    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["bin_edges"] = bin_edges;

    nlohmann::ordered_json scen;
    for (const auto& [label, ev] : scenarios) {
        nlohmann::ordered_json s;
        s["n_located"] = ev.records.size();
        s["unlocatable"] = ev.unlocatable;
        s["unknown_ids"] = ev.unknown_ids;
        nlohmann::ordered_json recs = nlohmann::ordered_json::array();
        for (const auto& r : ev.records) {
            nlohmann::ordered_json o;
            o["object_id"] = r.object_id;
            o["kind"] = to_string(r.kind);
            o["geo_error_m"] = r.geo_error_m;
            o["first_distance_m"] = r.first_distance_m;
            o["last_distance_m"] = r.last_distance_m;
            if (r.height_error_m) o["height_error_m"] = *r.height_error_m;
            if (r.dbh_error_cm) o["dbh_error_cm"] = *r.dbh_error_cm;
            if (r.crown_error_m) o["crown_error_m"] = *r.crown_error_m;
            recs.push_back(o);
        }
        s["per_object"] = recs;
        if (!ev.records.empty()) {
            s["geolocation_summary"] = summary_to_json(ev.geolocation_summary);
            nlohmann::ordered_json bins = nlohmann::ordered_json::array();
            for (const auto& b : ev.bins) {
                nlohmann::ordered_json bj;
                bj["lo"] = b.lo;
                if (std::isfinite(b.hi)) bj["hi"] = b.hi;
                bj["overflow"] = b.overflow;
                bj["empty"] = !b.summary.has_value();
                if (b.summary) bj["summary"] = summary_to_json(*b.summary);
                bj["values"] = b.values;
                bins.push_back(bj);
            }
            s["distance_bins"] = bins;
            s["spearman_error_vs_first_distance"] = test_to_json(ev.spearman_first);
            s["spearman_error_vs_last_distance"] = test_to_json(ev.spearman_last);
        }
        s["structural"] = detail_report::structural_to_json(ev.records);
        nlohmann::ordered_json ds = nlohmann::ordered_json::array();
        for (const auto& p : ev.depth_scatter) ds.push_back({p[0], p[1]});
        s["depth_scatter_true_vs_raw"] = ds;
        nlohmann::ordered_json ps = nlohmann::ordered_json::array();
        for (const auto& p : ev.predicted_scatter) ps.push_back({p[0], p[1]});
        s["depth_scatter_true_vs_predicted"] = ps;
        scen[label] = s;
    }
    j["scenarios"] = scen;

    nlohmann::ordered_json t;
    if (tests.friedman_result) t["friedman"] = test_to_json(*tests.friedman_result);
    nlohmann::ordered_json pw = nlohmann::ordered_json::array();
    for (const auto& p : tests.pairwise) {
        nlohmann::ordered_json e = test_to_json(p.result);
        e["comparison"] = p.comparison;
        e["p_bonferroni"] = p.p_bonferroni;
        pw.push_back(e);
    }
    t["pairwise_wilcoxon"] = pw;
    if (tests.speed_effect) t["speed_effect"] = test_to_json(*tests.speed_effect);
    if (tests.mount_effect) t["mount_effect"] = test_to_json(*tests.mount_effect);
    t["paired_objects"] = tests.paired_objects;
    t["dropped_unpaired"] = tests.dropped_unpaired;
    j["tests"] = t;

    // Side-by-side reference values from the original field study; display
    // only, never pass/fail thresholds.
    nlohmann::ordered_json ref;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& r : kReferenceGeolocationRows)
        rows.push_back({{"label", r.label},
                        {"n", r.n},
                        {"mean", r.mean},
                        {"median", r.median},
                        {"std", r.std_dev},
                        {"min", r.min},
                        {"q25", r.q25},
                        {"q75", r.q75},
                        {"max", r.max},
                        {"iqr", r.iqr}});
    ref["geolocation_error_rows"] = rows;
    nlohmann::ordered_json tref = nlohmann::ordered_json::array();
    for (const auto& r : kReferenceTestRows)
        tref.push_back({{"test", r.test},
                        {"comparison", r.comparison},
                        {"statistic", r.statistic},
                        {"p_value", r.p_value}});
    ref["tests"] = tref;
    j["reference_field_study"] = ref;
    return j;
}

/// Plain-text table rendering of a report JSON document.
inline std::string render_report_text(const nlohmann::json& report) {
    std::ostringstream out;
    out.setf(std::ios::fixed);
    out.precision(3);
    out << "geolocation error summary (m)\n";
    out << "scenario       n     mean   median  std    q25    q75    iqr    max\n";
    for (const auto& [label, s] : report.at("scenarios").items()) {
        if (!s.contains("geolocation_summary")) continue;
        const auto& g = s.at("geolocation_summary");
        out << label;
        for (std::size_t i = label.size(); i < 14; ++i) out << ' ';
        out << ' ' << g.at("n").get<std::size_t>() << "   " << g.at("mean").get<double>()
            << "  " << g.at("median").get<double>() << "  " << g.at("std").get<double>()
            << "  " << g.at("q25").get<double>() << "  " << g.at("q75").get<double>() << "  "
            << g.at("iqr").get<double>() << "  " << g.at("max").get<double>() << "\n";
    }
    out << "\nreference (field study) geolocation error rows\n";
    for (const auto& r : report.at("reference_field_study").at("geolocation_error_rows"))
        out << r.at("label").get<std::string>() << "  n=" << r.at("n").get<int>()
            << "  mean=" << r.at("mean").get<double>()
            << "  median=" << r.at("median").get<double>()
            << "  iqr=" << r.at("iqr").get<double>() << "\n";
    const auto& tests = report.at("tests");
    out << "\nstatistical tests\n";
    if (tests.contains("friedman")) {
        const auto& f = tests.at("friedman");
        out << "friedman: chi2=" << f.at("statistic").get<double>()
            << " p=" << f.at("p_value").get<double>() << "\n";
    }
    for (const auto& p : tests.at("pairwise_wilcoxon"))
        out << "wilcoxon " << p.at("comparison").get<std::string>()
            << ": W=" << p.at("statistic").get<double>()
            << " p=" << p.at("p_value").get<double>()
            << " p_bonf=" << p.at("p_bonferroni").get<double>() << "\n";
    if (tests.contains("speed_effect")) {
        const auto& s = tests.at("speed_effect");
        out << "speed effect (pooled): W=" << s.at("statistic").get<double>()
            << " p=" << s.at("p_value").get<double>() << "\n";
    }
    if (tests.contains("mount_effect")) {
        const auto& s = tests.at("mount_effect");
        out << "mount effect (pooled): W=" << s.at("statistic").get<double>()
            << " p=" << s.at("p_value").get<double>() << "\n";
    }
    return out.str();
}

/// SVG artifacts regenerated purely from a report JSON document.
inline void render_report_plots(const nlohmann::json& report, const std::string& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::pair<std::string, std::vector<double>>> scenario_groups;
    for (const auto& [label, s] : report.at("scenarios").items()) {
        // binned boxplot
        if (s.contains("distance_bins")) {
            std::vector<std::pair<std::string, std::vector<double>>> groups;
            for (const auto& b : s.at("distance_bins")) {
                std::string name = std::to_string(static_cast<int>(b.at("lo").get<double>()));
                name += b.contains("hi")
                            ? "-" + std::to_string(static_cast<int>(b.at("hi").get<double>()))
                            : "+";
                groups.push_back({name, b.at("values").get<std::vector<double>>()});
            }
            std::ofstream svg_out(out_dir + "/" + label + "_bins.svg", std::ios::binary);
            svg::write_boxplot(svg_out, label + " geolocation error by distance bin", groups,
                               "error (m)");
        }
        // depth scatters
        const auto scatter = [&](const char* key, const std::string& suffix,
                                 const std::string& ylabel) {
            if (!s.contains(key)) return;
            std::vector<double> xs, ys;
            for (const auto& p : s.at(key)) {
                xs.push_back(p.at(0).get<double>());
                ys.push_back(p.at(1).get<double>());
            }
            if (xs.empty()) return;
            std::ofstream svg_out(out_dir + "/" + label + suffix, std::ios::binary);
            svg::write_scatter(svg_out, label + " " + ylabel + " vs true distance", xs, ys,
                               "true distance (m)", ylabel);
        };
        scatter("depth_scatter_true_vs_raw", "_depth_scatter.svg", "raw depth (m)");
        scatter("depth_scatter_true_vs_predicted", "_predicted_scatter.svg",
                "predicted distance (m)");
        if (s.contains("per_object")) {
            std::vector<double> errors;
            for (const auto& r : s.at("per_object"))
                errors.push_back(r.at("geo_error_m").get<double>());
            scenario_groups.push_back({label, errors});
        }
    }
    if (!scenario_groups.empty()) {
        std::ofstream svg_out(out_dir + "/scenarios_boxplot.svg", std::ios::binary);
        svg::write_boxplot(svg_out, "geolocation error by scenario", scenario_groups,
                           "error (m)");
    }
}

inline nlohmann::ordered_json cmd_evaluate(const RunConfig& cfg, const std::string& out_dir) {
    const std::string truth_path =
        !cfg.evaluate.truth.empty() ? cfg.evaluate.truth : cfg.paths.truth;
    if (truth_path.empty()) throw ConfigError("evaluate: no ground truth path configured");
    const auto truth = ground_truth_from_file(truth_path);

    std::optional<CorrectionModel> model;
    if (!cfg.paths.model.empty() && std::filesystem::exists(cfg.paths.model))
        model = model_from_json(read_json_file(cfg.paths.model));

    std::map<std::string, ScenarioEvaluation> scenarios;
    if (cfg.evaluate.scenarios.empty()) {
        // single-dataset evaluation from the flat paths
        const auto estimates = estimates_from_file(cfg.paths.estimates);
        const auto measurements = cfg.paths.measurements.empty()
                                      ? std::vector<StructuralEstimate>{}
                                      : measurements_from_file(cfg.paths.measurements);
        const auto observations = parse_observations_file(cfg.paths.observations);
        const Track track =
            load_corrected_track(cfg.paths.track, cfg.paths.control_points);
        scenarios[cfg.scenario_label] = evaluate_scenario(
            cfg.scenario_label, estimates, measurements, observations, track, truth,
            cfg.evaluate.bin_edges, model ? &*model : nullptr, cfg.intrinsics);
    } else {
        for (const auto& [label, paths] : cfg.evaluate.scenarios) {
            const auto estimates = estimates_from_file(paths.estimates);
            const auto measurements = paths.measurements.empty()
                                          ? std::vector<StructuralEstimate>{}
                                          : measurements_from_file(paths.measurements);
            const auto observations = parse_observations_file(paths.observations);
            const Track track = load_corrected_track(paths.track, paths.control_points);
            scenarios[label] = evaluate_scenario(label, estimates, measurements, observations,
                                                 track, truth, cfg.evaluate.bin_edges,
                                                 model ? &*model : nullptr, cfg.intrinsics);
        }
    }

    const CrossScenarioTests tests = cross_scenario_tests(scenarios);
    const nlohmann::ordered_json report =
        report_to_json(scenarios, tests, cfg.evaluate.bin_edges);

    write_json_file(out_dir + "/report.json", report);
    write_text_file(out_dir + "/report.txt", render_report_text(report));
    render_report_plots(report, out_dir);
    return report;
}

/// Regenerate the human-readable artifacts from an existing report.json.
inline void cmd_report(const std::string& report_path, const std::string& out_dir) {
    const nlohmann::json report = read_json_file(report_path);
    write_text_file(out_dir + "/report.txt", render_report_text(report));
    render_report_plots(report, out_dir);
}

}  // namespace curbsight

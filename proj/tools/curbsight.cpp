// curbsight: street-level observations -> corrected object geolocations and
// structural measurements, plus simulation and evaluation stages.
//
// Exit codes: 0 success, 1 input/config error, 2 internal error.

#include <cstdint>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "curbsight/errors.hpp"
#include "curbsight/evaluate.hpp"
#include "curbsight/pipeline.hpp"

namespace {

struct CommonOpts {
    std::string config_path;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
};

void add_common(CLI::App* cmd, CommonOpts& opts, bool config_required = true) {
    auto* c = cmd->add_option("--config", opts.config_path, "JSON run configuration");
    if (config_required) c->required();
    cmd->add_option("--seed", opts.seed, "random seed");
    cmd->add_option("--out", opts.out_dir, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"street-level object geolocation and measurement pipeline"};
    app.require_subcommand(1);

    CommonOpts sim_o, train_o, geo_o, meas_o, eval_o, rep_o;
    std::string report_path;

    auto* sim = app.add_subcommand("simulate", "render a synthetic scene to CSV/GeoJSON/DEM");
    add_common(sim, sim_o);
    auto* train = app.add_subcommand("train", "fit the depth-correction model");
    add_common(train, train_o);
    auto* geo = app.add_subcommand("geolocate", "triangulate object positions");
    add_common(geo, geo_o);
    auto* meas = app.add_subcommand("measure", "estimate heights and widths");
    add_common(meas, meas_o);
    auto* eval = app.add_subcommand("evaluate", "score estimates against ground truth");
    add_common(eval, eval_o);
    auto* rep = app.add_subcommand("report", "regenerate text/SVG artifacts from report.json");
    add_common(rep, rep_o, /*config_required=*/false);
    rep->add_option("--report", report_path, "existing report.json")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (sim->parsed()) {
            const auto cfg = curbsight::load_run_config(sim_o.config_path);
            const auto datasets = curbsight::cmd_simulate(cfg, sim_o.seed, sim_o.out_dir);
            for (const auto& d : datasets)
                std::cerr << "simulate: wrote " << d.rendered.observations.size()
                          << " observations to " << d.directory << "\n";
        } else if (train->parsed()) {
            const auto cfg = curbsight::load_run_config(train_o.config_path);
            const auto out = curbsight::cmd_train(cfg, train_o.out_dir);
            std::cerr << "train: cv mae (transformed) = " << out.report.mean_cv_mae << "\n";
        } else if (geo->parsed()) {
            const auto cfg = curbsight::load_run_config(geo_o.config_path);
            const auto results = curbsight::cmd_geolocate(cfg, geo_o.out_dir);
            std::size_t located = 0;
            for (const auto& r : results)
                if (r.estimate) ++located;
            std::cerr << "geolocate: " << located << "/" << results.size()
                      << " objects located\n";
        } else if (meas->parsed()) {
            const auto cfg = curbsight::load_run_config(meas_o.config_path);
            const auto results = curbsight::cmd_measure(cfg, meas_o.out_dir);
            std::cerr << "measure: " << results.size() << " objects measured\n";
        } else if (eval->parsed()) {
            const auto cfg = curbsight::load_run_config(eval_o.config_path);
            curbsight::cmd_evaluate(cfg, eval_o.out_dir);
            std::cerr << "evaluate: wrote report to " << eval_o.out_dir << "\n";
        } else if (rep->parsed()) {
            curbsight::cmd_report(report_path, rep_o.out_dir);
            std::cerr << "report: regenerated artifacts in " << rep_o.out_dir << "\n";
        }
    } catch (const curbsight::InvalidInput& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const curbsight::ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const curbsight::ConfigError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

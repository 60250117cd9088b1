// Command-line front end: training sweeps, k-shot grids, scatter plots.

#include "domino/experiment.hpp"
#include "domino/io.hpp"
#include "domino/plot.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace domino;

namespace {

int guarded(const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train sets of diverse near-optimal policies on tabular MDPs and evaluate them"};
    app.require_subcommand(1);

    std::string config_path, csv_path, svg_path, out_path;
    int workers = 0;

    auto* run = app.add_subcommand("run", "Train every sweep point and seed; write qd.csv, traces and checkpoints");
    run->add_option("config", config_path, "experiment config (JSON)")->required();
    run->add_option("-j,--workers", workers, "worker threads (default: DOMINO_WORKERS or all cores)");

    auto* kshot = app.add_subcommand("kshot", "Evaluate k-shot selection under perturbations; write kshot.csv");
    kshot->add_option("config", config_path, "experiment config (JSON) with a kshot section")->required();
    kshot->add_option("-j,--workers", workers, "worker threads (default: DOMINO_WORKERS or all cores)");

    auto* plot = app.add_subcommand("plot", "Render a QD scatter (diversity vs value) from qd.csv");
    plot->add_option("csv", csv_path, "qd.csv produced by run")->required();
    plot->add_option("svg", svg_path, "output SVG path")->required();

    auto* validate = app.add_subcommand("validate", "Parse and check a config without running it");
    validate->add_option("config", config_path, "experiment config (JSON)")->required();

    auto* export_mdp = app.add_subcommand("export-mdp", "Write the config's environment as an MDP JSON document");
    export_mdp->add_option("config", config_path, "experiment config (JSON)")->required();
    export_mdp->add_option("out", out_path, "output JSON path")->required();

    CLI11_PARSE(app, argc, argv);
    const int threads = workers > 0 ? workers : worker_count();

    if (*run) {
        return guarded([&] {
            const ExperimentConfig cfg = load_config(config_path);
            const int failures = run_experiment(cfg, threads, std::cerr);
            std::cout << "wrote " << cfg.output_dir << "/qd.csv\n";
            if (failures) std::cerr << failures << " run(s) failed\n";
            return failures ? 1 : 0;
        });
    }
    if (*kshot) {
        return guarded([&] {
            const ExperimentConfig cfg = load_config(config_path);
            run_kshot(cfg, threads, std::cerr);
            std::cout << "wrote " << cfg.output_dir << "/kshot.csv\n";
            return 0;
        });
    }
    if (*plot) {
        return guarded([&] {
            plot_scatter(csv_path, svg_path);
            std::cout << "wrote " << svg_path << "\n";
            return 0;
        });
    }
    if (*validate) {
        return guarded([&] {
            const ExperimentConfig cfg = load_config(config_path);
            const auto runs = expand_sweep(cfg);
            std::cout << "ok: " << cfg.name << ", " << runs.size() << " run(s)";
            if (cfg.kshot) std::cout << ", k-shot grid with " << cfg.kshot->methods.size() << " method(s)";
            std::cout << "\n";
            return 0;
        });
    }
    if (*export_mdp) {
        return guarded([&] {
            const ExperimentConfig cfg = load_config(config_path);
            write_text_file(out_path, mdp_to_json(cfg.environment.build().mdp).dump(1) + "\n");
            std::cout << "wrote " << out_path << "\n";
            return 0;
        });
    }
    return 0;
}

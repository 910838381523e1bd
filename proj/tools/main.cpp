#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tabml/pipeline.hpp"

namespace {

// Batch pipeline driver: every subcommand reads the same JSON config; --seed
// and --out override the config in place.
struct GlobalArgs {
    std::string config_path;
    std::string output_dir;
    long long seed = -1;
};

tabml::pipeline::PipelineConfig load_config(const GlobalArgs& args) {
    if (args.config_path.empty())
        throw tabml::Error(tabml::ErrorKind::config, "--config is required");
    auto config = tabml::pipeline::PipelineConfig::load(args.config_path);
    if (args.seed >= 0) config.seed = static_cast<std::uint64_t>(args.seed);
    if (!args.output_dir.empty()) config.output_dir = args.output_dir;
    return config;
}

int guarded(const std::function<void()>& body) {
    try {
        body();
        return 0;
    } catch (const tabml::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"tabml: three-stage tabular analytics pipeline "
                 "(supervised benchmark, cluster validation, nonparametric tests)"};
    app.require_subcommand(1);

    GlobalArgs args;
    app.add_option("--config", args.config_path, "pipeline config (JSON)")->expected(1);
    app.add_option("--seed", args.seed, "override the config seed")->expected(1);
    app.add_option("--out", args.output_dir, "override the output directory")->expected(1);

    auto* ingest = app.add_subcommand("ingest", "load datasets and write summary statistics");
    auto* stage1 = app.add_subcommand("stage1", "supervised benchmark with CV, test set and SHAP");
    auto* stage2 = app.add_subcommand("stage2", "k-means subtype clustering with validity sweep");
    auto* stage3 = app.add_subcommand("stage3", "nonparametric hypothesis tests");
    auto* all = app.add_subcommand("all", "run every configured stage and write run_report.json");
    auto* report = app.add_subcommand("report", "render a saved run_report.json");

    std::string report_path;
    report->add_option("--report", report_path, "path to run_report.json (default <out>/run_report.json)");

    CLI11_PARSE(app, argc, argv);

    using tabml::pipeline::PipelineConfig;

    if (ingest->parsed())
        return guarded([&] {
            auto config = load_config(args);
            auto summary = tabml::pipeline::run_ingest(config);
            std::cout << summary.dump(2) << "\n";
        });
    if (stage1->parsed())
        return guarded([&] {
            auto config = load_config(args);
            tabml::pipeline::run_stage1(config);
            std::cout << "stage1 artifacts written to " << config.output_dir << "\n";
        });
    if (stage2->parsed())
        return guarded([&] {
            auto config = load_config(args);
            tabml::pipeline::run_stage2(config);
            std::cout << "stage2 artifacts written to " << config.output_dir << "\n";
        });
    if (stage3->parsed())
        return guarded([&] {
            auto config = load_config(args);
            tabml::pipeline::run_stage3(config);
            std::cout << "stage3 artifacts written to " << config.output_dir << "\n";
        });
    if (all->parsed())
        return guarded([&] {
            auto config = load_config(args);
            auto run = tabml::pipeline::run_all(config);
            std::cout << tabml::pipeline::render_report(run.to_json());
        });
    if (report->parsed())
        return guarded([&] {
            std::string path = report_path;
            if (path.empty()) {
                std::string out_dir = args.output_dir;
                if (out_dir.empty() && !args.config_path.empty())
                    out_dir = load_config(args).output_dir;
                if (out_dir.empty())
                    throw tabml::Error(tabml::ErrorKind::config,
                                       "report needs --report, --out or --config");
                path = out_dir + "/run_report.json";
            }
            std::ifstream in(path);
            if (!in)
                throw tabml::Error(tabml::ErrorKind::data, "cannot open report '" + path + "'");
            nlohmann::json doc;
            in >> doc;
            std::cout << tabml::pipeline::render_report(doc);
        });
    return 0;
}

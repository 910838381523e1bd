#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tabml/cluster.hpp"
#include "tabml/dataio.hpp"
#include "tabml/ensemble.hpp"
#include "tabml/eval.hpp"
#include "tabml/explain.hpp"
#include "tabml/models.hpp"
#include "tabml/stats.hpp"

namespace tabml::pipeline {

struct DatasetConfig {
    std::string csv_path;
    std::vector<dataio::ColumnSchema> schema;
};

struct Stage1Config {
    DatasetConfig dataset;
    bool paper_literal = false;       // global preprocessing fits instead of fold-local
    bool iqr_filter = true;
    double test_fraction = 0.2;
    std::vector<models::ClassifierSpec> model_specs; // defaults: the five stage-1 models
    bool stacking = true;
    std::size_t stacking_folds = 5;
    std::size_t cv_folds = 5;
    std::string test_model = "svm_rbf"; // evaluated on the held-out split
    bool shap = true;
};

struct Stage2Config {
    std::vector<std::string> features = {"Glucose", "Insulin", "Age"};
    std::size_t k_min = 2;
    std::size_t k_max = 8;
    double margin = 0.005;
    std::size_t n_init = 10;
};

struct Stage3Config {
    DatasetConfig dataset;
    std::string group_column;
    std::string kruskal_value_column;
    std::vector<std::pair<std::string, std::string>> spearman_pairs;
    std::vector<std::string> normality_screen;
    double alpha = 0.05;
    bool tie_correction = true;
};

struct PipelineConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::size_t threads = 0; // 0: TABML_THREADS env or hardware
    std::optional<Stage1Config> stage1;
    std::optional<Stage2Config> stage2;
    std::optional<Stage3Config> stage3;

    static PipelineConfig from_json(const nlohmann::json& doc);
    static PipelineConfig load(const std::string& path);
    nlohmann::json to_json() const;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
};

struct RunReport {
    nlohmann::json config_echo;
    std::string version;
    nlohmann::json stage1;
    nlohmann::json stage2;
    nlohmann::json stage3;
    std::vector<StageTiming> timings;

    nlohmann::json to_json() const;
};

// Per-stage runners append artifacts under config.output_dir and return the
// stage fragment that goes into the RunReport.
nlohmann::json run_ingest(const PipelineConfig& config);
nlohmann::json run_stage1(const PipelineConfig& config);
nlohmann::json run_stage2(const PipelineConfig& config);
nlohmann::json run_stage3(const PipelineConfig& config);
RunReport run_all(const PipelineConfig& config);

// Renders a saved run report for the console.
std::string render_report(const nlohmann::json& report);

extern const char* kVersion;

} // namespace tabml::pipeline

#include "tabml/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "tabml/preprocess.hpp"

namespace tabml::pipeline {

const char* kVersion = "0.1.0";

namespace fs = std::filesystem;
namespace pp = tabml::preprocess;

namespace {

std::string g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string f3(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::stage, "cannot write artifact '" + path.string() + "'");
    out << content;
}

void write_json(const fs::path& path, const nlohmann::json& doc) {
    write_text(path, doc.dump(2) + "\n");
}

DatasetConfig dataset_config_from_json(const nlohmann::json& doc) {
    DatasetConfig cfg;
    if (!doc.contains("csv")) throw Error(ErrorKind::config, "dataset config needs 'csv'");
    cfg.csv_path = doc.at("csv").get<std::string>();
    if (!doc.contains("schema")) throw Error(ErrorKind::config, "dataset config needs 'schema'");
    cfg.schema = dataio::schema_from_json(doc.at("schema"));
    return cfg;
}

std::vector<models::ClassifierSpec> default_stage1_models(std::uint64_t seed) {
    using models::ClassifierSpec;
    using models::ModelKind;
    return {ClassifierSpec::defaults(ModelKind::logreg, seed),
            ClassifierSpec::defaults(ModelKind::svm_rbf, seed),
            ClassifierSpec::defaults(ModelKind::random_forest, seed),
            ClassifierSpec::defaults(ModelKind::extra_trees, seed),
            ClassifierSpec::defaults(ModelKind::grad_boost, seed)};
}

} // namespace

PipelineConfig PipelineConfig::from_json(const nlohmann::json& doc) {
    PipelineConfig cfg;
    if (!doc.contains("seed")) throw Error(ErrorKind::config, "config needs a 'seed'");
    cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("output_dir")) cfg.output_dir = doc.at("output_dir").get<std::string>();
    if (doc.contains("threads")) cfg.threads = doc.at("threads").get<std::size_t>();

    if (doc.contains("stage1")) {
        const auto& s1 = doc.at("stage1");
        Stage1Config stage;
        stage.dataset = dataset_config_from_json(s1);
        if (s1.contains("preprocess")) {
            const auto& prep = s1.at("preprocess");
            if (prep.contains("mode")) {
                const std::string mode = prep.at("mode").get<std::string>();
                if (mode == "paper_literal") stage.paper_literal = true;
                else if (mode != "fold_local")
                    throw Error(ErrorKind::config,
                                "preprocess.mode must be 'fold_local' or 'paper_literal'");
            }
            if (prep.contains("iqr_filter")) stage.iqr_filter = prep.at("iqr_filter").get<bool>();
            if (prep.contains("test_fraction"))
                stage.test_fraction = prep.at("test_fraction").get<double>();
        }
        if (s1.contains("models")) {
            for (const auto& m : s1.at("models"))
                stage.model_specs.push_back(models::ClassifierSpec::from_json(m, cfg.seed));
        } else {
            stage.model_specs = default_stage1_models(cfg.seed);
        }
        if (s1.contains("stacking")) {
            const auto& st = s1.at("stacking");
            if (st.contains("enabled")) stage.stacking = st.at("enabled").get<bool>();
            if (st.contains("folds")) stage.stacking_folds = st.at("folds").get<std::size_t>();
        }
        if (s1.contains("cv_folds")) stage.cv_folds = s1.at("cv_folds").get<std::size_t>();
        if (s1.contains("test_model")) stage.test_model = s1.at("test_model").get<std::string>();
        if (s1.contains("shap")) stage.shap = s1.at("shap").get<bool>();
        cfg.stage1 = std::move(stage);
    }

    if (doc.contains("stage2")) {
        const auto& s2 = doc.at("stage2");
        Stage2Config stage;
        if (s2.contains("features"))
            stage.features = s2.at("features").get<std::vector<std::string>>();
        if (s2.contains("k_min")) stage.k_min = s2.at("k_min").get<std::size_t>();
        if (s2.contains("k_max")) stage.k_max = s2.at("k_max").get<std::size_t>();
        if (s2.contains("margin")) stage.margin = s2.at("margin").get<double>();
        if (s2.contains("n_init")) stage.n_init = s2.at("n_init").get<std::size_t>();
        cfg.stage2 = std::move(stage);
    }

    if (doc.contains("stage3")) {
        const auto& s3 = doc.at("stage3");
        Stage3Config stage;
        stage.dataset = dataset_config_from_json(s3);
        if (!s3.contains("group_column"))
            throw Error(ErrorKind::config, "stage3 needs 'group_column'");
        stage.group_column = s3.at("group_column").get<std::string>();
        if (!s3.contains("kruskal_value"))
            throw Error(ErrorKind::config, "stage3 needs 'kruskal_value'");
        stage.kruskal_value_column = s3.at("kruskal_value").get<std::string>();
        if (s3.contains("spearman_pairs")) {
            for (const auto& pair : s3.at("spearman_pairs")) {
                if (!pair.is_array() || pair.size() != 2)
                    throw Error(ErrorKind::config, "spearman_pairs entries must be [x, y]");
                stage.spearman_pairs.emplace_back(pair[0].get<std::string>(),
                                                  pair[1].get<std::string>());
            }
        }
        if (s3.contains("normality_screen"))
            stage.normality_screen = s3.at("normality_screen").get<std::vector<std::string>>();
        if (s3.contains("alpha")) stage.alpha = s3.at("alpha").get<double>();
        if (s3.contains("tie_correction"))
            stage.tie_correction = s3.at("tie_correction").get<bool>();
        // referenced columns must exist in the schema
        auto require_column = [&](const std::string& name) {
            for (const auto& col : stage.dataset.schema)
                if (col.name == name) return;
            throw Error(ErrorKind::config, "stage3 references unknown column '" + name + "'");
        };
        require_column(stage.group_column);
        require_column(stage.kruskal_value_column);
        for (const auto& [a, b] : stage.spearman_pairs) {
            require_column(a);
            require_column(b);
        }
        for (const auto& c : stage.normality_screen) require_column(c);
        cfg.stage3 = std::move(stage);
    }
    return cfg;
}

PipelineConfig PipelineConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::config, "cannot open config '" + path + "'");
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::config, "config parse error: " + std::string(e.what()));
    }
    return from_json(doc);
}

nlohmann::json PipelineConfig::to_json() const {
    nlohmann::json doc{{"seed", seed}, {"output_dir", output_dir}, {"threads", threads}};
    if (stage1) {
        nlohmann::json s1;
        s1["csv"] = stage1->dataset.csv_path;
        s1["schema"] = dataio::schema_to_json(stage1->dataset.schema);
        s1["preprocess"] = {{"mode", stage1->paper_literal ? "paper_literal" : "fold_local"},
                            {"iqr_filter", stage1->iqr_filter},
                            {"test_fraction", stage1->test_fraction}};
        s1["models"] = nlohmann::json::array();
        for (const auto& spec : stage1->model_specs) s1["models"].push_back(spec.to_json());
        s1["stacking"] = {{"enabled", stage1->stacking}, {"folds", stage1->stacking_folds}};
        s1["cv_folds"] = stage1->cv_folds;
        s1["test_model"] = stage1->test_model;
        s1["shap"] = stage1->shap;
        doc["stage1"] = s1;
    }
    if (stage2) {
        doc["stage2"] = {{"features", stage2->features}, {"k_min", stage2->k_min},
                         {"k_max", stage2->k_max},       {"margin", stage2->margin},
                         {"n_init", stage2->n_init}};
    }
    if (stage3) {
        nlohmann::json s3;
        s3["csv"] = stage3->dataset.csv_path;
        s3["schema"] = dataio::schema_to_json(stage3->dataset.schema);
        s3["group_column"] = stage3->group_column;
        s3["kruskal_value"] = stage3->kruskal_value_column;
        s3["spearman_pairs"] = nlohmann::json::array();
        for (const auto& [a, b] : stage3->spearman_pairs)
            s3["spearman_pairs"].push_back({a, b});
        s3["normality_screen"] = stage3->normality_screen;
        s3["alpha"] = stage3->alpha;
        s3["tie_correction"] = stage3->tie_correction;
        doc["stage3"] = s3;
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Shared stage-1 preparation
// ---------------------------------------------------------------------------

namespace {

struct PreparedStage1 {
    dataio::TabularDataset working;  // encoded, row-filtered; raw numeric cells
                                     // (imputation happens fold-locally) unless paper_literal
    pp::PreprocessReport report;
};

PreparedStage1 prepare_stage1_dataset(const Stage1Config& stage) {
    auto raw = dataio::load_csv(stage.dataset.csv_path, stage.dataset.schema);
    auto encoded = dataio::encode_binary(raw);

    PreparedStage1 out;
    if (stage.iqr_filter) {
        // the filter scans an imputed copy; quartiles need complete columns
        auto [imputed, impute_report] = pp::impute_zero_median(encoded);
        auto [filtered, filter_report] = pp::iqr_filter(imputed);
        out.report.impute = impute_report;
        out.report.filter = filter_report;
        if (stage.paper_literal) {
            out.working = std::move(filtered);
        } else {
            std::vector<std::size_t> keep;
            std::vector<bool> removed(encoded.n_rows, false);
            for (const auto& r : filter_report.removed) removed[r.row] = true;
            for (std::size_t i = 0; i < encoded.n_rows; ++i)
                if (!removed[i]) keep.push_back(i);
            out.working = encoded.select_rows(keep);
        }
    } else {
        if (stage.paper_literal) {
            auto [imputed, impute_report] = pp::impute_zero_median(encoded);
            out.report.impute = impute_report;
            out.working = std::move(imputed);
        } else {
            out.working = std::move(encoded);
        }
    }
    return out;
}

eval::ModelFactory factory_for(const models::ClassifierSpec& spec) {
    return [spec](const Matrix& x, const std::vector<int>& y, std::uint64_t seed) {
        models::ClassifierSpec fold_spec = spec;
        fold_spec.seed = seed;
        return models::fit_classifier(fold_spec, x, y);
    };
}

eval::ModelFactory stacking_factory(const Stage1Config& stage) {
    const ensemble::StackingConfig cfg{stage.model_specs, stage.stacking_folds, 0};
    return [cfg](const Matrix& x, const std::vector<int>& y, std::uint64_t seed) {
        auto stacked =
            std::make_shared<ensemble::StackingModel>(ensemble::fit_stacking(x, y, cfg, seed));
        // adapt the stacking model to the Classifier interface
        class Adapter final : public models::Classifier {
        public:
            explicit Adapter(std::shared_ptr<ensemble::StackingModel> m) : model_(std::move(m)) {}
            std::string name() const override { return "stacking"; }
            std::size_t n_features() const override {
                return model_->base_models.front()->n_features();
            }
            std::vector<double> positive_proba(const Matrix& x) const override {
                return model_->positive_proba(x);
            }
            std::vector<double> decision_score(const Matrix& x) const override {
                return model_->decision_score(x);
            }
            nlohmann::json to_json() const override { return model_->to_json(); }

        private:
            std::shared_ptr<ensemble::StackingModel> model_;
        };
        return std::make_unique<Adapter>(stacked);
    };
}

std::string cv_table_csv(const std::vector<eval::CVSummary>& summaries) {
    std::ostringstream out;
    out << "model,accuracy,balanced_accuracy,precision,recall,f1,roc_auc\n";
    for (const auto& s : summaries) {
        out << s.model;
        for (const auto& name : eval::MetricSet::metric_names())
            out << ',' << f3(s.mean.by_name(name)) << "±" << f3(s.stddev.by_name(name));
        out << '\n';
    }
    return out.str();
}

nlohmann::json metric_set_json(const eval::MetricSet& m) {
    return {{"accuracy", m.accuracy},
            {"balanced_accuracy", m.balanced_accuracy},
            {"precision", m.precision},
            {"recall", m.recall},
            {"f1", m.f1},
            {"specificity", m.specificity},
            {"roc_auc", m.roc_auc},
            {"precision_degenerate", m.precision_degenerate}};
}

} // namespace

nlohmann::json run_ingest(const PipelineConfig& config) {
    nlohmann::json report;
    const fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir);
    if (config.stage1) {
        auto ds = dataio::load_csv(config.stage1->dataset.csv_path, config.stage1->dataset.schema);
        auto encoded = dataio::encode_binary(ds);
        report["stage1"] = dataio::summary_to_json(dataio::summarize(encoded));
    }
    if (config.stage3) {
        auto ds = dataio::load_csv(config.stage3->dataset.csv_path, config.stage3->dataset.schema);
        report["stage3"] = dataio::summary_to_json(dataio::summarize(ds));
    }
    if (report.empty()) throw Error(ErrorKind::config, "no datasets configured to ingest");
    write_json(out_dir / "ingest_summary.json", report);
    return report;
}

nlohmann::json run_stage1(const PipelineConfig& config) {
    if (!config.stage1) throw Error(ErrorKind::config, "stage1 is not configured");
    const Stage1Config& stage = *config.stage1;
    const fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir);

    PreparedStage1 prep;
    try {
        prep = prepare_stage1_dataset(stage);
    } catch (const Error& e) {
        throw Error(e.kind(), std::string("stage1: ") + e.what());
    }
    const auto& working = prep.working;

    // cross-validated benchmark over every configured model (+ stacking)
    eval::CVOptions cv_options;
    cv_options.k = stage.cv_folds;
    cv_options.seed = config.seed;
    cv_options.paper_literal = stage.paper_literal;
    cv_options.workers = config.threads;

    std::vector<eval::CVSummary> summaries;
    for (const auto& spec : stage.model_specs)
        summaries.push_back(eval::stratified_kfold_cv(working, models::to_string(spec.kind),
                                                      factory_for(spec), cv_options));
    if (stage.stacking)
        summaries.push_back(
            eval::stratified_kfold_cv(working, "stacking", stacking_factory(stage), cv_options));

    // held-out test-set evaluation of the designated model
    const auto y_all = working.target_vector();
    const auto split = pp::stratified_split(y_all, stage.test_fraction, config.seed);
    prep.report.split = split;
    auto fold = eval::prepare_fold(working, split.train, split.test, stage.paper_literal);

    const models::ClassifierSpec* test_spec = nullptr;
    for (const auto& spec : stage.model_specs)
        if (models::to_string(spec.kind) == stage.test_model) test_spec = &spec;
    if (!test_spec)
        throw Error(ErrorKind::config,
                    "test_model '" + stage.test_model + "' is not among the configured models");

    auto test_model = factory_for(*test_spec)(fold.x_train, fold.y_train,
                                              mix_seed(config.seed, 0x7e57));
    const auto test_prob = test_model->positive_proba(fold.x_eval);
    const auto cm = eval::confusion(fold.y_eval, test_prob);
    const auto test_metrics = eval::metrics(cm, fold.y_eval, test_prob);
    const auto roc = eval::roc_curve(fold.y_eval, test_prob);

    // persisted artifacts
    write_text(out_dir / "stage1_cv_summary.csv", cv_table_csv(summaries));
    {
        nlohmann::json cv_doc = nlohmann::json::array();
        for (const auto& s : summaries) cv_doc.push_back(s.to_json());
        write_json(out_dir / "stage1_cv_metrics.json", cv_doc);
    }
    {
        std::ostringstream roc_csv;
        roc_csv << "fpr,tpr,threshold\n";
        for (const auto& p : roc)
            roc_csv << g17(p.fpr) << ',' << g17(p.tpr) << ',' << g17(p.threshold) << '\n';
        write_text(out_dir / "stage1_roc.csv", roc_csv.str());
    }
    write_json(out_dir / "stage1_preprocess.json", pp::report_to_json(prep.report));

    nlohmann::json report;
    report["n_rows"] = working.n_rows;
    report["cv"] = nlohmann::json::array();
    for (const auto& s : summaries) report["cv"].push_back(s.to_json());
    report["test_set"] = {{"model", stage.test_model},
                          {"n_test", split.test.size()},
                          {"confusion", {{"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}, {"tp", cm.tp}}},
                          {"metrics", metric_set_json(test_metrics)}};

    // SHAP on the strongest tree-ensemble model, evaluated on the test split
    if (stage.shap) {
        std::vector<eval::CVSummary> tree_summaries;
        for (const auto& s : summaries) {
            try {
                if (models::is_tree_model(models::model_kind_from_string(s.model)))
                    tree_summaries.push_back(s);
            } catch (const Error&) {
            }
        }
        if (!tree_summaries.empty()) {
            const std::string strongest = explain::select_strongest_tree_model(tree_summaries);
            const auto feature_names = working.feature_names();

            std::vector<explain::ShapAttribution> attributions;
            std::vector<std::string> attribution_models;
            explain::ShapAttribution strongest_attr;
            for (const auto& spec : stage.model_specs) {
                if (!models::is_tree_model(spec.kind)) continue;
                auto model = factory_for(spec)(fold.x_train, fold.y_train,
                                               mix_seed(config.seed, 0x5a9));
                auto attr =
                    explain::tree_shap(*model, fold.x_eval, feature_names, config.threads);
                if (models::to_string(spec.kind) == strongest) strongest_attr = attr;
                attribution_models.push_back(models::to_string(spec.kind));
                attributions.push_back(std::move(attr));
            }
            const auto consensus = explain::consensus_rank(attributions);

            std::ostringstream shap_csv;
            shap_csv << "instance_id,feature,value,phi\n";
            for (std::size_t i = 0; i < strongest_attr.phi.rows(); ++i)
                for (std::size_t j = 0; j < strongest_attr.phi.cols(); ++j)
                    shap_csv << i << ',' << feature_names[j] << ',' << g17(fold.x_eval(i, j))
                             << ',' << g17(strongest_attr.phi(i, j)) << '\n';
            write_text(out_dir / "stage1_shap.csv", shap_csv.str());

            nlohmann::json shap_doc;
            shap_doc["model"] = strongest;
            shap_doc["base_value"] = strongest_attr.base_value;
            shap_doc["output_space"] =
                strongest_attr.space == models::OutputSpace::log_odds ? "log_odds" : "probability";
            const auto importance = strongest_attr.mean_abs();
            nlohmann::json mean_abs;
            for (std::size_t j = 0; j < feature_names.size(); ++j)
                mean_abs[feature_names[j]] = importance[j];
            shap_doc["mean_abs_phi"] = mean_abs;
            nlohmann::json order = nlohmann::json::array();
            for (std::size_t idx : consensus.order) order.push_back(feature_names[idx]);
            shap_doc["consensus_order"] = order;
            shap_doc["consensus_models"] = attribution_models;
            write_json(out_dir / "stage1_shap_summary.json", shap_doc);
            report["shap"] = shap_doc;
        }
    }
    return report;
}

nlohmann::json run_stage2(const PipelineConfig& config) {
    if (!config.stage1) throw Error(ErrorKind::config, "stage2 needs the stage1 dataset");
    if (!config.stage2) throw Error(ErrorKind::config, "stage2 is not configured");
    const Stage2Config& stage = *config.stage2;
    const fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir);

    // working cohort: the same encode/impute/filter chain as stage 1
    auto raw = dataio::load_csv(config.stage1->dataset.csv_path, config.stage1->dataset.schema);
    auto encoded = dataio::encode_binary(raw);
    auto [imputed, impute_report] = pp::impute_zero_median(encoded);
    dataio::TabularDataset working = std::move(imputed);
    if (config.stage1->iqr_filter) {
        auto [filtered, filter_report] = pp::iqr_filter(working);
        working = std::move(filtered);
    }

    // diabetic sub-cohort
    const auto y = working.target_vector();
    std::vector<std::size_t> positive_rows;
    for (std::size_t i = 0; i < y.size(); ++i)
        if (y[i] == 1) positive_rows.push_back(i);
    if (positive_rows.empty())
        throw Error(ErrorKind::stage, "stage2: no positive rows in the dataset");
    auto positives = working.select_rows(positive_rows);

    for (const auto& f : stage.features)
        if (!positives.column_index(f))
            throw Error(ErrorKind::config, "stage2 feature '" + f + "' not in the dataset");

    // standardize the clustering features on the sub-cohort itself
    Matrix x_raw = positives.feature_matrix(stage.features);
    const auto scaler = pp::fit_standardizer(x_raw, stage.features);
    const Matrix x = pp::apply_standardizer(scaler, x_raw, stage.features);

    cluster::SweepOptions sweep_options;
    sweep_options.k_min = stage.k_min;
    sweep_options.k_max = stage.k_max;
    sweep_options.parsimony_margin = stage.margin;
    sweep_options.kmeans.n_init = stage.n_init;
    sweep_options.kmeans.workers = config.threads;

    nlohmann::json report;
    report["n_positive"] = positive_rows.size();

    std::set<std::vector<double>> distinct;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = x.row(i);
        distinct.emplace(r.begin(), r.end());
    }
    if (distinct.size() < sweep_options.k_min) {
        // too few distinct points to sweep; profile the single cluster
        std::vector<int> labels(positives.n_rows, 0);
        auto profile = cluster::profile_clusters(positives, labels, stage.features);
        report["profiles"] = cluster::profile_to_json(profile);
        report["sweep_skipped"] = "fewer distinct points than k_min";
        write_json(out_dir / "stage2_profiles.json", report["profiles"]);
        return report;
    }
    sweep_options.k_max = std::min(sweep_options.k_max, distinct.size());

    const auto sweep = cluster::sweep_k(x, mix_seed(config.seed, 0xc1u), sweep_options);

    std::ostringstream sweep_csv;
    sweep_csv << "k,silhouette,davies_bouldin,calinski_harabasz\n";
    for (std::size_t i = 0; i < sweep.ks.size(); ++i)
        sweep_csv << sweep.ks[i] << ',' << g17(sweep.indices[i].silhouette) << ','
                  << g17(sweep.indices[i].davies_bouldin) << ','
                  << g17(sweep.indices[i].calinski_harabasz) << '\n';
    write_text(out_dir / "stage2_sweep.csv", sweep_csv.str());

    const auto& selected =
        sweep.models[sweep.selected_k - sweep.ks.front()]; // ks are consecutive
    auto profile = cluster::profile_clusters(positives, selected.labels, stage.features);

    report["sweep"] = cluster::sweep_to_json(sweep);
    report["selected_k"] = sweep.selected_k;
    report["profiles"] = cluster::profile_to_json(profile);
    write_json(out_dir / "stage2_profiles.json", report["profiles"]);
    return report;
}

nlohmann::json run_stage3(const PipelineConfig& config) {
    if (!config.stage3) throw Error(ErrorKind::config, "stage3 is not configured");
    const Stage3Config& stage = *config.stage3;
    const fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir);

    auto ds = dataio::load_csv(stage.dataset.csv_path, stage.dataset.schema);

    const auto& group_col = ds.column(stage.group_column);
    if (group_col.numeric_storage())
        throw Error(ErrorKind::config, "group column must be categorical_group");

    auto complete_pair = [&](const std::string& a, const std::string& b) {
        const auto& ca = ds.column(a);
        const auto& cb = ds.column(b);
        std::pair<std::vector<double>, std::vector<double>> out;
        for (std::size_t i = 0; i < ds.n_rows; ++i) {
            if (std::isnan(ca.values[i]) || std::isnan(cb.values[i])) continue;
            out.first.push_back(ca.values[i]);
            out.second.push_back(cb.values[i]);
        }
        return out;
    };

    nlohmann::json report;
    std::vector<stats::HypothesisResult> rows;
    std::vector<std::string> hypothesis_ids;

    // normality screen (reported, not part of the Holm family)
    nlohmann::json screen = nlohmann::json::array();
    for (const auto& name : stage.normality_screen) {
        const auto& col = ds.column(name);
        std::vector<double> values;
        for (double v : col.values)
            if (!std::isnan(v)) values.push_back(v);
        auto res = stats::shapiro_wilk(values, stage.alpha);
        screen.push_back({{"column", name},
                          {"W", res.statistic},
                          {"p_value", res.p_value},
                          {"normal_rejected", res.reject}});
    }
    report["normality_screen"] = screen;

    // H1: Kruskal-Wallis of the metabolic index across the cognitive groups
    {
        std::map<std::string, std::vector<double>> groups;
        const auto& values = ds.column(stage.kruskal_value_column);
        for (std::size_t i = 0; i < ds.n_rows; ++i) {
            if (std::isnan(values.values[i])) continue;
            const std::string& label = group_col.text[i];
            if (label.empty()) continue;
            groups[label].push_back(values.values[i]);
        }
        if (groups.size() < 2)
            throw Error(ErrorKind::stage, "stage3: need at least two groups with data");
        std::vector<std::vector<double>> group_values;
        std::vector<std::string> group_names;
        for (auto& [name, vals] : groups) {
            group_names.push_back(name);
            group_values.push_back(std::move(vals));
        }
        auto res = stats::kruskal_wallis(group_values, stage.tie_correction, stage.alpha);
        std::ostringstream vars;
        vars << stage.kruskal_value_column << " ~ " << stage.group_column;
        res.variables = vars.str();
        rows.push_back(res);
        hypothesis_ids.push_back("H1");
        report["groups"] = group_names;
    }

    // H2...: Spearman pairs; Holm across the pair family
    std::vector<double> family_p;
    std::vector<std::size_t> family_rows;
    for (std::size_t k = 0; k < stage.spearman_pairs.size(); ++k) {
        const auto& [a, b] = stage.spearman_pairs[k];
        auto [xa, xb] = complete_pair(a, b);
        auto corr = stats::spearman(xa, xb);
        stats::HypothesisResult res;
        res.test = "spearman";
        res.variables = a + " x " + b;
        res.statistic = corr.rho;
        res.df = static_cast<double>(corr.n - 2);
        res.p_value = corr.p_value;
        res.alpha = stage.alpha;
        family_p.push_back(corr.p_value);
        family_rows.push_back(rows.size());
        rows.push_back(res);
        hypothesis_ids.push_back("H" + std::to_string(k + 2));
    }
    if (!family_p.empty()) {
        const auto holm = stats::holm_correct(family_p);
        for (std::size_t k = 0; k < family_rows.size(); ++k) {
            auto& row = rows[family_rows[k]];
            row.adjusted_p = holm.adjusted[k];
            row.reject = row.adjusted_p < row.alpha;
        }
    }

    std::ostringstream csv;
    csv << "hypothesis,test,variables,statistic,p_value,adjusted_p,decision\n";
    nlohmann::json tests = nlohmann::json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto& r = rows[i];
        csv << hypothesis_ids[i] << ',' << r.test << ',' << '"' << r.variables << '"' << ','
            << g17(r.statistic) << ',' << g17(r.p_value) << ','
            << (r.adjusted_p >= 0.0 ? g17(r.adjusted_p) : "") << ','
            << (r.reject ? "reject" : "fail_to_reject") << '\n';
        tests.push_back({{"hypothesis", hypothesis_ids[i]},
                         {"test", r.test},
                         {"variables", r.variables},
                         {"statistic", r.statistic},
                         {"df", r.df},
                         {"p_value", r.p_value},
                         {"adjusted_p", r.adjusted_p},
                         {"alpha", r.alpha},
                         {"decision", r.reject ? "reject" : "fail_to_reject"}});
    }
    write_text(out_dir / "stage3_tests.csv", csv.str());
    report["tests"] = tests;
    return report;
}

nlohmann::json RunReport::to_json() const {
    nlohmann::json doc;
    doc["version"] = version;
    doc["config"] = config_echo;
    if (!stage1.is_null()) doc["stage1"] = stage1;
    if (!stage2.is_null()) doc["stage2"] = stage2;
    if (!stage3.is_null()) doc["stage3"] = stage3;
    doc["timings"] = nlohmann::json::array();
    for (const auto& t : timings)
        doc["timings"].push_back({{"stage", t.stage}, {"seconds", t.seconds}});
    return doc;
}

RunReport run_all(const PipelineConfig& config) {
    RunReport report;
    report.version = kVersion;
    report.config_echo = config.to_json();

    auto timed = [&](const std::string& name, auto&& fn) {
        const auto start = std::chrono::steady_clock::now();
        auto result = fn();
        const auto stop = std::chrono::steady_clock::now();
        report.timings.push_back(
            {name, std::chrono::duration<double>(stop - start).count()});
        return result;
    };

    if (config.stage1) report.stage1 = timed("stage1", [&] { return run_stage1(config); });
    if (config.stage2) report.stage2 = timed("stage2", [&] { return run_stage2(config); });
    if (config.stage3) report.stage3 = timed("stage3", [&] { return run_stage3(config); });

    const fs::path out_dir(config.output_dir);
    fs::create_directories(out_dir);
    write_json(out_dir / "run_report.json", report.to_json());
    return report;
}

std::string render_report(const nlohmann::json& report) {
    std::ostringstream out;
    out << "tabml run report (toolkit " << report.value("version", "?") << ")\n";
    if (report.contains("stage1")) {
        const auto& s1 = report["stage1"];
        out << "\n== stage 1: supervised benchmark ==\n";
        out << "rows after preprocessing: " << s1.value("n_rows", 0) << "\n";
        if (s1.contains("cv")) {
            out << "model                accuracy  bal_acc   precision recall    f1        roc_auc\n";
            for (const auto& m : s1["cv"]) {
                char line[256];
                std::snprintf(line, sizeof(line),
                              "%-20s %.3f±%.3f %.3f±%.3f %.3f±%.3f %.3f±%.3f %.3f±%.3f %.3f±%.3f",
                              m["model"].get<std::string>().c_str(),
                              m["mean"]["accuracy"].get<double>(), m["std"]["accuracy"].get<double>(),
                              m["mean"]["balanced_accuracy"].get<double>(),
                              m["std"]["balanced_accuracy"].get<double>(),
                              m["mean"]["precision"].get<double>(), m["std"]["precision"].get<double>(),
                              m["mean"]["recall"].get<double>(), m["std"]["recall"].get<double>(),
                              m["mean"]["f1"].get<double>(), m["std"]["f1"].get<double>(),
                              m["mean"]["roc_auc"].get<double>(), m["std"]["roc_auc"].get<double>());
                out << line << "\n";
            }
        }
        if (s1.contains("test_set")) {
            const auto& t = s1["test_set"];
            out << "test set (" << t["model"].get<std::string>() << ", n=" << t["n_test"].get<std::size_t>()
                << "): accuracy " << f3(t["metrics"]["accuracy"].get<double>()) << ", recall "
                << f3(t["metrics"]["recall"].get<double>()) << ", roc_auc "
                << f3(t["metrics"]["roc_auc"].get<double>()) << "\n";
            const auto& cm = t["confusion"];
            out << "confusion: tn=" << cm["tn"].get<std::size_t>() << " fp=" << cm["fp"].get<std::size_t>()
                << " fn=" << cm["fn"].get<std::size_t>() << " tp=" << cm["tp"].get<std::size_t>() << "\n";
        }
        if (s1.contains("shap")) {
            out << "shap (" << s1["shap"]["model"].get<std::string>() << ") consensus order:";
            for (const auto& f : s1["shap"]["consensus_order"]) out << ' ' << f.get<std::string>();
            out << "\n";
        }
    }
    if (report.contains("stage2")) {
        const auto& s2 = report["stage2"];
        out << "\n== stage 2: subtype clustering ==\n";
        if (s2.contains("selected_k")) out << "selected k: " << s2["selected_k"].get<std::size_t>() << "\n";
        if (s2.contains("sweep") && s2["sweep"].contains("rationale"))
            out << s2["sweep"]["rationale"].get<std::string>() << "\n";
        if (s2.contains("profiles")) out << "note: " << s2["profiles"].value("note", "") << "\n";
    }
    if (report.contains("stage3")) {
        out << "\n== stage 3: hypothesis tests ==\n";
        for (const auto& t : report["stage3"]["tests"]) {
            out << t["hypothesis"].get<std::string>() << " " << t["test"].get<std::string>() << " ["
                << t["variables"].get<std::string>() << "]: statistic "
                << f3(t["statistic"].get<double>()) << ", p " << g17(t["p_value"].get<double>());
            if (t["adjusted_p"].get<double>() >= 0.0)
                out << ", holm p " << g17(t["adjusted_p"].get<double>());
            out << " -> " << t["decision"].get<std::string>() << "\n";
        }
    }
    if (report.contains("timings")) {
        out << "\ntimings:";
        for (const auto& t : report["timings"])
            out << ' ' << t["stage"].get<std::string>() << '=' << f3(t["seconds"].get<double>()) << 's';
        out << "\n";
    }
    return out.str();
}

} // namespace tabml::pipeline

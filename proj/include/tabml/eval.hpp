#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabml/common.hpp"
#include "tabml/dataio.hpp"
#include "tabml/models.hpp"

namespace tabml::eval {

struct ConfusionMatrix {
    std::size_t tn = 0, fp = 0, fn = 0, tp = 0;
    std::size_t total() const { return tn + fp + fn + tp; }
};

struct MetricSet {
    double accuracy = 0.0;
    double balanced_accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double specificity = 0.0;
    double roc_auc = 0.0;
    bool precision_degenerate = false; // tp + fp == 0

    static const std::vector<std::string>& metric_names(); // the six reported columns
    double by_name(const std::string& name) const;
};

// Counts at the fixed probability threshold 0.5 (p > 0.5 predicts class 1).
ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<double>& prob);
ConfusionMatrix confusion_from_predictions(const std::vector<int>& y_true,
                                           const std::vector<int>& y_pred);

// Count metrics from the confusion matrix plus ROC-AUC from the scores.
MetricSet metrics(const ConfusionMatrix& cm, const std::vector<int>& y_true,
                  const std::vector<double>& scores);

struct RocPoint {
    double fpr = 0.0, tpr = 0.0, threshold = 0.0;
};

// Tie-aware ROC step curve, thresholds descending, starting at (0,0,+inf).
std::vector<RocPoint> roc_curve(const std::vector<int>& y_true, const std::vector<double>& scores);

// Trapezoidal AUC over the tie-aware curve; equals the Mann-Whitney statistic
// with ties counted 1/2.
double roc_auc(const std::vector<int>& y_true, const std::vector<double>& scores);

// ---------------------------------------------------------------------------
// Cross-validation
// ---------------------------------------------------------------------------

// Fits on a standardized training matrix; must be deterministic in its inputs.
using ModelFactory = std::function<std::unique_ptr<models::Classifier>(
    const Matrix& x_train, const std::vector<int>& y_train, std::uint64_t seed)>;

struct CVSummary {
    std::string model;
    std::vector<MetricSet> folds;
    MetricSet mean;
    MetricSet stddev; // sample (n-1) standard deviation

    nlohmann::json to_json() const;
};

CVSummary summarize_folds(const std::string& model, const std::vector<MetricSet>& folds);

struct CVOptions {
    std::size_t k = 5;
    std::uint64_t seed = 0;
    bool paper_literal = false; // true: per-fold preprocessing reuses global fits
    std::size_t workers = 0;    // 0: library default
};

// Stratified k-fold CV over a dataset that is encoded and row-filtered but not
// yet imputed/standardized. In the default fold-local mode the imputation
// medians and the standardizer are re-fit on each fold's training portion;
// the paper-literal mode fits them once on the full dataset.
CVSummary stratified_kfold_cv(const dataio::TabularDataset& ds, const std::string& model_name,
                              const ModelFactory& factory, const CVOptions& options);

// Fold-ready design matrices for one train/eval split under the same
// preprocessing policy as the CV harness (shared by stacking and stage 1).
struct FoldData {
    Matrix x_train;
    Matrix x_eval;
    std::vector<int> y_train;
    std::vector<int> y_eval;
};

FoldData prepare_fold(const dataio::TabularDataset& ds, const std::vector<std::size_t>& train_rows,
                      const std::vector<std::size_t>& eval_rows, bool paper_literal);

} // namespace tabml::eval

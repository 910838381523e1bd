#include "tabml/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tabml/preprocess.hpp"

namespace tabml::eval {

const std::vector<std::string>& MetricSet::metric_names() {
    static const std::vector<std::string> names = {
        "accuracy", "balanced_accuracy", "precision", "recall", "f1", "roc_auc"};
    return names;
}

double MetricSet::by_name(const std::string& name) const {
    if (name == "accuracy") return accuracy;
    if (name == "balanced_accuracy") return balanced_accuracy;
    if (name == "precision") return precision;
    if (name == "recall") return recall;
    if (name == "f1") return f1;
    if (name == "specificity") return specificity;
    if (name == "roc_auc") return roc_auc;
    throw Error(ErrorKind::contract, "unknown metric '" + name + "'");
}

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<double>& prob) {
    if (y_true.size() != prob.size())
        throw Error(ErrorKind::contract, "confusion: label/probability length mismatch");
    std::vector<int> pred(prob.size());
    for (std::size_t i = 0; i < prob.size(); ++i) pred[i] = prob[i] > 0.5 ? 1 : 0;
    return confusion_from_predictions(y_true, pred);
}

ConfusionMatrix confusion_from_predictions(const std::vector<int>& y_true,
                                           const std::vector<int>& y_pred) {
    if (y_true.size() != y_pred.size())
        throw Error(ErrorKind::contract, "confusion: label/prediction length mismatch");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < y_true.size(); ++i) {
        if (y_true[i] != 0 && y_true[i] != 1)
            throw Error(ErrorKind::contract, "labels must be in {0,1}");
        if (y_true[i]) (y_pred[i] ? cm.tp : cm.fn)++;
        else (y_pred[i] ? cm.fp : cm.tn)++;
    }
    return cm;
}

MetricSet metrics(const ConfusionMatrix& cm, const std::vector<int>& y_true,
                  const std::vector<double>& scores) {
    MetricSet m;
    const double tp = static_cast<double>(cm.tp), tn = static_cast<double>(cm.tn);
    const double fp = static_cast<double>(cm.fp), fn = static_cast<double>(cm.fn);
    const double total = tp + tn + fp + fn;
    m.accuracy = total > 0 ? (tp + tn) / total : 0.0;
    if (cm.tp + cm.fp == 0) {
        m.precision = 0.0;
        m.precision_degenerate = true;
    } else {
        m.precision = tp / (tp + fp);
    }
    m.recall = cm.tp + cm.fn > 0 ? tp / (tp + fn) : 0.0;
    m.specificity = cm.tn + cm.fp > 0 ? tn / (tn + fp) : 0.0;
    m.balanced_accuracy = (m.recall + m.specificity) / 2.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    if (!scores.empty()) m.roc_auc = roc_auc(y_true, scores);
    return m;
}

namespace {

// Tie groups of (score desc) with positive/negative counts.
struct ScoreGroups {
    std::vector<double> thresholds;
    std::vector<std::size_t> pos, neg;
    std::size_t total_pos = 0, total_neg = 0;
};

ScoreGroups group_scores(const std::vector<int>& y_true, const std::vector<double>& scores) {
    if (y_true.size() != scores.size())
        throw Error(ErrorKind::contract, "roc: label/score length mismatch");
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    ScoreGroups g;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        std::size_t pos = 0, neg = 0;
        while (j < order.size() && scores[order[j]] == scores[order[i]]) {
            if (y_true[order[j]]) ++pos;
            else ++neg;
            ++j;
        }
        g.thresholds.push_back(scores[order[i]]);
        g.pos.push_back(pos);
        g.neg.push_back(neg);
        g.total_pos += pos;
        g.total_neg += neg;
        i = j;
    }
    if (g.total_pos == 0 || g.total_neg == 0)
        throw Error(ErrorKind::data, "ROC undefined: only one class present");
    return g;
}

} // namespace

std::vector<RocPoint> roc_curve(const std::vector<int>& y_true, const std::vector<double>& scores) {
    const auto g = group_scores(y_true, scores);
    std::vector<RocPoint> curve;
    curve.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
    std::size_t tp = 0, fp = 0;
    for (std::size_t k = 0; k < g.thresholds.size(); ++k) {
        tp += g.pos[k];
        fp += g.neg[k];
        curve.push_back({static_cast<double>(fp) / static_cast<double>(g.total_neg),
                         static_cast<double>(tp) / static_cast<double>(g.total_pos),
                         g.thresholds[k]});
    }
    return curve;
}

double roc_auc(const std::vector<int>& y_true, const std::vector<double>& scores) {
    const auto curve = roc_curve(y_true, scores);
    double auc = 0.0;
    for (std::size_t k = 1; k < curve.size(); ++k)
        auc += (curve[k].fpr - curve[k - 1].fpr) * (curve[k].tpr + curve[k - 1].tpr) / 2.0;
    return auc;
}

// ---------------------------------------------------------------------------
// Cross-validation harness
// ---------------------------------------------------------------------------

namespace {

MetricSet mean_of(const std::vector<MetricSet>& folds) {
    MetricSet m;
    const double k = static_cast<double>(folds.size());
    for (const auto& f : folds) {
        m.accuracy += f.accuracy;
        m.balanced_accuracy += f.balanced_accuracy;
        m.precision += f.precision;
        m.recall += f.recall;
        m.f1 += f.f1;
        m.specificity += f.specificity;
        m.roc_auc += f.roc_auc;
    }
    m.accuracy /= k;
    m.balanced_accuracy /= k;
    m.precision /= k;
    m.recall /= k;
    m.f1 /= k;
    m.specificity /= k;
    m.roc_auc /= k;
    return m;
}

MetricSet stddev_of(const std::vector<MetricSet>& folds, const MetricSet& mean) {
    MetricSet sd;
    if (folds.size() < 2) return sd;
    const double denom = static_cast<double>(folds.size() - 1);
    auto accum = [&](double MetricSet::* field) {
        double ss = 0.0;
        for (const auto& f : folds) {
            const double d = f.*field - mean.*field;
            ss += d * d;
        }
        return std::sqrt(ss / denom);
    };
    sd.accuracy = accum(&MetricSet::accuracy);
    sd.balanced_accuracy = accum(&MetricSet::balanced_accuracy);
    sd.precision = accum(&MetricSet::precision);
    sd.recall = accum(&MetricSet::recall);
    sd.f1 = accum(&MetricSet::f1);
    sd.specificity = accum(&MetricSet::specificity);
    sd.roc_auc = accum(&MetricSet::roc_auc);
    return sd;
}

} // namespace

CVSummary summarize_folds(const std::string& model, const std::vector<MetricSet>& folds) {
    if (folds.empty()) throw Error(ErrorKind::contract, "no folds to summarize");
    CVSummary s;
    s.model = model;
    s.folds = folds;
    s.mean = mean_of(folds);
    s.stddev = stddev_of(folds, s.mean);
    return s;
}

nlohmann::json CVSummary::to_json() const {
    auto metric_json = [](const MetricSet& m) {
        return nlohmann::json{{"accuracy", m.accuracy},
                              {"balanced_accuracy", m.balanced_accuracy},
                              {"precision", m.precision},
                              {"recall", m.recall},
                              {"f1", m.f1},
                              {"specificity", m.specificity},
                              {"roc_auc", m.roc_auc}};
    };
    nlohmann::json doc;
    doc["model"] = model;
    doc["folds"] = nlohmann::json::array();
    for (const auto& f : folds) doc["folds"].push_back(metric_json(f));
    doc["mean"] = metric_json(mean);
    doc["std"] = metric_json(stddev);
    return doc;
}

FoldData prepare_fold(const dataio::TabularDataset& ds, const std::vector<std::size_t>& train_rows,
                      const std::vector<std::size_t>& eval_rows, bool paper_literal) {
    namespace pp = tabml::preprocess;

    // Impute: medians from the training rows in fold-local mode, from all rows
    // in paper-literal mode; always applied to the full dataset.
    auto [imputed, impute_report] =
        paper_literal ? pp::impute_zero_median(ds) : pp::impute_zero_median_fit_on(ds, train_rows);

    const auto feature_names = imputed.feature_names();
    Matrix x_all = imputed.feature_matrix(feature_names);

    // Standardize numeric features only; encoded binary indicators stay {0,1}.
    std::vector<std::string> numeric_features;
    for (const auto& c : imputed.columns)
        if (c.schema.role == dataio::ColumnRole::feature &&
            c.schema.kind == dataio::ColumnKind::numeric)
            numeric_features.push_back(c.schema.name);

    if (!numeric_features.empty()) {
        Matrix numeric = imputed.feature_matrix(numeric_features);
        pp::StandardizationParams params;
        if (paper_literal) {
            params = pp::fit_standardizer(numeric, numeric_features);
        } else {
            params = pp::fit_standardizer_on(numeric, numeric_features, train_rows);
        }
        Matrix scaled = pp::apply_standardizer(params, numeric, numeric_features);
        for (std::size_t j = 0; j < numeric_features.size(); ++j) {
            const std::size_t col = static_cast<std::size_t>(
                std::find(feature_names.begin(), feature_names.end(), numeric_features[j]) -
                feature_names.begin());
            for (std::size_t i = 0; i < x_all.rows(); ++i) x_all(i, col) = scaled(i, j);
        }
    }

    const auto y = imputed.target_vector();
    FoldData fold;
    fold.x_train = x_all.select_rows(train_rows);
    fold.x_eval = x_all.select_rows(eval_rows);
    for (std::size_t i : train_rows) fold.y_train.push_back(y[i]);
    for (std::size_t i : eval_rows) fold.y_eval.push_back(y[i]);
    return fold;
}

CVSummary stratified_kfold_cv(const dataio::TabularDataset& ds, const std::string& model_name,
                              const ModelFactory& factory, const CVOptions& options) {
    const auto y = ds.target_vector();
    const auto fold_of = preprocess::stratified_folds(y, options.k, options.seed);

    std::vector<MetricSet> fold_metrics(options.k);
    parallel_for(options.k, worker_count(options.workers), [&](std::size_t f) {
        std::vector<std::size_t> train_rows, eval_rows;
        for (std::size_t i = 0; i < y.size(); ++i)
            (fold_of[i] == static_cast<int>(f) ? eval_rows : train_rows).push_back(i);

        FoldData fold = prepare_fold(ds, train_rows, eval_rows, options.paper_literal);
        auto model = factory(fold.x_train, fold.y_train, mix_seed(options.seed, f));
        const auto prob = model->positive_proba(fold.x_eval);
        const auto cm = confusion(fold.y_eval, prob);
        fold_metrics[f] = metrics(cm, fold.y_eval, prob);
    });

    return summarize_folds(model_name, fold_metrics);
}

} // namespace tabml::eval

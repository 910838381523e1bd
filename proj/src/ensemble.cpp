#include "tabml/ensemble.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "tabml/preprocess.hpp"

namespace tabml::ensemble {

using models::Classifier;
using models::ClassifierSpec;

Matrix make_meta_features(const Matrix& x, const std::vector<int>& y,
                          const std::vector<ClassifierSpec>& base_specs,
                          const std::vector<int>& fold_of, bool in_fold, std::uint64_t seed,
                          std::size_t workers) {
    const std::size_t n = x.rows();
    const std::size_t n_bases = base_specs.size();
    const int n_folds = *std::max_element(fold_of.begin(), fold_of.end()) + 1;

    Matrix meta(n, n_bases);
    // one task per (fold, base) pair; every write lands in a distinct slot
    const std::size_t tasks = static_cast<std::size_t>(n_folds) * n_bases;
    parallel_for(tasks, worker_count(workers), [&](std::size_t task) {
        const std::size_t f = task / n_bases;
        const std::size_t b = task % n_bases;

        std::vector<std::size_t> train_idx, hold_idx;
        for (std::size_t i = 0; i < n; ++i)
            (fold_of[i] == static_cast<int>(f) ? hold_idx : train_idx).push_back(i);
        if (in_fold) train_idx.insert(train_idx.end(), hold_idx.begin(), hold_idx.end());

        Matrix x_train = x.select_rows(train_idx);
        std::vector<int> y_train;
        y_train.reserve(train_idx.size());
        for (std::size_t i : train_idx) y_train.push_back(y[i]);

        ClassifierSpec spec = base_specs[b];
        spec.seed = mix_seed(seed, task);
        auto model = models::fit_classifier(spec, x_train, y_train);

        const auto prob = model->positive_proba(x.select_rows(hold_idx));
        for (std::size_t t = 0; t < hold_idx.size(); ++t) meta(hold_idx[t], b) = prob[t];
    });
    return meta;
}

StackingModel fit_stacking(const Matrix& x, const std::vector<int>& y,
                           const StackingConfig& config, std::uint64_t seed) {
    if (config.base_specs.empty())
        throw Error(ErrorKind::config, "stacking needs at least one base model");
    if (config.n_folds < 2) throw Error(ErrorKind::config, "stacking needs n_folds >= 2");

    StackingModel model;
    model.seed = seed;
    model.base_specs = config.base_specs;
    model.fold_of = preprocess::stratified_folds(y, config.n_folds, mix_seed(seed, 0x57ac));
    model.meta_features = make_meta_features(x, y, config.base_specs, model.fold_of,
                                             /*in_fold=*/false, seed, config.workers);

    // balanced logistic regression on the out-of-fold probabilities
    ClassifierSpec meta_spec = ClassifierSpec::defaults(models::ModelKind::logreg);
    meta_spec.balanced = true;
    meta_spec.seed = mix_seed(seed, 0xe7a);
    model.meta = models::fit_classifier(meta_spec, model.meta_features, y);

    // base models refit on the full training data for inference
    model.base_models.resize(config.base_specs.size());
    parallel_for(config.base_specs.size(), worker_count(config.workers), [&](std::size_t b) {
        ClassifierSpec spec = config.base_specs[b];
        spec.seed = mix_seed(seed, 0xbeef00 + b);
        model.base_models[b] = models::fit_classifier(spec, x, y);
    });
    return model;
}

std::vector<double> StackingModel::positive_proba(const Matrix& x) const {
    if (base_models.empty() || !meta)
        throw Error(ErrorKind::contract, "stacking model is not fitted");
    Matrix base_probs(x.rows(), base_models.size());
    for (std::size_t b = 0; b < base_models.size(); ++b) {
        const auto prob = base_models[b]->positive_proba(x);
        for (std::size_t i = 0; i < x.rows(); ++i) base_probs(i, b) = prob[i];
    }
    return meta->positive_proba(base_probs);
}

std::vector<double> StackingModel::decision_score(const Matrix& x) const {
    return positive_proba(x);
}

std::vector<double> predict_stacking(const StackingModel& model, const Matrix& x) {
    return model.positive_proba(x);
}

nlohmann::json StackingModel::to_json() const {
    nlohmann::json doc;
    doc["model"] = "stacking";
    doc["format_version"] = 1;
    doc["seed"] = seed;
    doc["fold_of"] = fold_of;
    doc["bases"] = nlohmann::json::array();
    for (std::size_t b = 0; b < base_models.size(); ++b) {
        doc["bases"].push_back(
            {{"spec", base_specs[b].to_json()}, {"fitted", base_models[b]->to_json()}});
    }
    doc["meta"] = meta->to_json();
    return doc;
}

} // namespace tabml::ensemble

#include <cmath>
#include <numeric>

#include "models_impl.hpp"

namespace tabml::models {

namespace {

std::vector<double> ensemble_mean(const std::vector<Tree>& trees, const Matrix& x) {
    std::vector<double> out(x.rows(), 0.0);
    for (const auto& tree : trees)
        for (std::size_t i = 0; i < x.rows(); ++i) out[i] += tree.predict(x.row(i));
    const double inv = 1.0 / static_cast<double>(trees.size());
    for (double& v : out) v *= inv;
    return out;
}

std::unique_ptr<Classifier> fit_bagging(const ClassifierSpec& spec, const Matrix& x,
                                        const std::vector<int>& y, bool bootstrap, SplitMode mode) {
    const std::size_t n = x.rows();
    {
        std::size_t pos = 0;
        for (int v : y) pos += static_cast<std::size_t>(v);
        if (pos == 0 || pos == n)
            throw Error(ErrorKind::data, "tree ensembles need both classes present");
    }
    std::vector<double> target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = static_cast<double>(y[i]);

    CartConfig config;
    config.mode = mode;
    config.criterion = SplitCriterion::gini;
    config.max_depth = spec.max_depth;
    config.max_features =
        std::max(1, static_cast<int>(std::floor(std::sqrt(static_cast<double>(x.cols())))));

    auto model = std::make_unique<ForestModel>();
    model->kind = bootstrap ? ModelKind::random_forest : ModelKind::extra_trees;
    model->feature_count = x.cols();
    model->seed = spec.seed;
    model->trees.resize(spec.n_trees);

    const Rng base(spec.seed);
    // Per-tree streams keyed by tree index: tree results are independent of
    // scheduling, so any worker count yields identical forests.
    parallel_for(static_cast<std::size_t>(spec.n_trees), worker_count(),
                 [&](std::size_t t) {
                     Rng rng = base.derive(t);
                     std::vector<std::size_t> samples(n);
                     if (bootstrap) {
                         for (auto& s : samples) s = static_cast<std::size_t>(rng.below(n));
                     } else {
                         std::iota(samples.begin(), samples.end(), 0);
                     }
                     model->trees[t] = fit_cart(x, target, samples, config, rng);
                 });
    model->refresh_view();
    return model;
}

} // namespace

std::vector<double> ForestModel::positive_proba(const Matrix& x) const {
    check_width(x);
    return ensemble_mean(trees, x);
}

std::vector<double> ForestModel::decision_score(const Matrix& x) const {
    return positive_proba(x);
}

std::unique_ptr<Classifier> fit_random_forest(const ClassifierSpec& spec, const Matrix& x,
                                              const std::vector<int>& y) {
    return fit_bagging(spec, x, y, /*bootstrap=*/true, SplitMode::best);
}

std::unique_ptr<Classifier> fit_extra_trees(const ClassifierSpec& spec, const Matrix& x,
                                            const std::vector<int>& y) {
    return fit_bagging(spec, x, y, /*bootstrap=*/false, SplitMode::random);
}

// ---------------------------------------------------------------------------
// Gradient boosting on logistic deviance
// ---------------------------------------------------------------------------

std::vector<double> GbmModel::decision_score(const Matrix& x) const {
    check_width(x);
    std::vector<double> score(x.rows(), base_score);
    for (const auto& tree : trees)
        for (std::size_t i = 0; i < x.rows(); ++i)
            score[i] += learning_rate * tree.predict(x.row(i));
    return score;
}

std::vector<double> GbmModel::positive_proba(const Matrix& x) const {
    auto score = decision_score(x);
    for (double& v : score) v = sigmoid(v);
    return score;
}

std::unique_ptr<Classifier> fit_gradient_boosting(const ClassifierSpec& spec, const Matrix& x,
                                                  const std::vector<int>& y) {
    const std::size_t n = x.rows();
    std::size_t pos = 0;
    for (int v : y) pos += static_cast<std::size_t>(v);
    if (pos == 0 || pos == n)
        throw Error(ErrorKind::data, "gradient boosting needs both classes present");

    auto model = std::make_unique<GbmModel>();
    model->feature_count = x.cols();
    model->learning_rate = spec.learning_rate;
    model->seed = spec.seed;
    const double base_rate = static_cast<double>(pos) / static_cast<double>(n);
    model->base_score = std::log(base_rate / (1.0 - base_rate));

    CartConfig config;
    config.mode = SplitMode::best;
    config.criterion = SplitCriterion::variance;
    config.max_depth = spec.max_depth;
    config.max_features = -1;

    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);
    std::vector<double> score(n, model->base_score);
    std::vector<double> residual(n), hessian(n);
    const Rng base(spec.seed);

    model->trees.reserve(spec.n_trees);
    for (int m = 0; m < spec.n_trees; ++m) {
        double deviance = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = sigmoid(score[i]);
            residual[i] = static_cast<double>(y[i]) - p; // negative gradient
            hessian[i] = p * (1.0 - p);
            deviance += y[i] ? -std::log(std::max(p, 1e-300))
                             : -std::log(std::max(1.0 - p, 1e-300));
        }
        model->training_deviance.push_back(deviance / static_cast<double>(n));

        Rng rng = base.derive(static_cast<std::size_t>(m));
        Tree tree = fit_cart(x, residual, all, config, rng, &hessian);
        for (std::size_t i = 0; i < n; ++i)
            score[i] += spec.learning_rate * tree.predict(x.row(i));
        model->trees.push_back(std::move(tree));
    }
    // final deviance after the last stage
    double deviance = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double p = sigmoid(score[i]);
        deviance += y[i] ? -std::log(std::max(p, 1e-300)) : -std::log(std::max(1.0 - p, 1e-300));
    }
    model->training_deviance.push_back(deviance / static_cast<double>(n));

    model->refresh_view();
    return model;
}

} // namespace tabml::models

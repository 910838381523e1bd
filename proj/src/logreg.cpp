#include <cmath>

#include "models_impl.hpp"

namespace tabml::models {

namespace {

double log1pexp(double z) {
    if (z > 0.0) return z + std::log1p(std::exp(-z));
    return std::log1p(std::exp(z));
}

} // namespace

std::vector<double> LogRegModel::decision_score(const Matrix& x) const {
    check_width(x);
    std::vector<double> z(x.rows(), bias);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto row = x.row(i);
        for (std::size_t j = 0; j < weights.size(); ++j) z[i] += weights[j] * row[j];
    }
    return z;
}

std::vector<double> LogRegModel::positive_proba(const Matrix& x) const {
    auto z = decision_score(x);
    for (double& v : z) v = sigmoid(v);
    return z;
}

// Weighted maximum-likelihood fit (no penalty): full-batch gradient descent
// with Armijo backtracking on the mean weighted deviance.
std::unique_ptr<Classifier> fit_logreg(const ClassifierSpec& spec, const Matrix& x,
                                       const std::vector<int>& y) {
    const std::size_t n = x.rows(), p = x.cols();
    const auto weights = class_weights(y, spec.balanced); // throws on single-class y
    const double weight_total = [&] {
        double s = 0.0;
        for (double w : weights) s += w;
        return s;
    }();

    std::vector<double> theta(p + 1, 0.0); // [w..., b]
    std::vector<double> z(n), grad(p + 1);

    auto eval_scores = [&](const std::vector<double>& th) {
        for (std::size_t i = 0; i < n; ++i) {
            double v = th[p];
            auto row = x.row(i);
            for (std::size_t j = 0; j < p; ++j) v += th[j] * row[j];
            z[i] = v;
        }
    };
    auto loss_at = [&](const std::vector<double>& th) {
        eval_scores(th);
        double loss = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            loss += weights[i] * (log1pexp(z[i]) - static_cast<double>(y[i]) * z[i]);
        return loss / weight_total;
    };

    double loss = loss_at(theta);
    double step = 1.0;
    int iter = 0;
    bool converged = false;
    for (; iter < spec.max_iter; ++iter) {
        // gradient at theta (z already holds the scores from the last loss eval)
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double r = weights[i] * (sigmoid(z[i]) - static_cast<double>(y[i]));
            auto row = x.row(i);
            for (std::size_t j = 0; j < p; ++j) grad[j] += r * row[j];
            grad[p] += r;
        }
        double grad_max = 0.0, grad_sq = 0.0;
        for (double& g : grad) {
            g /= weight_total;
            grad_max = std::max(grad_max, std::fabs(g));
            grad_sq += g * g;
        }
        if (grad_max < spec.grad_tol) {
            converged = true;
            break;
        }

        step = std::min(step * 2.0, 1e6);
        std::vector<double> trial(p + 1);
        bool advanced = false;
        while (step > 1e-16) {
            for (std::size_t j = 0; j <= p; ++j) trial[j] = theta[j] - step * grad[j];
            const double trial_loss = loss_at(trial);
            if (trial_loss <= loss - 1e-4 * step * grad_sq) {
                theta = trial;
                loss = trial_loss;
                advanced = true;
                break;
            }
            step *= 0.5;
        }
        if (!advanced) break; // at numerical floor
        eval_scores(theta);   // refresh scores for the next gradient
    }

    auto model = std::make_unique<LogRegModel>();
    model->weights.assign(theta.begin(), theta.begin() + p);
    model->bias = theta[p];
    model->iterations = iter;
    model->converged = converged;
    model->seed = spec.seed;
    return model;
}

} // namespace tabml::models

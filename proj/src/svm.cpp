#include <cmath>
#include <limits>
#include <numeric>

#include "models_impl.hpp"
#include "tabml/preprocess.hpp"

namespace tabml::models {

namespace {

// Soft-margin SVM dual solved by SMO with maximal-violating-pair selection:
//   min 0.5 a'Qa - e'a   s.t. 0 <= a_i <= C, y'a = 0,   Q_ij = y_i y_j K(x_i, x_j)
// Gradient G_i = (Qa)_i - 1. The pair (i from I_up maximizing -y_i G_i,
// j from I_low minimizing -y_j G_j) is optimized analytically each step;
// convergence when the violation gap falls below kkt_tol.
class SmoSolver {
public:
    SmoSolver(const Matrix& x, const std::vector<int>& y_pm, double c, double gamma, double tol)
        : x_(x), y_(y_pm), c_(c), gamma_(gamma), tol_(tol), n_(x.rows()),
          alpha_(n_, 0.0), grad_(n_, -1.0), kernel_rows_(n_) {}

    struct Result {
        std::vector<double> alpha;
        double bias = 0.0;
        double gap = 0.0;
        long iterations = 0;
    };

    Result solve() {
        const long max_iter = std::max<long>(100000, 200 * static_cast<long>(n_));
        long iter = 0;
        double gap = std::numeric_limits<double>::infinity();
        for (; iter < max_iter; ++iter) {
            auto [i, j, m, big_m] = select_working_pair();
            gap = m - big_m;
            if (gap < tol_) break;
            update_pair(i, j);
        }
        if (gap >= tol_)
            throw Error(ErrorKind::convergence,
                        "SMO did not converge: KKT gap " + std::to_string(gap) + " after " +
                            std::to_string(iter) + " iterations");
        Result res;
        res.alpha = alpha_;
        res.bias = compute_bias();
        res.gap = gap;
        res.iterations = iter;
        return res;
    }

private:
    std::span<const double> kernel_row(std::size_t i) {
        auto& row = kernel_rows_[i];
        if (row.empty()) {
            row.resize(n_);
            const auto xi = x_.row(i);
            for (std::size_t t = 0; t < n_; ++t) {
                const auto xt = x_.row(t);
                double dist = 0.0;
                for (std::size_t f = 0; f < x_.cols(); ++f) {
                    const double d = xi[f] - xt[f];
                    dist += d * d;
                }
                row[t] = std::exp(-gamma_ * dist);
            }
        }
        return row;
    }

    bool in_up(std::size_t t) const {
        return (y_[t] > 0 && alpha_[t] < c_) || (y_[t] < 0 && alpha_[t] > 0.0);
    }
    bool in_low(std::size_t t) const {
        return (y_[t] < 0 && alpha_[t] < c_) || (y_[t] > 0 && alpha_[t] > 0.0);
    }

    struct Pair {
        std::size_t i = 0, j = 0;
        double m = 0.0, big_m = 0.0;
    };

    Pair select_working_pair() const {
        Pair p;
        double best_up = -std::numeric_limits<double>::infinity();
        double best_low = std::numeric_limits<double>::infinity();
        for (std::size_t t = 0; t < n_; ++t) {
            const double v = -static_cast<double>(y_[t]) * grad_[t];
            if (in_up(t) && v > best_up) {
                best_up = v;
                p.i = t;
            }
            if (in_low(t) && v < best_low) {
                best_low = v;
                p.j = t;
            }
        }
        p.m = best_up;
        p.big_m = best_low;
        return p;
    }

    void update_pair(std::size_t i, std::size_t j) {
        const auto ki = kernel_row(i);
        const auto kj = kernel_row(j);
        const double yi = y_[i], yj = y_[j];

        double low, high;
        if (yi != yj) {
            const double diff = alpha_[j] - alpha_[i];
            low = std::max(0.0, diff);
            high = std::min(c_, c_ + diff);
        } else {
            const double sum = alpha_[i] + alpha_[j];
            low = std::max(0.0, sum - c_);
            high = std::min(c_, sum);
        }

        double eta = ki[i] + kj[j] - 2.0 * ki[j];
        if (eta <= 0.0) eta = 1e-12;
        // E_t = f(x_t) - y_t = y_t G_t (bias-free scores; the bias cancels)
        const double e_i = yi * grad_[i];
        const double e_j = yj * grad_[j];
        double aj_new = alpha_[j] + yj * (e_i - e_j) / eta;
        aj_new = std::clamp(aj_new, low, high);
        // keep the box exact against rounding; the equality constraint stays
        // within machine precision
        const double ai_new = std::clamp(alpha_[i] + yi * yj * (alpha_[j] - aj_new), 0.0, c_);

        const double delta_i = ai_new - alpha_[i];
        const double delta_j = aj_new - alpha_[j];
        alpha_[i] = ai_new;
        alpha_[j] = aj_new;
        for (std::size_t t = 0; t < n_; ++t)
            grad_[t] += static_cast<double>(y_[t]) *
                        (yi * delta_i * ki[t] + yj * delta_j * kj[t]);
    }

    double compute_bias() const {
        double upper = std::numeric_limits<double>::infinity();
        double lower = -std::numeric_limits<double>::infinity();
        double free_sum = 0.0;
        std::size_t free_count = 0;
        for (std::size_t t = 0; t < n_; ++t) {
            const double yg = static_cast<double>(y_[t]) * grad_[t];
            if (alpha_[t] <= 0.0) {
                if (y_[t] > 0) upper = std::min(upper, yg);
                else lower = std::max(lower, yg);
            } else if (alpha_[t] >= c_) {
                if (y_[t] < 0) upper = std::min(upper, yg);
                else lower = std::max(lower, yg);
            } else {
                free_sum += yg;
                ++free_count;
            }
        }
        const double rho = free_count ? free_sum / static_cast<double>(free_count)
                                      : (upper + lower) / 2.0;
        return -rho;
    }

    const Matrix& x_;
    const std::vector<int>& y_;
    const double c_, gamma_, tol_;
    const std::size_t n_;
    std::vector<double> alpha_;
    std::vector<double> grad_;
    mutable std::vector<std::vector<double>> kernel_rows_;
};

double rbf_kernel(std::span<const double> a, std::span<const double> b, double gamma) {
    double dist = 0.0;
    for (std::size_t f = 0; f < a.size(); ++f) {
        const double d = a[f] - b[f];
        dist += d * d;
    }
    return std::exp(-gamma * dist);
}

// gamma = 'scale': 1 / (p * mean per-feature population variance).
double gamma_scale(const Matrix& x) {
    const double n = static_cast<double>(x.rows());
    double var_sum = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double s = 0.0, ss = 0.0;
        for (std::size_t i = 0; i < x.rows(); ++i) {
            s += x(i, j);
            ss += x(i, j) * x(i, j);
        }
        const double mean = s / n;
        var_sum += std::max(0.0, ss / n - mean * mean);
    }
    double mean_var = var_sum / static_cast<double>(x.cols());
    if (mean_var <= 0.0) mean_var = 1.0;
    return 1.0 / (static_cast<double>(x.cols()) * mean_var);
}

std::vector<double> raw_decision(const Matrix& sv, const std::vector<double>& dual_coef,
                                 double bias, double gamma, const Matrix& x) {
    std::vector<double> out(x.rows(), bias);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto xi = x.row(i);
        for (std::size_t s = 0; s < sv.rows(); ++s)
            out[i] += dual_coef[s] * rbf_kernel(sv.row(s), xi, gamma);
    }
    return out;
}

struct BareSvm {
    Matrix support_vectors;
    std::vector<double> dual_coef;
    double bias = 0.0;
    double gamma = 0.0;
    long iterations = 0;
};

BareSvm fit_bare_svm(const ClassifierSpec& spec, const Matrix& x, const std::vector<int>& y) {
    std::vector<int> y_pm(y.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        y_pm[i] = y[i] ? 1 : -1;
        pos += static_cast<std::size_t>(y[i]);
    }
    if (pos == 0 || pos == y.size())
        throw Error(ErrorKind::data, "SVM needs both classes present");

    const double gamma = gamma_scale(x);
    SmoSolver solver(x, y_pm, spec.C, gamma, spec.kkt_tol);
    auto sol = solver.solve();

    BareSvm out;
    out.gamma = gamma;
    out.bias = sol.bias;
    out.iterations = sol.iterations;
    std::vector<std::vector<double>> sv_rows;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (sol.alpha[i] > 0.0) {
            auto row = x.row(i);
            sv_rows.emplace_back(row.begin(), row.end());
            out.dual_coef.push_back(sol.alpha[i] * y_pm[i]);
        }
    }
    out.support_vectors = Matrix::from_rows(sv_rows);
    return out;
}

} // namespace

std::vector<double> SvmRbfModel::decision_score(const Matrix& x) const {
    check_width(x);
    return raw_decision(support_vectors, dual_coef, bias, gamma, x);
}

std::vector<double> SvmRbfModel::positive_proba(const Matrix& x) const {
    auto f = decision_score(x);
    for (double& v : f) v = sigmoid(-(platt_a * v + platt_b));
    return f;
}

SvmFitDetail fit_svm_rbf_detail(const ClassifierSpec& spec, const Matrix& x,
                                const std::vector<int>& y) {
    std::vector<int> y_pm(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) y_pm[i] = y[i] ? 1 : -1;
    const double gamma = gamma_scale(x);
    SmoSolver solver(x, y_pm, spec.C, gamma, spec.kkt_tol);
    auto sol = solver.solve();
    SvmFitDetail detail;
    detail.alpha = std::move(sol.alpha);
    detail.bias = sol.bias;
    detail.gamma = gamma;
    detail.gap = sol.gap;
    detail.iterations = sol.iterations;
    return detail;
}

std::unique_ptr<Classifier> fit_svm_smo(const ClassifierSpec& spec, const Matrix& x,
                                        const std::vector<int>& y) {
    auto bare = fit_bare_svm(spec, x, y);

    // Platt probabilities calibrated on out-of-fold decision scores; tiny
    // datasets that cannot stratify fall back to in-sample scores.
    std::vector<double> calib_scores(x.rows());
    std::size_t pos = 0;
    for (int v : y) pos += static_cast<std::size_t>(v);
    const std::size_t min_class = std::min(pos, y.size() - pos);
    const std::size_t folds = static_cast<std::size_t>(spec.platt_folds);
    if (min_class >= folds && folds >= 2) {
        auto fold_of = preprocess::stratified_folds(y, folds, mix_seed(spec.seed, 0x9a77));
        for (std::size_t f = 0; f < folds; ++f) {
            std::vector<std::size_t> train_idx, test_idx;
            for (std::size_t i = 0; i < y.size(); ++i)
                (fold_of[i] == static_cast<int>(f) ? test_idx : train_idx).push_back(i);
            Matrix x_train = x.select_rows(train_idx);
            std::vector<int> y_train;
            y_train.reserve(train_idx.size());
            for (std::size_t i : train_idx) y_train.push_back(y[i]);
            auto fold_model = fit_bare_svm(spec, x_train, y_train);
            Matrix x_test = x.select_rows(test_idx);
            auto scores = raw_decision(fold_model.support_vectors, fold_model.dual_coef,
                                       fold_model.bias, fold_model.gamma, x_test);
            for (std::size_t t = 0; t < test_idx.size(); ++t)
                calib_scores[test_idx[t]] = scores[t];
        }
    } else {
        calib_scores = raw_decision(bare.support_vectors, bare.dual_coef, bare.bias, bare.gamma, x);
    }
    auto [a, b] = platt_fit(calib_scores, y);

    auto model = std::make_unique<SvmRbfModel>();
    model->support_vectors = std::move(bare.support_vectors);
    model->dual_coef = std::move(bare.dual_coef);
    model->bias = bare.bias;
    model->gamma = bare.gamma;
    model->platt_a = a;
    model->platt_b = b;
    model->iterations = bare.iterations;
    model->seed = spec.seed;
    return model;
}

} // namespace tabml::models

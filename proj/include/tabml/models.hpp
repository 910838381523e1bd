#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabml/common.hpp"

namespace tabml::models {

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

enum class ModelKind { logreg, svm_rbf, random_forest, extra_trees, grad_boost };

std::string to_string(ModelKind kind);
ModelKind model_kind_from_string(const std::string& s);
bool is_tree_model(ModelKind kind);

struct ClassifierSpec {
    ModelKind kind = ModelKind::logreg;
    std::uint64_t seed = 0;

    // logreg
    int max_iter = 4000;
    bool balanced = true;
    double grad_tol = 1e-8;

    // svm_rbf
    double C = 1.0;
    double kkt_tol = 1e-3;
    int platt_folds = 3;

    // tree ensembles
    int n_trees = 300;        // 200 for grad_boost
    double learning_rate = 0.1;
    int max_depth = -1;       // unlimited for bagging; 3 for grad_boost

    static ClassifierSpec defaults(ModelKind kind, std::uint64_t seed = 0);
    static ClassifierSpec from_json(const nlohmann::json& doc, std::uint64_t seed);
    nlohmann::json to_json() const;

    void validate() const;
};

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

struct TreeNode {
    int feature = -1;       // -1 for leaves
    double threshold = 0.0; // x[feature] <= threshold goes left
    int left = -1;
    int right = -1;
    double value = 0.0;     // leaf output
    double cover = 0.0;     // training samples reaching the node (with bootstrap multiplicity)

    bool is_leaf() const { return left < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes; // nodes[0] is the root

    double predict(std::span<const double> row) const;
    // Cover-weighted expectation of the leaf output.
    double expected_value() const;
};

enum class OutputSpace { probability, log_odds };

// Read-only view of an additive tree ensemble:
//   raw(x) = base_score + scale * sum_t tree_t(x)
struct TreeEnsembleView {
    const std::vector<Tree>* trees = nullptr;
    double base_score = 0.0;
    double scale = 1.0;
    OutputSpace space = OutputSpace::probability;
};

// ---------------------------------------------------------------------------
// Fitted classifiers
// ---------------------------------------------------------------------------

class Classifier {
public:
    virtual ~Classifier() = default;

    virtual std::string name() const = 0;
    virtual std::size_t n_features() const = 0;

    // n x 2 matrix of class probabilities (columns: class 0, class 1);
    // rows sum to 1 within 1e-12.
    Matrix predict_proba(const Matrix& x) const;

    // Positive-class probability.
    virtual std::vector<double> positive_proba(const Matrix& x) const = 0;

    // Strictly monotone in positive-class probability; used for ROC.
    virtual std::vector<double> decision_score(const Matrix& x) const = 0;

    virtual nlohmann::json to_json() const = 0;

    // Non-null only for tree ensembles (used by TreeSHAP).
    virtual const TreeEnsembleView* tree_view() const { return nullptr; }

protected:
    void check_width(const Matrix& x) const;
};

std::unique_ptr<Classifier> fit_classifier(const ClassifierSpec& spec, const Matrix& x,
                                           const std::vector<int>& y);
std::unique_ptr<Classifier> classifier_from_json(const nlohmann::json& doc);

// Balanced per-class weights n / (2 n_c); the identity-weight vector otherwise.
std::vector<double> class_weights(const std::vector<int>& y, bool balanced);

// ---------------------------------------------------------------------------
// Individual fitters (exposed for tests; fit_classifier dispatches to these)
// ---------------------------------------------------------------------------

std::unique_ptr<Classifier> fit_logreg(const ClassifierSpec& spec, const Matrix& x,
                                       const std::vector<int>& y);
std::unique_ptr<Classifier> fit_svm_smo(const ClassifierSpec& spec, const Matrix& x,
                                        const std::vector<int>& y);

// Raw SMO solution for inspection: every alpha (training order), the solved
// bias, the final KKT violation gap, and the gamma actually used.
struct SvmFitDetail {
    std::vector<double> alpha;
    double bias = 0.0;
    double gamma = 0.0;
    double gap = 0.0;
    long iterations = 0;
};
SvmFitDetail fit_svm_rbf_detail(const ClassifierSpec& spec, const Matrix& x,
                                const std::vector<int>& y);
std::unique_ptr<Classifier> fit_random_forest(const ClassifierSpec& spec, const Matrix& x,
                                              const std::vector<int>& y);
std::unique_ptr<Classifier> fit_extra_trees(const ClassifierSpec& spec, const Matrix& x,
                                            const std::vector<int>& y);
std::unique_ptr<Classifier> fit_gradient_boosting(const ClassifierSpec& spec, const Matrix& x,
                                                  const std::vector<int>& y);

// ---------------------------------------------------------------------------
// CART base learner
// ---------------------------------------------------------------------------

enum class SplitMode { best, random };
enum class SplitCriterion { gini, variance };

struct CartConfig {
    SplitMode mode = SplitMode::best;
    SplitCriterion criterion = SplitCriterion::gini;
    int max_depth = -1;        // < 0: unlimited
    int max_features = -1;     // < 1: all features
    int min_samples_split = 2;
};

// Fits a tree on x[sample_indices]. `target` drives the split criterion and
// the default leaf value (mean target). When `hessian` is non-null, leaf
// values become sum(target) / sum(hessian) (one Newton step for boosting).
Tree fit_cart(const Matrix& x, const std::vector<double>& target,
              const std::vector<std::size_t>& sample_indices, const CartConfig& config, Rng& rng,
              const std::vector<double>* hessian = nullptr);

// Logistic helpers shared by logreg / gbm / calibration.
double sigmoid(double z);

// Platt sigmoid calibration: fits P(y=1|f) = 1/(1+exp(a f + b)) on decision
// scores with Platt's smoothed targets (Newton iterations).
std::pair<double, double> platt_fit(const std::vector<double>& scores, const std::vector<int>& y);

} // namespace tabml::models

#pragma once

// Concrete model types shared by the per-model translation units and the
// JSON (de)serializer. Not part of the public API.

#include <nlohmann/json.hpp>

#include "tabml/models.hpp"

namespace tabml::models {

class LogRegModel final : public Classifier {
public:
    std::vector<double> weights;
    double bias = 0.0;
    int iterations = 0;
    bool converged = false;
    std::uint64_t seed = 0;

    std::string name() const override { return "logreg"; }
    std::size_t n_features() const override { return weights.size(); }
    std::vector<double> positive_proba(const Matrix& x) const override;
    std::vector<double> decision_score(const Matrix& x) const override;
    nlohmann::json to_json() const override;
};

class SvmRbfModel final : public Classifier {
public:
    Matrix support_vectors;          // rows: support vectors
    std::vector<double> dual_coef;   // alpha_i * y_i per support vector
    double bias = 0.0;
    double gamma = 1.0;
    double platt_a = 0.0;
    double platt_b = 0.0;
    long iterations = 0;
    std::uint64_t seed = 0;

    std::string name() const override { return "svm_rbf"; }
    std::size_t n_features() const override { return support_vectors.cols(); }
    std::vector<double> positive_proba(const Matrix& x) const override;
    std::vector<double> decision_score(const Matrix& x) const override;
    nlohmann::json to_json() const override;
};

class ForestModel final : public Classifier {
public:
    ModelKind kind = ModelKind::random_forest;
    std::vector<Tree> trees;
    std::size_t feature_count = 0;
    std::uint64_t seed = 0;

    ForestModel() { refresh_view(); }
    void refresh_view() {
        view_.trees = &trees;
        view_.base_score = 0.0;
        view_.scale = trees.empty() ? 1.0 : 1.0 / static_cast<double>(trees.size());
        view_.space = OutputSpace::probability;
    }

    std::string name() const override { return to_string(kind); }
    std::size_t n_features() const override { return feature_count; }
    std::vector<double> positive_proba(const Matrix& x) const override;
    std::vector<double> decision_score(const Matrix& x) const override;
    nlohmann::json to_json() const override;
    const TreeEnsembleView* tree_view() const override { return &view_; }

private:
    TreeEnsembleView view_;
};

class GbmModel final : public Classifier {
public:
    std::vector<Tree> trees;
    double base_score = 0.0;         // initial log-odds
    double learning_rate = 0.1;
    std::size_t feature_count = 0;
    std::uint64_t seed = 0;
    std::vector<double> training_deviance; // per stage, not serialized

    void refresh_view() {
        view_.trees = &trees;
        view_.base_score = base_score;
        view_.scale = learning_rate;
        view_.space = OutputSpace::log_odds;
    }

    std::string name() const override { return "grad_boost"; }
    std::size_t n_features() const override { return feature_count; }
    std::vector<double> positive_proba(const Matrix& x) const override;
    std::vector<double> decision_score(const Matrix& x) const override;
    nlohmann::json to_json() const override;
    const TreeEnsembleView* tree_view() const override { return &view_; }

private:
    TreeEnsembleView view_;
};

nlohmann::json tree_to_json(const Tree& tree);
Tree tree_from_json(const nlohmann::json& doc);

} // namespace tabml::models

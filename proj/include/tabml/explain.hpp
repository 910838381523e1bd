#pragma once

#include <string>
#include <vector>

#include "tabml/common.hpp"
#include "tabml/eval.hpp"
#include "tabml/models.hpp"

namespace tabml::explain {

struct ShapAttribution {
    Matrix phi;              // n_instances x n_features
    double base_value = 0.0; // expected model output over the training distribution
    models::OutputSpace space = models::OutputSpace::probability;
    std::vector<std::string> feature_names;

    // Mean |phi| per feature.
    std::vector<double> mean_abs() const;
};

// Exact path-dependent TreeSHAP over the model's additive tree ensemble.
// Conditional expectations use per-node cover proportions; phi rows satisfy
// local accuracy against the ensemble's raw output.
ShapAttribution tree_shap(const models::Classifier& model, const Matrix& x,
                          const std::vector<std::string>& feature_names = {},
                          std::size_t workers = 0);

// Per-instance raw ensemble output in the attribution's output space.
std::vector<double> raw_output(const models::Classifier& model, const Matrix& x);

struct ConsensusRanking {
    std::vector<std::string> feature_names;
    std::vector<std::vector<double>> mean_abs_per_model; // [model][feature]
    std::vector<double> average_rank;                    // [feature], 1 = most important
    std::vector<std::size_t> order; // feature indices, most important first
};

// Features ranked by mean |phi| per model (rank 1 = largest); consensus is the
// ascending order of the averaged ranks, ties broken by feature name.
ConsensusRanking consensus_rank(const std::vector<ShapAttribution>& attributions);

// The tree-ensemble model with maximal mean CV ROC-AUC; ties broken by higher
// mean recall, then by name.
std::string select_strongest_tree_model(const std::vector<eval::CVSummary>& summaries);

} // namespace tabml::explain

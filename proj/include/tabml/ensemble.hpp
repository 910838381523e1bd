#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabml/common.hpp"
#include "tabml/models.hpp"

namespace tabml::ensemble {

// Stacking over out-of-fold base-model probabilities: the meta-learner (a
// balanced logistic regression) only ever sees probabilities produced by base
// models trained on folds excluding the sample.
class StackingModel {
public:
    std::vector<models::ClassifierSpec> base_specs;
    std::vector<std::unique_ptr<models::Classifier>> base_models; // full-data refits
    std::unique_ptr<models::Classifier> meta;
    std::vector<int> fold_of;   // fold plan used for the meta features
    Matrix meta_features;       // n x B out-of-fold positive probabilities
    std::uint64_t seed = 0;

    std::vector<double> positive_proba(const Matrix& x) const;
    std::vector<double> decision_score(const Matrix& x) const;
    nlohmann::json to_json() const;
};

struct StackingConfig {
    std::vector<models::ClassifierSpec> base_specs;
    std::size_t n_folds = 5;
    std::size_t workers = 0;
};

StackingModel fit_stacking(const Matrix& x, const std::vector<int>& y,
                           const StackingConfig& config, std::uint64_t seed);

std::vector<double> predict_stacking(const StackingModel& model, const Matrix& x);

// Out-of-fold (or deliberately leaky in-fold, for the leakage test) meta
// features for a fixed fold plan.
Matrix make_meta_features(const Matrix& x, const std::vector<int>& y,
                          const std::vector<models::ClassifierSpec>& base_specs,
                          const std::vector<int>& fold_of, bool in_fold, std::uint64_t seed,
                          std::size_t workers = 0);

} // namespace tabml::ensemble

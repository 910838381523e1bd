#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabml/common.hpp"
#include "tabml/dataio.hpp"

namespace tabml::preprocess {

// Quantile with linear interpolation between order statistics (the "type 7"
// convention); q in [0, 1], values need not be sorted.
double quantile_linear(std::vector<double> values, double q);
double median(std::vector<double> values);

struct StandardizationParams {
    std::vector<std::string> feature_names;
    std::vector<double> mean;
    std::vector<double> stddev; // population std; constant features guarded to 1
};

struct ImputeReport {
    std::map<std::string, std::size_t> imputed_cells;
    std::map<std::string, double> medians;
};

struct FilterRemovedRow {
    std::size_t row = 0;            // index in the pre-filter dataset
    std::size_t outlier_features = 0;
};

struct FilterReport {
    std::vector<FilterRemovedRow> removed;
    std::size_t rows_before = 0;
    std::size_t rows_after = 0;
};

struct SplitIndices {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

struct PreprocessReport {
    ImputeReport impute;
    FilterReport filter;
    SplitIndices split;
};

nlohmann::json report_to_json(const PreprocessReport& r);

// Replaces missing cells (NaN, and literal 0 in zero_is_missing columns) of
// numeric feature columns with the column median over observed values.
std::pair<dataio::TabularDataset, ImputeReport> impute_zero_median(const dataio::TabularDataset& ds);

// Fold-local variant: medians are estimated from `fit_rows` only but applied
// to every row of the dataset.
std::pair<dataio::TabularDataset, ImputeReport>
impute_zero_median_fit_on(const dataio::TabularDataset& ds, const std::vector<std::size_t>& fit_rows);

// Removes rows with two or more feature values outside [Q1 - 1.5 IQR, Q3 + 1.5 IQR].
// Quartiles are computed per numeric feature column on the pre-filter data in
// a single pass; binary indicator features do not participate.
std::pair<dataio::TabularDataset, FilterReport> iqr_filter(const dataio::TabularDataset& ds);

StandardizationParams fit_standardizer(const dataio::TabularDataset& ds,
                                       const std::vector<std::string>& features);
StandardizationParams fit_standardizer(const Matrix& x, const std::vector<std::string>& names);
StandardizationParams fit_standardizer_on(const Matrix& x, const std::vector<std::string>& names,
                                          const std::vector<std::size_t>& fit_rows);

dataio::TabularDataset apply_standardizer(const StandardizationParams& params,
                                          const dataio::TabularDataset& ds);
Matrix apply_standardizer(const StandardizationParams& params, const Matrix& x,
                          const std::vector<std::string>& names);

// Seeded stratified train/test split. Per-class test counts are
// round(class_count * test_fraction), adjusted by largest remainder so the
// total equals round(n * test_fraction).
SplitIndices stratified_split(const std::vector<int>& y, double test_fraction, std::uint64_t seed);

// Stratified k-fold assignment: within each class, indices are shuffled by the
// seed and dealt round-robin; returns fold id per sample.
std::vector<int> stratified_folds(const std::vector<int>& y, std::size_t k, std::uint64_t seed);

} // namespace tabml::preprocess

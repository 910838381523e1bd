#include "tabml/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

namespace tabml::preprocess {

using dataio::ColumnKind;
using dataio::ColumnRole;
using dataio::TabularDataset;

double quantile_linear(std::vector<double> values, double q) {
    if (values.empty()) throw Error(ErrorKind::data, "quantile of empty vector");
    if (!(q >= 0.0 && q <= 1.0)) throw Error(ErrorKind::contract, "quantile q must be in [0,1]");
    std::sort(values.begin(), values.end());
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = static_cast<std::size_t>(std::ceil(pos));
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile_linear(std::move(values), 0.5); }

nlohmann::json report_to_json(const PreprocessReport& r) {
    nlohmann::json doc;
    doc["imputed_cells"] = r.impute.imputed_cells;
    doc["imputation_medians"] = r.impute.medians;
    nlohmann::json removed = nlohmann::json::array();
    for (const auto& row : r.filter.removed)
        removed.push_back({{"row", row.row}, {"outlier_features", row.outlier_features}});
    doc["removed_rows"] = removed;
    doc["rows_before_filter"] = r.filter.rows_before;
    doc["rows_after_filter"] = r.filter.rows_after;
    doc["train_indices"] = r.split.train;
    doc["test_indices"] = r.split.test;
    return doc;
}

namespace {

std::pair<TabularDataset, ImputeReport>
impute_impl(const TabularDataset& ds, const std::vector<std::size_t>* fit_rows) {
    TabularDataset out = ds;
    ImputeReport report;
    for (auto& c : out.columns) {
        if (c.schema.kind != ColumnKind::numeric || !c.numeric_storage()) continue;
        bool any_missing = false;
        for (double v : c.values)
            if (dataio::is_missing(c.schema, v)) { any_missing = true; break; }
        if (!any_missing) continue;

        std::vector<double> observed;
        if (fit_rows) {
            for (std::size_t r : *fit_rows)
                if (!dataio::is_missing(c.schema, c.values[r])) observed.push_back(c.values[r]);
        } else {
            for (double v : c.values)
                if (!dataio::is_missing(c.schema, v)) observed.push_back(v);
        }
        if (observed.empty())
            throw Error(ErrorKind::imputation,
                        "column '" + c.schema.name + "' has no observed values to impute from");
        const double med = median(observed);
        std::size_t imputed = 0;
        for (double& v : c.values) {
            if (dataio::is_missing(c.schema, v)) {
                v = med;
                ++imputed;
            }
        }
        report.imputed_cells[c.schema.name] = imputed;
        report.medians[c.schema.name] = med;
    }
    return {std::move(out), std::move(report)};
}

} // namespace

std::pair<TabularDataset, ImputeReport> impute_zero_median(const TabularDataset& ds) {
    return impute_impl(ds, nullptr);
}

std::pair<TabularDataset, ImputeReport>
impute_zero_median_fit_on(const TabularDataset& ds, const std::vector<std::size_t>& fit_rows) {
    return impute_impl(ds, &fit_rows);
}

std::pair<TabularDataset, FilterReport> iqr_filter(const TabularDataset& ds) {
    std::vector<const dataio::Column*> numeric_features;
    for (const auto& c : ds.columns)
        if (c.schema.role == ColumnRole::feature && c.schema.kind == ColumnKind::numeric)
            numeric_features.push_back(&c);

    std::vector<std::pair<double, double>> bounds; // per column: [lo, hi]
    for (const auto* c : numeric_features) {
        for (double v : c->values)
            if (std::isnan(v))
                throw Error(ErrorKind::contract,
                            "iqr_filter requires an imputed dataset (column '" +
                                c->schema.name + "' has missing cells)");
        const double q1 = quantile_linear(c->values, 0.25);
        const double q3 = quantile_linear(c->values, 0.75);
        const double iqr = q3 - q1;
        bounds.emplace_back(q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    }

    FilterReport report;
    report.rows_before = ds.n_rows;
    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < ds.n_rows; ++i) {
        std::size_t outliers = 0;
        for (std::size_t j = 0; j < numeric_features.size(); ++j) {
            const double v = numeric_features[j]->values[i];
            if (v < bounds[j].first || v > bounds[j].second) ++outliers;
        }
        if (outliers >= 2) report.removed.push_back({i, outliers});
        else keep.push_back(i);
    }
    report.rows_after = keep.size();
    if (keep.empty()) throw Error(ErrorKind::data, "iqr_filter removed every row");

    TabularDataset out = ds.select_rows(keep);
    out.row_log.push_back("iqr_filter removed " + std::to_string(report.removed.size()) +
                          " of " + std::to_string(ds.n_rows) + " rows");
    return {std::move(out), std::move(report)};
}

StandardizationParams fit_standardizer(const TabularDataset& ds,
                                       const std::vector<std::string>& features) {
    return fit_standardizer(ds.feature_matrix(features), features);
}

StandardizationParams fit_standardizer(const Matrix& x, const std::vector<std::string>& names) {
    std::vector<std::size_t> all(x.rows());
    std::iota(all.begin(), all.end(), 0);
    return fit_standardizer_on(x, names, all);
}

StandardizationParams fit_standardizer_on(const Matrix& x, const std::vector<std::string>& names,
                                          const std::vector<std::size_t>& fit_rows) {
    if (names.size() != x.cols())
        throw Error(ErrorKind::contract, "feature-name count does not match matrix width");
    if (fit_rows.empty()) throw Error(ErrorKind::data, "cannot fit standardizer on zero rows");
    StandardizationParams p;
    p.feature_names = names;
    p.mean.resize(x.cols());
    p.stddev.resize(x.cols());
    const double n = static_cast<double>(fit_rows.size());
    for (std::size_t j = 0; j < x.cols(); ++j) {
        double s = 0.0;
        for (std::size_t r : fit_rows) s += x(r, j);
        const double mean = s / n;
        double ss = 0.0;
        for (std::size_t r : fit_rows) {
            const double d = x(r, j) - mean;
            ss += d * d;
        }
        p.mean[j] = mean;
        const double var = ss / n; // population variance
        p.stddev[j] = var > 0.0 ? std::sqrt(var) : 1.0;
    }
    return p;
}

Matrix apply_standardizer(const StandardizationParams& params, const Matrix& x,
                          const std::vector<std::string>& names) {
    if (names != params.feature_names)
        throw Error(ErrorKind::contract, "standardizer was fit on a different feature set");
    if (x.cols() != params.mean.size())
        throw Error(ErrorKind::contract, "matrix width does not match standardizer");
    Matrix out = x;
    for (std::size_t i = 0; i < x.rows(); ++i)
        for (std::size_t j = 0; j < x.cols(); ++j)
            out(i, j) = (x(i, j) - params.mean[j]) / params.stddev[j];
    return out;
}

dataio::TabularDataset apply_standardizer(const StandardizationParams& params,
                                          const TabularDataset& ds) {
    TabularDataset out = ds;
    for (std::size_t j = 0; j < params.feature_names.size(); ++j) {
        auto& col = out.column(params.feature_names[j]);
        for (double& v : col.values) v = (v - params.mean[j]) / params.stddev[j];
    }
    return out;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(const std::vector<int>& y) {
    std::vector<std::size_t> neg, pos;
    for (std::size_t i = 0; i < y.size(); ++i) (y[i] ? pos : neg).push_back(i);
    std::vector<std::vector<std::size_t>> out;
    if (!neg.empty()) out.push_back(std::move(neg));
    if (!pos.empty()) out.push_back(std::move(pos));
    return out;
}

} // namespace

SplitIndices stratified_split(const std::vector<int>& y, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction > 0.0 && test_fraction < 1.0))
        throw Error(ErrorKind::config, "test_fraction must be in (0, 1)");
    auto classes = indices_by_class(y);
    if (classes.size() < 2)
        throw Error(ErrorKind::stratification, "stratified split needs both classes present");
    for (const auto& c : classes)
        if (c.size() < 2)
            throw Error(ErrorKind::stratification, "each class needs at least 2 members");

    const std::size_t target_total =
        static_cast<std::size_t>(std::llround(static_cast<double>(y.size()) * test_fraction));

    std::vector<std::size_t> counts(classes.size());
    std::vector<double> remainders(classes.size());
    std::size_t total = 0;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        const double exact = static_cast<double>(classes[c].size()) * test_fraction;
        counts[c] = static_cast<std::size_t>(std::llround(exact));
        remainders[c] = exact - std::floor(exact);
        total += counts[c];
    }
    // Largest-remainder adjustment so per-class rounding sums to the target.
    while (total != target_total) {
        if (total < target_total) {
            std::size_t best = 0;
            for (std::size_t c = 1; c < classes.size(); ++c)
                if (remainders[c] > remainders[best]) best = c;
            counts[best]++;
            remainders[best] = -1.0;
            ++total;
        } else {
            std::size_t best = 0;
            for (std::size_t c = 1; c < classes.size(); ++c)
                if (remainders[c] < remainders[best]) best = c;
            if (counts[best] == 0) { remainders[best] = 2.0; continue; }
            counts[best]--;
            remainders[best] = 2.0;
            --total;
        }
    }

    Rng rng(seed);
    SplitIndices split;
    for (std::size_t c = 0; c < classes.size(); ++c) {
        auto idx = classes[c];
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i)
            (i < counts[c] ? split.test : split.train).push_back(idx[i]);
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::vector<int> stratified_folds(const std::vector<int>& y, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw Error(ErrorKind::config, "stratified_folds requires k >= 2");
    auto classes = indices_by_class(y);
    for (const auto& c : classes)
        if (c.size() < k)
            throw Error(ErrorKind::stratification,
                        "class with " + std::to_string(c.size()) + " members cannot fill " +
                            std::to_string(k) + " folds");

    Rng rng(seed);
    std::vector<int> fold_of(y.size(), -1);
    for (auto& idx : classes) {
        rng.shuffle(idx);
        for (std::size_t i = 0; i < idx.size(); ++i)
            fold_of[idx[i]] = static_cast<int>(i % k);
    }
    return fold_of;
}

} // namespace tabml::preprocess

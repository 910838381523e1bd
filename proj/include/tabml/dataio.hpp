#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabml/common.hpp"

namespace tabml::dataio {

enum class ColumnKind { numeric, binary_symptom, categorical_group };
enum class ColumnRole { feature, target, group_label, ignored };

std::string to_string(ColumnKind k);
std::string to_string(ColumnRole r);
ColumnKind column_kind_from_string(const std::string& s);
ColumnRole column_role_from_string(const std::string& s);

struct ColumnSchema {
    std::string name;
    ColumnKind kind = ColumnKind::numeric;
    ColumnRole role = ColumnRole::feature;
    bool zero_is_missing = false; // valid only for kind == numeric

    bool operator==(const ColumnSchema&) const = default;
};

// Schema documents are JSON arrays of column objects
// [{"name": ..., "kind": ..., "role": ..., "zero_is_missing": ...}, ...].
std::vector<ColumnSchema> schema_from_json(const nlohmann::json& doc);
nlohmann::json schema_to_json(const std::vector<ColumnSchema>& schema);

// One dataset column. Numeric columns (and encoded binary-symptom columns)
// live in `values` with NaN marking an empty cell; binary-symptom columns
// before encoding and categorical_group columns keep their raw text in `text`.
struct Column {
    ColumnSchema schema;
    std::vector<double> values;
    std::vector<std::string> text;

    bool numeric_storage() const { return text.empty(); }
};

// Missing-cell predicate: NaN always, and literal zero for columns flagged
// zero_is_missing.
bool is_missing(const ColumnSchema& schema, double value);

struct TabularDataset {
    std::vector<Column> columns;
    std::size_t n_rows = 0;
    std::string source;                // path the data was loaded from, if any
    std::vector<std::string> row_log;  // row-filter provenance, appended by preprocessing

    const Column& column(const std::string& name) const;
    Column& column(const std::string& name);
    std::optional<std::size_t> column_index(const std::string& name) const;

    std::vector<std::string> feature_names() const;
    const Column& target_column() const;
    const Column& group_column() const;

    // Feature matrix over role == feature columns (schema order). Binary
    // symptom columns must already be encoded and no cell may be missing.
    Matrix feature_matrix() const;
    Matrix feature_matrix(const std::vector<std::string>& names) const;

    // Binary target vector; values must be exactly 0 or 1.
    std::vector<int> target_vector() const;

    TabularDataset select_rows(const std::vector<std::size_t>& rows) const;

    void validate() const; // enforces the structural invariants
};

TabularDataset load_csv(const std::string& path, const std::vector<ColumnSchema>& schema);
void write_csv(const TabularDataset& ds, const std::string& path);

// Yes/No (case-insensitive) and 1/0 tokens in binary_symptom columns -> {0,1}.
TabularDataset encode_binary(const TabularDataset& ds);

struct ColumnSummary {
    std::string name;
    std::size_t count = 0;      // non-missing cells
    std::size_t missing = 0;
    double min = 0.0, median = 0.0, max = 0.0; // over non-missing cells
    bool numeric = true;
};

struct DatasetSummary {
    std::size_t n_rows = 0;
    std::vector<ColumnSummary> columns;
    std::map<int, double> class_balance; // target label -> fraction, sums to 1
};

DatasetSummary summarize(const TabularDataset& ds);
nlohmann::json summary_to_json(const DatasetSummary& s);

} // namespace tabml::dataio

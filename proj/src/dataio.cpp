#include "tabml/dataio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace tabml::dataio {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

// RFC-4180-style field splitting: quoted fields may contain commas, doubled
// quotes escape a quote. Records never span lines in the files we handle.
std::vector<std::string> split_csv_record(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c == '\r') {
            // swallow stray CR (CRLF handled by getline leaving the CR)
        } else {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

std::string format_value(double v) {
    if (std::isnan(v)) return "";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

} // namespace

std::string to_string(ColumnKind k) {
    switch (k) {
    case ColumnKind::numeric: return "numeric";
    case ColumnKind::binary_symptom: return "binary_symptom";
    case ColumnKind::categorical_group: return "categorical_group";
    }
    return "?";
}

std::string to_string(ColumnRole r) {
    switch (r) {
    case ColumnRole::feature: return "feature";
    case ColumnRole::target: return "target";
    case ColumnRole::group_label: return "group_label";
    case ColumnRole::ignored: return "ignored";
    }
    return "?";
}

ColumnKind column_kind_from_string(const std::string& s) {
    if (s == "numeric") return ColumnKind::numeric;
    if (s == "binary_symptom") return ColumnKind::binary_symptom;
    if (s == "categorical_group") return ColumnKind::categorical_group;
    throw Error(ErrorKind::config, "unknown column kind '" + s + "'");
}

ColumnRole column_role_from_string(const std::string& s) {
    if (s == "feature") return ColumnRole::feature;
    if (s == "target") return ColumnRole::target;
    if (s == "group_label") return ColumnRole::group_label;
    if (s == "ignored") return ColumnRole::ignored;
    throw Error(ErrorKind::config, "unknown column role '" + s + "'");
}

std::vector<ColumnSchema> schema_from_json(const nlohmann::json& doc) {
    if (!doc.is_array() || doc.empty())
        throw Error(ErrorKind::config, "schema must be a non-empty JSON array");
    std::vector<ColumnSchema> schema;
    for (const auto& item : doc) {
        ColumnSchema col;
        if (!item.contains("name"))
            throw Error(ErrorKind::config, "schema column missing 'name'");
        col.name = item.at("name").get<std::string>();
        if (item.contains("kind")) col.kind = column_kind_from_string(item.at("kind").get<std::string>());
        if (item.contains("role")) col.role = column_role_from_string(item.at("role").get<std::string>());
        if (item.contains("zero_is_missing")) col.zero_is_missing = item.at("zero_is_missing").get<bool>();
        if (col.zero_is_missing && col.kind != ColumnKind::numeric)
            throw Error(ErrorKind::config,
                        "zero_is_missing is only valid for numeric columns ('" + col.name + "')");
        schema.push_back(std::move(col));
    }
    return schema;
}

nlohmann::json schema_to_json(const std::vector<ColumnSchema>& schema) {
    nlohmann::json doc = nlohmann::json::array();
    for (const auto& col : schema) {
        doc.push_back({{"name", col.name},
                       {"kind", to_string(col.kind)},
                       {"role", to_string(col.role)},
                       {"zero_is_missing", col.zero_is_missing}});
    }
    return doc;
}

bool is_missing(const ColumnSchema& schema, double value) {
    if (std::isnan(value)) return true;
    return schema.zero_is_missing && value == 0.0;
}

const Column& TabularDataset::column(const std::string& name) const {
    for (const auto& c : columns)
        if (c.schema.name == name) return c;
    throw Error(ErrorKind::schema, "no column named '" + name + "'");
}

Column& TabularDataset::column(const std::string& name) {
    for (auto& c : columns)
        if (c.schema.name == name) return c;
    throw Error(ErrorKind::schema, "no column named '" + name + "'");
}

std::optional<std::size_t> TabularDataset::column_index(const std::string& name) const {
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i].schema.name == name) return i;
    return std::nullopt;
}

std::vector<std::string> TabularDataset::feature_names() const {
    std::vector<std::string> names;
    for (const auto& c : columns)
        if (c.schema.role == ColumnRole::feature) names.push_back(c.schema.name);
    return names;
}

const Column& TabularDataset::target_column() const {
    for (const auto& c : columns)
        if (c.schema.role == ColumnRole::target) return c;
    throw Error(ErrorKind::schema, "dataset has no target column");
}

const Column& TabularDataset::group_column() const {
    for (const auto& c : columns)
        if (c.schema.role == ColumnRole::group_label) return c;
    throw Error(ErrorKind::schema, "dataset has no group_label column");
}

Matrix TabularDataset::feature_matrix() const { return feature_matrix(feature_names()); }

Matrix TabularDataset::feature_matrix(const std::vector<std::string>& names) const {
    Matrix m(n_rows, names.size());
    for (std::size_t j = 0; j < names.size(); ++j) {
        const Column& c = column(names[j]);
        if (!c.numeric_storage())
            throw Error(ErrorKind::contract,
                        "column '" + c.schema.name + "' is not numeric; encode it first");
        for (std::size_t i = 0; i < n_rows; ++i) {
            if (std::isnan(c.values[i]))
                throw Error(ErrorKind::contract,
                            "column '" + c.schema.name + "' has missing cells; impute first");
            m(i, j) = c.values[i];
        }
    }
    return m;
}

std::vector<int> TabularDataset::target_vector() const {
    const Column& t = target_column();
    if (!t.numeric_storage())
        throw Error(ErrorKind::contract, "target column is not numeric");
    std::vector<int> y(n_rows);
    for (std::size_t i = 0; i < n_rows; ++i) {
        if (t.values[i] == 0.0) y[i] = 0;
        else if (t.values[i] == 1.0) y[i] = 1;
        else
            throw Error(ErrorKind::data, "target column must be binary {0,1}");
    }
    return y;
}

TabularDataset TabularDataset::select_rows(const std::vector<std::size_t>& rows) const {
    TabularDataset out;
    out.source = source;
    out.row_log = row_log;
    out.n_rows = rows.size();
    out.columns.reserve(columns.size());
    for (const auto& c : columns) {
        Column nc;
        nc.schema = c.schema;
        if (c.numeric_storage()) {
            nc.values.reserve(rows.size());
            for (std::size_t r : rows) nc.values.push_back(c.values[r]);
        } else {
            nc.text.reserve(rows.size());
            for (std::size_t r : rows) nc.text.push_back(c.text[r]);
        }
        out.columns.push_back(std::move(nc));
    }
    return out;
}

void TabularDataset::validate() const {
    if (n_rows == 0) throw Error(ErrorKind::data, "dataset has no rows");
    for (const auto& c : columns) {
        const std::size_t len = c.numeric_storage() ? c.values.size() : c.text.size();
        if (len != n_rows)
            throw Error(ErrorKind::data, "column '" + c.schema.name + "' length mismatch");
        if (c.schema.kind == ColumnKind::binary_symptom && c.numeric_storage()) {
            for (double v : c.values)
                if (v != 0.0 && v != 1.0)
                    throw Error(ErrorKind::data,
                                "binary column '" + c.schema.name + "' contains non-binary value");
        }
    }
}

TabularDataset load_csv(const std::string& path, const std::vector<ColumnSchema>& schema) {
    if (schema.empty()) throw Error(ErrorKind::config, "empty schema");
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::data, "cannot open CSV file '" + path + "'");

    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorKind::parse, "empty CSV file '" + path + "'");
    std::vector<std::string> header = split_csv_record(line);
    for (auto& h : header) h = trim(h);

    // Header matching is case-sensitive after trimming, order-insensitive.
    std::vector<std::size_t> source_index(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) {
        auto it = std::find(header.begin(), header.end(), schema[j].name);
        if (it == header.end())
            throw Error(ErrorKind::schema,
                        "CSV '" + path + "' is missing column '" + schema[j].name + "'");
        source_index[j] = static_cast<std::size_t>(it - header.begin());
    }

    TabularDataset ds;
    ds.source = path;
    ds.columns.resize(schema.size());
    for (std::size_t j = 0; j < schema.size(); ++j) ds.columns[j].schema = schema[j];

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        std::vector<std::string> fields = split_csv_record(line);
        if (fields.size() < header.size())
            throw Error(ErrorKind::parse, "row " + std::to_string(row + 1) + " of '" + path +
                                              "' has " + std::to_string(fields.size()) +
                                              " fields, expected " + std::to_string(header.size()));
        for (std::size_t j = 0; j < schema.size(); ++j) {
            const std::string cell = trim(fields[source_index[j]]);
            Column& col = ds.columns[j];
            if (schema[j].kind == ColumnKind::numeric) {
                if (cell.empty()) {
                    col.values.push_back(std::numeric_limits<double>::quiet_NaN());
                    continue;
                }
                try {
                    std::size_t pos = 0;
                    double v = std::stod(cell, &pos);
                    if (pos != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
                    col.values.push_back(v);
                } catch (const std::exception&) {
                    throw Error(ErrorKind::parse, "cannot parse cell '" + cell + "' at row " +
                                                      std::to_string(row + 1) + ", column '" +
                                                      schema[j].name + "' of '" + path + "'");
                }
            } else {
                col.text.push_back(cell);
            }
        }
        ++row;
    }
    ds.n_rows = row;
    ds.validate();
    return ds;
}

void write_csv(const TabularDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::data, "cannot write CSV file '" + path + "'");
    for (std::size_t j = 0; j < ds.columns.size(); ++j) {
        if (j) out << ',';
        out << csv_escape(ds.columns[j].schema.name);
    }
    out << '\n';
    for (std::size_t i = 0; i < ds.n_rows; ++i) {
        for (std::size_t j = 0; j < ds.columns.size(); ++j) {
            if (j) out << ',';
            const Column& c = ds.columns[j];
            out << (c.numeric_storage() ? format_value(c.values[i]) : csv_escape(c.text[i]));
        }
        out << '\n';
    }
}

TabularDataset encode_binary(const TabularDataset& ds) {
    TabularDataset out = ds;
    for (auto& c : out.columns) {
        if (c.schema.kind != ColumnKind::binary_symptom) continue;
        if (c.numeric_storage()) {
            for (double v : c.values)
                if (v != 0.0 && v != 1.0)
                    throw Error(ErrorKind::encoding, "unrecognized binary value in column '" +
                                                         c.schema.name + "'");
            continue; // already encoded
        }
        c.values.reserve(c.text.size());
        for (const auto& token : c.text) {
            const std::string t = lower(trim(token));
            if (t == "yes" || t == "1") c.values.push_back(1.0);
            else if (t == "no" || t == "0") c.values.push_back(0.0);
            else
                throw Error(ErrorKind::encoding, "unrecognized token '" + token +
                                                     "' in binary column '" + c.schema.name + "'");
        }
        c.text.clear();
    }
    return out;
}

DatasetSummary summarize(const TabularDataset& ds) {
    DatasetSummary s;
    s.n_rows = ds.n_rows;
    for (const auto& c : ds.columns) {
        ColumnSummary cs;
        cs.name = c.schema.name;
        if (!c.numeric_storage()) {
            cs.numeric = false;
            cs.count = c.text.size();
            s.columns.push_back(cs);
            continue;
        }
        std::vector<double> present;
        for (double v : c.values) {
            if (is_missing(c.schema, v)) ++cs.missing;
            else present.push_back(v);
        }
        cs.count = present.size();
        if (!present.empty()) {
            std::sort(present.begin(), present.end());
            cs.min = present.front();
            cs.max = present.back();
            const std::size_t n = present.size();
            cs.median = n % 2 ? present[n / 2] : 0.5 * (present[n / 2 - 1] + present[n / 2]);
        }
        s.columns.push_back(cs);

        if (c.schema.role == ColumnRole::target) {
            std::map<int, std::size_t> counts;
            for (double v : c.values) counts[static_cast<int>(v)]++;
            for (auto [label, count] : counts)
                s.class_balance[label] =
                    static_cast<double>(count) / static_cast<double>(ds.n_rows);
        }
    }
    return s;
}

nlohmann::json summary_to_json(const DatasetSummary& s) {
    nlohmann::json doc;
    doc["n_rows"] = s.n_rows;
    doc["columns"] = nlohmann::json::array();
    for (const auto& c : s.columns) {
        nlohmann::json col{{"name", c.name}, {"count", c.count}, {"missing", c.missing}};
        if (c.numeric && c.count > 0) {
            col["min"] = c.min;
            col["median"] = c.median;
            col["max"] = c.max;
        }
        doc["columns"].push_back(col);
    }
    if (!s.class_balance.empty()) {
        nlohmann::json bal;
        for (auto [label, frac] : s.class_balance) bal[std::to_string(label)] = frac;
        doc["class_balance"] = bal;
    }
    return doc;
}

} // namespace tabml::dataio

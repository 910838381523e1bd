#include "models_impl.hpp"

#include <cmath>

namespace tabml::models {

std::string to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::logreg: return "logreg";
    case ModelKind::svm_rbf: return "svm_rbf";
    case ModelKind::random_forest: return "random_forest";
    case ModelKind::extra_trees: return "extra_trees";
    case ModelKind::grad_boost: return "grad_boost";
    }
    return "?";
}

ModelKind model_kind_from_string(const std::string& s) {
    if (s == "logreg") return ModelKind::logreg;
    if (s == "svm_rbf") return ModelKind::svm_rbf;
    if (s == "random_forest") return ModelKind::random_forest;
    if (s == "extra_trees") return ModelKind::extra_trees;
    if (s == "grad_boost") return ModelKind::grad_boost;
    throw Error(ErrorKind::config, "unknown model kind '" + s + "'");
}

bool is_tree_model(ModelKind kind) {
    return kind == ModelKind::random_forest || kind == ModelKind::extra_trees ||
           kind == ModelKind::grad_boost;
}

ClassifierSpec ClassifierSpec::defaults(ModelKind kind, std::uint64_t seed) {
    ClassifierSpec spec;
    spec.kind = kind;
    spec.seed = seed;
    switch (kind) {
    case ModelKind::grad_boost:
        spec.n_trees = 200;
        spec.max_depth = 3;
        break;
    case ModelKind::random_forest:
    case ModelKind::extra_trees:
        spec.n_trees = 300;
        spec.max_depth = -1;
        break;
    default:
        break;
    }
    return spec;
}

ClassifierSpec ClassifierSpec::from_json(const nlohmann::json& doc, std::uint64_t seed) {
    if (doc.is_string())
        return defaults(model_kind_from_string(doc.get<std::string>()), seed);
    if (!doc.is_object() || !doc.contains("name"))
        throw Error(ErrorKind::config, "model spec must be a name or an object with 'name'");
    ClassifierSpec spec = defaults(model_kind_from_string(doc.at("name").get<std::string>()), seed);
    if (doc.contains("seed")) spec.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("max_iter")) spec.max_iter = doc.at("max_iter").get<int>();
    if (doc.contains("balanced")) spec.balanced = doc.at("balanced").get<bool>();
    if (doc.contains("C")) spec.C = doc.at("C").get<double>();
    if (doc.contains("kkt_tol")) spec.kkt_tol = doc.at("kkt_tol").get<double>();
    if (doc.contains("n_trees")) spec.n_trees = doc.at("n_trees").get<int>();
    if (doc.contains("learning_rate")) spec.learning_rate = doc.at("learning_rate").get<double>();
    if (doc.contains("max_depth")) spec.max_depth = doc.at("max_depth").get<int>();
    spec.validate();
    return spec;
}

nlohmann::json ClassifierSpec::to_json() const {
    nlohmann::json doc{{"name", to_string(kind)}, {"seed", seed}};
    switch (kind) {
    case ModelKind::logreg:
        doc["max_iter"] = max_iter;
        doc["balanced"] = balanced;
        break;
    case ModelKind::svm_rbf:
        doc["C"] = C;
        doc["kkt_tol"] = kkt_tol;
        break;
    case ModelKind::grad_boost:
        doc["n_trees"] = n_trees;
        doc["learning_rate"] = learning_rate;
        doc["max_depth"] = max_depth;
        break;
    default:
        doc["n_trees"] = n_trees;
        break;
    }
    return doc;
}

void ClassifierSpec::validate() const {
    if (n_trees <= 0) throw Error(ErrorKind::config, "n_trees must be positive");
    if (!(C > 0.0)) throw Error(ErrorKind::config, "C must be positive");
    if (!(learning_rate > 0.0)) throw Error(ErrorKind::config, "learning_rate must be positive");
    if (max_iter <= 0) throw Error(ErrorKind::config, "max_iter must be positive");
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

std::vector<double> class_weights(const std::vector<int>& y, bool balanced) {
    const std::size_t n = y.size();
    if (!balanced) return std::vector<double>(n, 1.0);
    std::size_t n_pos = 0;
    for (int v : y) n_pos += static_cast<std::size_t>(v);
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw Error(ErrorKind::data, "class weights need both classes present");
    const double w_neg = static_cast<double>(n) / (2.0 * static_cast<double>(n_neg));
    const double w_pos = static_cast<double>(n) / (2.0 * static_cast<double>(n_pos));
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = y[i] ? w_pos : w_neg;
    return w;
}

void Classifier::check_width(const Matrix& x) const {
    if (x.cols() != n_features())
        throw Error(ErrorKind::contract,
                    "input has " + std::to_string(x.cols()) + " features, model expects " +
                        std::to_string(n_features()));
}

Matrix Classifier::predict_proba(const Matrix& x) const {
    const auto pos = positive_proba(x);
    Matrix out(x.rows(), 2);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        out(i, 1) = pos[i];
        out(i, 0) = 1.0 - pos[i];
    }
    return out;
}

std::unique_ptr<Classifier> fit_classifier(const ClassifierSpec& spec, const Matrix& x,
                                           const std::vector<int>& y) {
    spec.validate();
    if (x.rows() != y.size())
        throw Error(ErrorKind::contract, "feature matrix and label vector disagree on n");
    if (x.rows() == 0) throw Error(ErrorKind::data, "cannot fit on an empty dataset");

    switch (spec.kind) {
    case ModelKind::logreg: return fit_logreg(spec, x, y);
    case ModelKind::svm_rbf: return fit_svm_smo(spec, x, y);
    case ModelKind::random_forest: return fit_random_forest(spec, x, y);
    case ModelKind::extra_trees: return fit_extra_trees(spec, x, y);
    case ModelKind::grad_boost: return fit_gradient_boosting(spec, x, y);
    }
    throw Error(ErrorKind::config, "unhandled model kind");
}

// ---------------------------------------------------------------------------
// Serialization (versioned JSON)
// ---------------------------------------------------------------------------

namespace {
constexpr int kFormatVersion = 1;
}

nlohmann::json tree_to_json(const Tree& tree) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : tree.nodes) {
        nodes.push_back({{"feature", n.feature},
                         {"threshold", n.threshold},
                         {"left", n.left},
                         {"right", n.right},
                         {"value", n.value},
                         {"cover", n.cover}});
    }
    return nodes;
}

Tree tree_from_json(const nlohmann::json& doc) {
    Tree tree;
    for (const auto& item : doc) {
        TreeNode n;
        n.feature = item.at("feature").get<int>();
        n.threshold = item.at("threshold").get<double>();
        n.left = item.at("left").get<int>();
        n.right = item.at("right").get<int>();
        n.value = item.at("value").get<double>();
        n.cover = item.at("cover").get<double>();
        tree.nodes.push_back(n);
    }
    return tree;
}

nlohmann::json LogRegModel::to_json() const {
    return {{"format_version", kFormatVersion}, {"model", "logreg"},   {"weights", weights},
            {"bias", bias},                     {"iterations", iterations},
            {"converged", converged},           {"seed", seed}};
}

nlohmann::json SvmRbfModel::to_json() const {
    nlohmann::json sv = nlohmann::json::array();
    for (std::size_t i = 0; i < support_vectors.rows(); ++i) {
        auto row = support_vectors.row(i);
        sv.push_back(std::vector<double>(row.begin(), row.end()));
    }
    return {{"format_version", kFormatVersion},
            {"model", "svm_rbf"},
            {"support_vectors", sv},
            {"dual_coef", dual_coef},
            {"bias", bias},
            {"gamma", gamma},
            {"platt_a", platt_a},
            {"platt_b", platt_b},
            {"iterations", iterations},
            {"seed", seed}};
}

nlohmann::json ForestModel::to_json() const {
    nlohmann::json trees_doc = nlohmann::json::array();
    for (const auto& t : trees) trees_doc.push_back(tree_to_json(t));
    return {{"format_version", kFormatVersion},
            {"model", to_string(kind)},
            {"n_features", feature_count},
            {"trees", trees_doc},
            {"seed", seed}};
}

nlohmann::json GbmModel::to_json() const {
    nlohmann::json trees_doc = nlohmann::json::array();
    for (const auto& t : trees) trees_doc.push_back(tree_to_json(t));
    return {{"format_version", kFormatVersion},
            {"model", "grad_boost"},
            {"n_features", feature_count},
            {"base_score", base_score},
            {"learning_rate", learning_rate},
            {"trees", trees_doc},
            {"seed", seed}};
}

std::unique_ptr<Classifier> classifier_from_json(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("model") || !doc.contains("format_version"))
        throw Error(ErrorKind::config, "not a serialized model document");
    if (doc.at("format_version").get<int>() != kFormatVersion)
        throw Error(ErrorKind::config, "unsupported model format version");
    const std::string model = doc.at("model").get<std::string>();

    if (model == "logreg") {
        auto m = std::make_unique<LogRegModel>();
        m->weights = doc.at("weights").get<std::vector<double>>();
        m->bias = doc.at("bias").get<double>();
        m->iterations = doc.at("iterations").get<int>();
        m->converged = doc.at("converged").get<bool>();
        m->seed = doc.at("seed").get<std::uint64_t>();
        return m;
    }
    if (model == "svm_rbf") {
        auto m = std::make_unique<SvmRbfModel>();
        std::vector<std::vector<double>> sv;
        for (const auto& row : doc.at("support_vectors"))
            sv.push_back(row.get<std::vector<double>>());
        m->support_vectors = Matrix::from_rows(sv);
        m->dual_coef = doc.at("dual_coef").get<std::vector<double>>();
        m->bias = doc.at("bias").get<double>();
        m->gamma = doc.at("gamma").get<double>();
        m->platt_a = doc.at("platt_a").get<double>();
        m->platt_b = doc.at("platt_b").get<double>();
        m->iterations = doc.at("iterations").get<long>();
        m->seed = doc.at("seed").get<std::uint64_t>();
        return m;
    }
    if (model == "random_forest" || model == "extra_trees") {
        auto m = std::make_unique<ForestModel>();
        m->kind = model_kind_from_string(model);
        m->feature_count = doc.at("n_features").get<std::size_t>();
        for (const auto& t : doc.at("trees")) m->trees.push_back(tree_from_json(t));
        m->seed = doc.at("seed").get<std::uint64_t>();
        m->refresh_view();
        return m;
    }
    if (model == "grad_boost") {
        auto m = std::make_unique<GbmModel>();
        m->feature_count = doc.at("n_features").get<std::size_t>();
        m->base_score = doc.at("base_score").get<double>();
        m->learning_rate = doc.at("learning_rate").get<double>();
        for (const auto& t : doc.at("trees")) m->trees.push_back(tree_from_json(t));
        m->seed = doc.at("seed").get<std::uint64_t>();
        m->refresh_view();
        return m;
    }
    throw Error(ErrorKind::config, "unknown serialized model '" + model + "'");
}

// Platt's sigmoid fit with the Lin-Weng-Keerthi Newton iteration and
// prior-smoothed targets.
std::pair<double, double> platt_fit(const std::vector<double>& scores, const std::vector<int>& y) {
    const std::size_t n = scores.size();
    if (n != y.size() || n == 0)
        throw Error(ErrorKind::contract, "platt_fit needs matching non-empty score/label vectors");
    double prior1 = 0.0;
    for (int v : y) prior1 += v;
    const double prior0 = static_cast<double>(n) - prior1;

    const double hi_target = (prior1 + 1.0) / (prior1 + 2.0);
    const double lo_target = 1.0 / (prior0 + 2.0);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = y[i] ? hi_target : lo_target;

    double a = 0.0;
    double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
    const int max_iter = 100;
    const double min_step = 1e-10, sigma = 1e-12, eps = 1e-5;

    auto objective = [&](double pa, double pb) {
        double obj = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = pa * scores[i] + pb;
            // stable cross-entropy in terms of z
            if (z >= 0) obj += t[i] * z + std::log1p(std::exp(-z));
            else obj += (t[i] - 1.0) * z + std::log1p(std::exp(z));
        }
        return obj;
    };

    double fval = objective(a, b);
    for (int iter = 0; iter < max_iter; ++iter) {
        double h11 = sigma, h22 = sigma, h21 = 0.0, g1 = 0.0, g2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double z = a * scores[i] + b;
            const double p = sigmoid(-z); // P(y=1): note the Platt sign convention
            const double q = 1.0 - p;
            const double d2 = p * q;
            h11 += scores[i] * scores[i] * d2;
            h22 += d2;
            h21 += scores[i] * d2;
            const double d1 = t[i] - p;
            g1 += scores[i] * d1;
            g2 += d1;
        }
        if (std::fabs(g1) < eps && std::fabs(g2) < eps) break;

        const double det = h11 * h22 - h21 * h21;
        const double da = -(h22 * g1 - h21 * g2) / det;
        const double db = -(-h21 * g1 + h11 * g2) / det;
        const double gd = g1 * da + g2 * db;

        double step = 1.0;
        while (step >= min_step) {
            const double new_a = a + step * da;
            const double new_b = b + step * db;
            const double new_f = objective(new_a, new_b);
            if (new_f < fval + 1e-4 * step * gd) {
                a = new_a;
                b = new_b;
                fval = new_f;
                break;
            }
            step /= 2.0;
        }
        if (step < min_step) break;
    }
    return {a, b};
}

} // namespace tabml::models

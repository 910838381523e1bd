#include "tabml/explain.hpp"

#include <algorithm>
#include <cmath>

#include "tabml/stats.hpp"

namespace tabml::explain {

using models::Tree;
using models::TreeEnsembleView;

namespace {

// Path-dependent TreeSHAP (the polynomial-time algorithm over decision paths).
// The path records, per unique feature encountered, the fraction of subsets
// flowing down when the feature is out of the subset (zero_fraction, cover
// proportions) or in it (one_fraction), plus the permutation weight pweight.

struct PathElement {
    int feature = -1;
    double zero_fraction = 0.0;
    double one_fraction = 0.0;
    double pweight = 0.0;
};

void extend_path(PathElement* path, std::size_t unique_depth, double zero_fraction,
                 double one_fraction, int feature) {
    path[unique_depth] = {feature, zero_fraction, one_fraction,
                          unique_depth == 0 ? 1.0 : 0.0};
    const double d1 = static_cast<double>(unique_depth + 1);
    for (int i = static_cast<int>(unique_depth) - 1; i >= 0; --i) {
        path[i + 1].pweight += one_fraction * path[i].pweight * (i + 1) / d1;
        path[i].pweight = zero_fraction * path[i].pweight *
                          (static_cast<double>(unique_depth) - i) / d1;
    }
}

void unwind_path(PathElement* path, std::size_t unique_depth, std::size_t path_index) {
    const double one_fraction = path[path_index].one_fraction;
    const double zero_fraction = path[path_index].zero_fraction;
    const double d1 = static_cast<double>(unique_depth + 1);
    double next_one = path[unique_depth].pweight;

    for (int i = static_cast<int>(unique_depth) - 1; i >= 0; --i) {
        if (one_fraction != 0.0) {
            const double tmp = path[i].pweight;
            path[i].pweight = next_one * d1 / ((i + 1) * one_fraction);
            next_one = tmp - path[i].pweight * zero_fraction *
                                 (static_cast<double>(unique_depth) - i) / d1;
        } else {
            path[i].pweight =
                path[i].pweight * d1 / (zero_fraction * (static_cast<double>(unique_depth) - i));
        }
    }
    for (std::size_t i = path_index; i < unique_depth; ++i) {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

double unwound_path_sum(const PathElement* path, std::size_t unique_depth,
                        std::size_t path_index) {
    const double one_fraction = path[path_index].one_fraction;
    const double zero_fraction = path[path_index].zero_fraction;
    const double d1 = static_cast<double>(unique_depth + 1);
    double next_one = path[unique_depth].pweight;
    double total = 0.0;

    for (int i = static_cast<int>(unique_depth) - 1; i >= 0; --i) {
        if (one_fraction != 0.0) {
            const double tmp = next_one * d1 / ((i + 1) * one_fraction);
            total += tmp;
            next_one = path[i].pweight -
                       tmp * zero_fraction * (static_cast<double>(unique_depth) - i) / d1;
        } else {
            total += path[i].pweight /
                     (zero_fraction * (static_cast<double>(unique_depth) - i) / d1);
        }
    }
    return total;
}

class TreeShapWalker {
public:
    TreeShapWalker(const Tree& tree, std::span<const double> x, std::span<double> phi)
        : tree_(tree), x_(x), phi_(phi) {
        std::size_t depth = max_depth(0, 0) + 2;
        buffer_.resize((depth + 1) * (depth + 2) / 2 + depth + 1);
    }

    void run() { recurse(0, 0, buffer_.data(), 1.0, 1.0, -1); }

private:
    std::size_t max_depth(int node, std::size_t depth) const {
        const auto& n = tree_.nodes[node];
        if (n.is_leaf()) return depth;
        return std::max(max_depth(n.left, depth + 1), max_depth(n.right, depth + 1));
    }

    void recurse(int node_index, std::size_t unique_depth, PathElement* parent_path,
                 double parent_zero_fraction, double parent_one_fraction,
                 int parent_feature) {
        PathElement* path = parent_path + unique_depth + 1;
        std::copy(parent_path, parent_path + unique_depth + 1, path);
        extend_path(path, unique_depth, parent_zero_fraction, parent_one_fraction,
                    parent_feature);

        const auto& node = tree_.nodes[node_index];
        if (node.is_leaf()) {
            for (std::size_t i = 1; i <= unique_depth; ++i) {
                const double w = unwound_path_sum(path, unique_depth, i);
                const PathElement& el = path[i];
                phi_[el.feature] += w * (el.one_fraction - el.zero_fraction) * node.value;
            }
            return;
        }

        if (node.cover <= 0.0)
            throw Error(ErrorKind::contract, "tree_shap requires positive cover counts");
        const bool goes_left = x_[node.feature] <= node.threshold;
        const int hot = goes_left ? node.left : node.right;
        const int cold = goes_left ? node.right : node.left;
        const double hot_zero_fraction = tree_.nodes[hot].cover / node.cover;
        const double cold_zero_fraction = tree_.nodes[cold].cover / node.cover;

        // undo an earlier split on the same feature before re-splitting on it
        double incoming_zero = 1.0, incoming_one = 1.0;
        std::size_t path_index = 0;
        for (; path_index <= unique_depth; ++path_index)
            if (path[path_index].feature == node.feature) break;
        if (path_index != unique_depth + 1) {
            incoming_zero = path[path_index].zero_fraction;
            incoming_one = path[path_index].one_fraction;
            unwind_path(path, unique_depth, path_index);
            unique_depth -= 1;
        }

        recurse(hot, unique_depth + 1, path, hot_zero_fraction * incoming_zero, incoming_one,
                node.feature);
        recurse(cold, unique_depth + 1, path, cold_zero_fraction * incoming_zero, 0.0,
                node.feature);
    }

    const Tree& tree_;
    std::span<const double> x_;
    std::span<double> phi_;
    std::vector<PathElement> buffer_;
};

} // namespace

std::vector<double> ShapAttribution::mean_abs() const {
    std::vector<double> out(phi.cols(), 0.0);
    for (std::size_t i = 0; i < phi.rows(); ++i)
        for (std::size_t j = 0; j < phi.cols(); ++j) out[j] += std::fabs(phi(i, j));
    if (phi.rows() > 0)
        for (double& v : out) v /= static_cast<double>(phi.rows());
    return out;
}

std::vector<double> raw_output(const models::Classifier& model, const Matrix& x) {
    const TreeEnsembleView* view = model.tree_view();
    if (!view) throw Error(ErrorKind::contract, "model does not expose a tree ensemble");
    std::vector<double> out(x.rows(), view->base_score);
    for (const auto& tree : *view->trees)
        for (std::size_t i = 0; i < x.rows(); ++i)
            out[i] += view->scale * tree.predict(x.row(i));
    return out;
}

ShapAttribution tree_shap(const models::Classifier& model, const Matrix& x,
                          const std::vector<std::string>& feature_names, std::size_t workers) {
    const TreeEnsembleView* view = model.tree_view();
    if (!view) throw Error(ErrorKind::contract, "tree_shap requires a tree-ensemble model");
    if (x.cols() != model.n_features())
        throw Error(ErrorKind::contract, "tree_shap input width mismatch");
    for (const auto& tree : *view->trees)
        for (const auto& node : tree.nodes)
            if (node.cover <= 0.0)
                throw Error(ErrorKind::contract, "tree without cover counts");

    ShapAttribution attr;
    attr.phi = Matrix(x.rows(), x.cols(), 0.0);
    attr.space = view->space;
    attr.feature_names = feature_names;

    double expected = view->base_score;
    for (const auto& tree : *view->trees) expected += view->scale * tree.expected_value();
    attr.base_value = expected;

    parallel_for(x.rows(), worker_count(workers), [&](std::size_t i) {
        std::vector<double> phi_row(x.cols(), 0.0);
        std::vector<double> tree_phi(x.cols());
        for (const auto& tree : *view->trees) {
            std::fill(tree_phi.begin(), tree_phi.end(), 0.0);
            TreeShapWalker walker(tree, x.row(i), tree_phi);
            walker.run();
            for (std::size_t j = 0; j < x.cols(); ++j)
                phi_row[j] += view->scale * tree_phi[j];
        }
        for (std::size_t j = 0; j < x.cols(); ++j) attr.phi(i, j) = phi_row[j];
    });
    return attr;
}

ConsensusRanking consensus_rank(const std::vector<ShapAttribution>& attributions) {
    if (attributions.empty())
        throw Error(ErrorKind::contract, "consensus_rank needs at least one attribution");
    const auto& names = attributions[0].feature_names;
    const std::size_t p = attributions[0].phi.cols();
    for (const auto& a : attributions)
        if (a.phi.cols() != p || a.feature_names != names)
            throw Error(ErrorKind::contract, "attributions disagree on the feature set");

    ConsensusRanking out;
    out.feature_names = names;
    out.average_rank.assign(p, 0.0);
    for (const auto& a : attributions) {
        auto importance = a.mean_abs();
        out.mean_abs_per_model.push_back(importance);
        // rank 1 = largest mean |phi|; ties share the average rank
        std::vector<double> negated(p);
        for (std::size_t j = 0; j < p; ++j) negated[j] = -importance[j];
        const auto ranks = stats::average_ranks(negated).ranks;
        for (std::size_t j = 0; j < p; ++j) out.average_rank[j] += ranks[j];
    }
    for (double& r : out.average_rank) r /= static_cast<double>(attributions.size());

    out.order.resize(p);
    std::iota(out.order.begin(), out.order.end(), 0);
    std::sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
        if (out.average_rank[a] != out.average_rank[b])
            return out.average_rank[a] < out.average_rank[b];
        const std::string na = a < names.size() ? names[a] : std::to_string(a);
        const std::string nb = b < names.size() ? names[b] : std::to_string(b);
        return na < nb;
    });
    return out;
}

std::string select_strongest_tree_model(const std::vector<eval::CVSummary>& summaries) {
    const eval::CVSummary* best = nullptr;
    for (const auto& s : summaries) {
        models::ModelKind kind;
        try {
            kind = models::model_kind_from_string(s.model);
        } catch (const Error&) {
            continue;
        }
        if (!models::is_tree_model(kind)) continue;
        if (!best) {
            best = &s;
            continue;
        }
        if (s.mean.roc_auc > best->mean.roc_auc) best = &s;
        else if (s.mean.roc_auc == best->mean.roc_auc) {
            if (s.mean.recall > best->mean.recall) best = &s;
            else if (s.mean.recall == best->mean.recall && s.model < best->model) best = &s;
        }
    }
    if (!best) throw Error(ErrorKind::data, "no tree-ensemble summaries to select from");
    return best->model;
}

} // namespace tabml::explain

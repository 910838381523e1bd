#include <algorithm>
#include <cmath>
#include <numeric>

#include "models_impl.hpp"

namespace tabml::models {

double Tree::predict(std::span<const double> row) const {
    int idx = 0;
    while (!nodes[idx].is_leaf())
        idx = row[nodes[idx].feature] <= nodes[idx].threshold ? nodes[idx].left : nodes[idx].right;
    return nodes[idx].value;
}

double Tree::expected_value() const {
    const double root_cover = nodes[0].cover;
    double total = 0.0;
    for (const auto& n : nodes)
        if (n.is_leaf()) total += n.value * n.cover / root_cover;
    return total;
}

namespace {

struct TargetStats {
    double n = 0.0, sum = 0.0, sumsq = 0.0;

    void add(double t) {
        n += 1.0;
        sum += t;
        sumsq += t * t;
    }
    void remove(double t) {
        n -= 1.0;
        sum -= t;
        sumsq -= t * t;
    }
};

double impurity(const TargetStats& s, SplitCriterion criterion) {
    if (s.n <= 0.0) return 0.0;
    const double mean = s.sum / s.n;
    if (criterion == SplitCriterion::gini) {
        // binary targets: 1 - p0^2 - p1^2
        return 1.0 - mean * mean - (1.0 - mean) * (1.0 - mean);
    }
    return std::max(0.0, s.sumsq / s.n - mean * mean);
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0; // weighted child impurity, lower is better
};

class CartBuilder {
public:
    CartBuilder(const Matrix& x, const std::vector<double>& target, const CartConfig& config,
                Rng& rng, const std::vector<double>* hessian)
        : x_(x), target_(target), config_(config), rng_(rng), hessian_(hessian) {}

    Tree build(std::vector<std::size_t> samples) {
        tree_.nodes.clear();
        grow(std::move(samples), 0);
        return std::move(tree_);
    }

private:
    static constexpr double kMinGain = 1e-12;

    int grow(std::vector<std::size_t> samples, int depth) {
        TargetStats stats;
        for (std::size_t s : samples) stats.add(target_[s]);

        const int node_index = static_cast<int>(tree_.nodes.size());
        tree_.nodes.emplace_back();
        tree_.nodes[node_index].cover = stats.n;

        const bool depth_capped = config_.max_depth >= 0 && depth >= config_.max_depth;
        const double node_impurity = impurity(stats, config_.criterion);
        SplitChoice split;
        if (!depth_capped && samples.size() >= static_cast<std::size_t>(config_.min_samples_split) &&
            node_impurity > kMinGain)
            split = find_split(samples, stats, node_impurity);

        if (split.feature < 0) {
            tree_.nodes[node_index].value = leaf_value(samples, stats);
            return node_index;
        }

        std::vector<std::size_t> left, right;
        left.reserve(samples.size());
        for (std::size_t s : samples)
            (x_(s, split.feature) <= split.threshold ? left : right).push_back(s);
        samples.clear();
        samples.shrink_to_fit();

        tree_.nodes[node_index].feature = split.feature;
        tree_.nodes[node_index].threshold = split.threshold;
        const int left_index = grow(std::move(left), depth + 1);
        const int right_index = grow(std::move(right), depth + 1);
        tree_.nodes[node_index].left = left_index;
        tree_.nodes[node_index].right = right_index;
        return node_index;
    }

    double leaf_value(const std::vector<std::size_t>& samples, const TargetStats& stats) const {
        if (!hessian_) return stats.sum / stats.n;
        double hess_sum = 0.0;
        for (std::size_t s : samples) hess_sum += (*hessian_)[s];
        if (hess_sum <= 1e-16) return 0.0;
        return stats.sum / hess_sum; // one Newton step: sum(gradient) / sum(hessian)
    }

    std::vector<int> candidate_features() {
        const int p = static_cast<int>(x_.cols());
        std::vector<int> feats(p);
        std::iota(feats.begin(), feats.end(), 0);
        if (config_.max_features < 1 || config_.max_features >= p) return feats;
        // partial Fisher-Yates draw of max_features distinct features
        for (int i = 0; i < config_.max_features; ++i) {
            const int j = i + static_cast<int>(rng_.below(static_cast<std::uint64_t>(p - i)));
            std::swap(feats[i], feats[j]);
        }
        feats.resize(config_.max_features);
        return feats;
    }

    SplitChoice find_split(const std::vector<std::size_t>& samples, const TargetStats& total,
                           double node_impurity) {
        SplitChoice best;
        double best_score = node_impurity - kMinGain; // must strictly improve
        const auto feats = candidate_features();
        for (int f : feats) {
            if (config_.mode == SplitMode::best) scan_best(f, samples, total, best, best_score);
            else scan_random(f, samples, total, best, best_score);
        }
        return best;
    }

    void scan_best(int feature, const std::vector<std::size_t>& samples, const TargetStats& total,
                   SplitChoice& best, double& best_score) {
        auto& pairs = scratch_;
        pairs.clear();
        pairs.reserve(samples.size());
        for (std::size_t s : samples) pairs.emplace_back(x_(s, feature), target_[s]);
        std::sort(pairs.begin(), pairs.end());
        if (pairs.front().first == pairs.back().first) return;

        TargetStats left, right = total;
        for (std::size_t i = 0; i + 1 < pairs.size(); ++i) {
            left.add(pairs[i].second);
            right.remove(pairs[i].second);
            if (pairs[i].first == pairs[i + 1].first) continue;
            const double score = (left.n * impurity(left, config_.criterion) +
                                  right.n * impurity(right, config_.criterion)) /
                                 total.n;
            if (score < best_score) {
                best_score = score;
                best.feature = feature;
                best.threshold = pairs[i].first + 0.5 * (pairs[i + 1].first - pairs[i].first);
                best.score = score;
            }
        }
    }

    void scan_random(int feature, const std::vector<std::size_t>& samples, const TargetStats& total,
                     SplitChoice& best, double& best_score) {
        double lo = x_(samples[0], feature), hi = lo;
        for (std::size_t s : samples) {
            lo = std::min(lo, x_(s, feature));
            hi = std::max(hi, x_(s, feature));
        }
        if (lo == hi) return;
        const double threshold = rng_.uniform(lo, hi);
        TargetStats left;
        for (std::size_t s : samples)
            if (x_(s, feature) <= threshold) left.add(target_[s]);
        TargetStats right = total;
        right.n -= left.n;
        right.sum -= left.sum;
        right.sumsq -= left.sumsq;
        if (left.n == 0.0 || right.n == 0.0) return;
        const double score = (left.n * impurity(left, config_.criterion) +
                              right.n * impurity(right, config_.criterion)) /
                             total.n;
        if (score < best_score) {
            best_score = score;
            best.feature = feature;
            best.threshold = threshold;
            best.score = score;
        }
    }

    const Matrix& x_;
    const std::vector<double>& target_;
    const CartConfig& config_;
    Rng& rng_;
    const std::vector<double>* hessian_;
    Tree tree_;
    std::vector<std::pair<double, double>> scratch_;
};

} // namespace

Tree fit_cart(const Matrix& x, const std::vector<double>& target,
              const std::vector<std::size_t>& sample_indices, const CartConfig& config, Rng& rng,
              const std::vector<double>* hessian) {
    if (sample_indices.empty()) throw Error(ErrorKind::data, "fit_cart needs at least one sample");
    if (target.size() != x.rows())
        throw Error(ErrorKind::contract, "target length does not match matrix rows");
    CartBuilder builder(x, target, config, rng, hessian);
    return builder.build(sample_indices);
}

} // namespace tabml::models

#include "tabml/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <nlohmann/json.hpp>

#include "tabml/preprocess.hpp"

namespace tabml::cluster {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double diff = a[j] - b[j];
        d += diff * diff;
    }
    return d;
}

std::size_t count_distinct_rows(const Matrix& x) {
    std::set<std::vector<double>> rows;
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto r = x.row(i);
        rows.emplace(r.begin(), r.end());
    }
    return rows.size();
}

struct LloydRun {
    Matrix centroids;
    std::vector<int> labels;
    double inertia = std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    std::vector<double> inertia_trace;
};

LloydRun run_lloyd(const Matrix& x, std::size_t k, Rng rng, const KMeansOptions& options) {
    const std::size_t n = x.rows(), p = x.cols();

    // k-means++ seeding
    Matrix centroids(k, p);
    std::vector<double> min_sq(n, std::numeric_limits<double>::infinity());
    {
        const std::size_t first = static_cast<std::size_t>(rng.below(n));
        for (std::size_t j = 0; j < p; ++j) centroids(0, j) = x(first, j);
        for (std::size_t c = 1; c < k; ++c) {
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                min_sq[i] = std::min(min_sq[i], sq_dist(x.row(i), centroids.row(c - 1)));
                total += min_sq[i];
            }
            std::size_t chosen = 0;
            if (total > 0.0) {
                const double target = rng.uniform01() * total;
                double acc = 0.0;
                chosen = n - 1;
                for (std::size_t i = 0; i < n; ++i) {
                    acc += min_sq[i];
                    if (acc >= target) {
                        chosen = i;
                        break;
                    }
                }
            } else {
                chosen = static_cast<std::size_t>(rng.below(n)); // all points coincide
            }
            for (std::size_t j = 0; j < p; ++j) centroids(c, j) = x(chosen, j);
        }
    }

    LloydRun run;
    run.labels.assign(n, 0);
    std::vector<std::size_t> counts(k);
    Matrix sums(k, p);

    for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
        // assignment
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            int best_c = 0;
            for (std::size_t c = 0; c < k; ++c) {
                const double d = sq_dist(x.row(i), centroids.row(c));
                if (d < best) {
                    best = d;
                    best_c = static_cast<int>(c);
                }
            }
            run.labels[i] = best_c;
            inertia += best;
        }
        run.inertia_trace.push_back(inertia);
        run.inertia = inertia;
        run.iterations = iter + 1;

        // update
        std::fill(counts.begin(), counts.end(), 0);
        std::fill(sums.data().begin(), sums.data().end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            counts[run.labels[i]]++;
            auto row = x.row(i);
            for (std::size_t j = 0; j < p; ++j) sums(run.labels[i], j) += row[j];
        }
        // empty-cluster repair: promote the point farthest from its centroid
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] > 0) continue;
            std::size_t farthest = 0;
            double worst = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[run.labels[i]] <= 1) continue;
                const double d = sq_dist(x.row(i), centroids.row(run.labels[i]));
                if (d > worst) {
                    worst = d;
                    farthest = i;
                }
            }
            const int old = run.labels[farthest];
            counts[old]--;
            auto row = x.row(farthest);
            for (std::size_t j = 0; j < p; ++j) sums(old, j) -= row[j];
            run.labels[farthest] = static_cast<int>(c);
            counts[c] = 1;
            for (std::size_t j = 0; j < p; ++j) sums(c, j) = row[j];
        }

        double max_shift = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            double shift_sq = 0.0;
            for (std::size_t j = 0; j < p; ++j) {
                const double updated = sums(c, j) / static_cast<double>(counts[c]);
                const double d = updated - centroids(c, j);
                shift_sq += d * d;
                centroids(c, j) = updated;
            }
            max_shift = std::max(max_shift, std::sqrt(shift_sq));
        }
        if (max_shift < options.tol) {
            // final assignment against the settled centroids
            double inertia_final = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                double best = std::numeric_limits<double>::infinity();
                int best_c = 0;
                for (std::size_t c = 0; c < k; ++c) {
                    const double d = sq_dist(x.row(i), centroids.row(c));
                    if (d < best) {
                        best = d;
                        best_c = static_cast<int>(c);
                    }
                }
                run.labels[i] = best_c;
                inertia_final += best;
            }
            run.inertia_trace.push_back(inertia_final);
            run.inertia = inertia_final;
            break;
        }
    }
    run.centroids = std::move(centroids);
    return run;
}

} // namespace

KMeansModel kmeans_fit(const Matrix& x, std::size_t k, std::uint64_t seed,
                       const KMeansOptions& options) {
    if (k == 0) throw Error(ErrorKind::config, "k must be positive");
    if (options.n_init == 0) throw Error(ErrorKind::config, "n_init must be positive");
    if (x.rows() == 0) throw Error(ErrorKind::data, "kmeans_fit needs data");
    if (count_distinct_rows(x) < k)
        throw Error(ErrorKind::data,
                    "k = " + std::to_string(k) + " exceeds the number of distinct points");

    const Rng base(seed);
    std::vector<LloydRun> runs(options.n_init);
    parallel_for(options.n_init, worker_count(options.workers), [&](std::size_t init) {
        runs[init] = run_lloyd(x, k, base.derive(init), options);
    });

    // best run by (inertia, init index) so parallel restarts stay deterministic
    std::size_t best = 0;
    for (std::size_t i = 1; i < runs.size(); ++i)
        if (runs[i].inertia < runs[best].inertia) best = i;

    KMeansModel model;
    model.k = k;
    model.centroids = std::move(runs[best].centroids);
    model.labels = std::move(runs[best].labels);
    model.inertia = runs[best].inertia;
    model.iterations = runs[best].iterations;
    model.inertia_trace = std::move(runs[best].inertia_trace);
    return model;
}

namespace {

std::vector<std::vector<std::size_t>> members_by_cluster(const std::vector<int>& labels) {
    int k = 0;
    for (int l : labels) {
        if (l < 0) throw Error(ErrorKind::contract, "negative cluster label");
        k = std::max(k, l + 1);
    }
    std::vector<std::vector<std::size_t>> members(k);
    for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(i);
    for (const auto& m : members)
        if (m.empty()) throw Error(ErrorKind::data, "empty cluster in labels");
    return members;
}

Matrix cluster_means(const Matrix& x, const std::vector<std::vector<std::size_t>>& members) {
    Matrix centroids(members.size(), x.cols(), 0.0);
    for (std::size_t c = 0; c < members.size(); ++c) {
        for (std::size_t i : members[c]) {
            auto row = x.row(i);
            for (std::size_t j = 0; j < x.cols(); ++j) centroids(c, j) += row[j];
        }
        for (std::size_t j = 0; j < x.cols(); ++j)
            centroids(c, j) /= static_cast<double>(members[c].size());
    }
    return centroids;
}

} // namespace

std::pair<double, SilhouetteDetail> silhouette(const Matrix& x, const std::vector<int>& labels) {
    if (labels.size() != x.rows())
        throw Error(ErrorKind::contract, "labels length does not match data");
    const auto members = members_by_cluster(labels);
    const std::size_t k = members.size();
    if (k < 2) throw Error(ErrorKind::data, "silhouette undefined for a single cluster");

    const std::size_t n = x.rows();
    SilhouetteDetail detail;
    detail.a.assign(n, 0.0);
    detail.b.assign(n, 0.0);
    detail.s.assign(n, 0.0);

    // mean distance from point i to every cluster
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<double> mean_dist(k, 0.0);
        for (std::size_t c = 0; c < k; ++c) {
            double sum = 0.0;
            for (std::size_t j : members[c]) sum += std::sqrt(sq_dist(x.row(i), x.row(j)));
            mean_dist[c] = sum;
        }
        const int own = labels[i];
        const std::size_t own_size = members[own].size();
        if (own_size == 1) {
            detail.s[i] = 0.0; // singleton convention
            detail.a[i] = 0.0;
        } else {
            detail.a[i] = mean_dist[own] / static_cast<double>(own_size - 1); // excludes self
        }
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < k; ++c) {
            if (static_cast<int>(c) == own) continue;
            nearest = std::min(nearest, mean_dist[c] / static_cast<double>(members[c].size()));
        }
        detail.b[i] = nearest;
        if (own_size > 1) {
            const double denom = std::max(detail.a[i], detail.b[i]);
            detail.s[i] = denom > 0.0 ? (detail.b[i] - detail.a[i]) / denom : 0.0;
        }
    }
    const double mean_s =
        std::accumulate(detail.s.begin(), detail.s.end(), 0.0) / static_cast<double>(n);
    return {mean_s, std::move(detail)};
}

ScatterDecomposition scatter_decomposition(const Matrix& x, const std::vector<int>& labels) {
    const auto members = members_by_cluster(labels);
    const std::size_t k = members.size();
    const Matrix centroids = cluster_means(x, members);

    std::vector<double> grand(x.cols(), 0.0);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        auto row = x.row(i);
        for (std::size_t j = 0; j < x.cols(); ++j) grand[j] += row[j];
    }
    for (double& g : grand) g /= static_cast<double>(x.rows());

    ScatterDecomposition dec;
    dec.dispersion.assign(k, 0.0);
    for (std::size_t c = 0; c < k; ++c) {
        double between = 0.0;
        for (std::size_t j = 0; j < x.cols(); ++j) {
            const double d = centroids(c, j) - grand[j];
            between += d * d;
        }
        dec.between_trace += static_cast<double>(members[c].size()) * between;
        for (std::size_t i : members[c]) {
            const double sq = sq_dist(x.row(i), centroids.row(c));
            dec.within_trace += sq;
            dec.dispersion[c] += std::sqrt(sq);
        }
        dec.dispersion[c] /= static_cast<double>(members[c].size());
    }
    dec.centroid_distances = Matrix(k, k, 0.0);
    for (std::size_t a = 0; a < k; ++a)
        for (std::size_t b = a + 1; b < k; ++b) {
            const double d = std::sqrt(sq_dist(centroids.row(a), centroids.row(b)));
            dec.centroid_distances(a, b) = d;
            dec.centroid_distances(b, a) = d;
        }
    return dec;
}

double davies_bouldin(const Matrix& x, const std::vector<int>& labels) {
    const auto dec = scatter_decomposition(x, labels);
    const std::size_t k = dec.dispersion.size();
    if (k < 2) throw Error(ErrorKind::data, "davies_bouldin requires at least two clusters");

    double total = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
        double worst = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            if (i == j) continue;
            const double d = dec.centroid_distances(i, j);
            if (d <= 0.0)
                throw Error(ErrorKind::degenerate,
                            "davies_bouldin degenerate: clusters " + std::to_string(i) + " and " +
                                std::to_string(j) + " have coincident centroids");
            worst = std::max(worst, (dec.dispersion[i] + dec.dispersion[j]) / d);
        }
        total += worst;
    }
    return total / static_cast<double>(k);
}

CalinskiHarabasz calinski_harabasz(const Matrix& x, const std::vector<int>& labels) {
    const auto dec = scatter_decomposition(x, labels);
    const std::size_t k = dec.dispersion.size();
    const std::size_t n = x.rows();
    if (k < 2) throw Error(ErrorKind::data, "calinski_harabasz requires at least two clusters");
    if (n <= k)
        throw Error(ErrorKind::degenerate, "calinski_harabasz undefined for n <= k");

    CalinskiHarabasz ch;
    if (dec.within_trace <= 0.0) {
        ch.value = std::numeric_limits<double>::max(); // perfect point clusters
        ch.degenerate = true;
        return ch;
    }
    ch.value = (dec.between_trace / static_cast<double>(k - 1)) /
               (dec.within_trace / static_cast<double>(n - k));
    return ch;
}

ValidityIndices validity_indices(const Matrix& x, const std::vector<int>& labels) {
    ValidityIndices v;
    v.silhouette = silhouette(x, labels).first;
    v.davies_bouldin = davies_bouldin(x, labels);
    const auto ch = calinski_harabasz(x, labels);
    v.calinski_harabasz = ch.value;
    v.ch_degenerate = ch.degenerate;
    return v;
}

KSweepResult sweep_k(const Matrix& x, std::uint64_t seed, const SweepOptions& options) {
    if (options.k_min < 2 || options.k_max < options.k_min)
        throw Error(ErrorKind::config, "sweep range must satisfy 2 <= k_min <= k_max");

    KSweepResult sweep;
    for (std::size_t k = options.k_min; k <= options.k_max; ++k) {
        auto model = kmeans_fit(x, k, mix_seed(seed, k), options.kmeans);
        sweep.ks.push_back(k);
        sweep.indices.push_back(validity_indices(x, model.labels));
        sweep.models.push_back(std::move(model));
    }

    double best_sil = -std::numeric_limits<double>::infinity();
    for (const auto& v : sweep.indices) best_sil = std::max(best_sil, v.silhouette);

    std::size_t chosen = sweep.ks.front();
    for (std::size_t i = 0; i < sweep.ks.size(); ++i) {
        if (sweep.indices[i].silhouette >= best_sil - options.parsimony_margin) {
            chosen = sweep.ks[i];
            break;
        }
    }
    sweep.selected_k = chosen;

    std::size_t db_best = 0, ch_best = 0;
    for (std::size_t i = 1; i < sweep.ks.size(); ++i) {
        if (sweep.indices[i].davies_bouldin < sweep.indices[db_best].davies_bouldin) db_best = i;
        if (sweep.indices[i].calinski_harabasz > sweep.indices[ch_best].calinski_harabasz)
            ch_best = i;
    }
    sweep.db_agrees = sweep.ks[db_best] == chosen;
    sweep.ch_agrees = sweep.ks[ch_best] == chosen;

    std::ostringstream note;
    note << "selected k=" << chosen << ": smallest k with silhouette within "
         << options.parsimony_margin << " of the sweep maximum " << best_sil
         << "; davies_bouldin " << (sweep.db_agrees ? "agrees" : "prefers k=")
         << (sweep.db_agrees ? "" : std::to_string(sweep.ks[db_best])) << ", calinski_harabasz "
         << (sweep.ch_agrees ? "agrees" : "prefers k=")
         << (sweep.ch_agrees ? "" : std::to_string(sweep.ks[ch_best]));
    sweep.rationale = note.str();
    return sweep;
}

nlohmann::json sweep_to_json(const KSweepResult& sweep) {
    nlohmann::json doc;
    doc["sweep"] = nlohmann::json::array();
    for (std::size_t i = 0; i < sweep.ks.size(); ++i) {
        doc["sweep"].push_back({{"k", sweep.ks[i]},
                                {"silhouette", sweep.indices[i].silhouette},
                                {"davies_bouldin", sweep.indices[i].davies_bouldin},
                                {"calinski_harabasz", sweep.indices[i].calinski_harabasz},
                                {"ch_degenerate", sweep.indices[i].ch_degenerate},
                                {"inertia", sweep.models[i].inertia}});
    }
    doc["selected_k"] = sweep.selected_k;
    doc["rationale"] = sweep.rationale;
    doc["db_agrees"] = sweep.db_agrees;
    doc["ch_agrees"] = sweep.ch_agrees;
    return doc;
}

ProfileReport profile_clusters(const dataio::TabularDataset& positives,
                               const std::vector<int>& labels,
                               const std::vector<std::string>& features) {
    if (labels.size() != positives.n_rows)
        throw Error(ErrorKind::contract, "labels length does not match dataset");
    const auto members = members_by_cluster(labels);

    ProfileReport report;
    for (std::size_t c = 0; c < members.size(); ++c) {
        ClusterProfile profile;
        profile.cluster = static_cast<int>(c);
        profile.size = members[c].size();
        for (const auto& f : features) {
            const auto& col = positives.column(f);
            std::vector<double> vals;
            vals.reserve(members[c].size());
            for (std::size_t i : members[c]) vals.push_back(col.values[i]);
            profile.medians[f] = preprocess::median(std::move(vals));
        }
        report.clusters.push_back(std::move(profile));
    }

    // Subtype orientation for a two-cluster partition: the lower-insulin,
    // younger cluster matches the T1DM phenotype, the other T2DM. Purely
    // inferential; no ground-truth type labels exist.
    const bool has_insulin = std::find(features.begin(), features.end(), "Insulin") != features.end();
    const bool has_age = std::find(features.begin(), features.end(), "Age") != features.end();
    if (members.size() == 2 && has_insulin && has_age) {
        auto& c0 = report.clusters[0];
        auto& c1 = report.clusters[1];
        const double di = c0.medians["Insulin"] - c1.medians["Insulin"];
        const double da = c0.medians["Age"] - c1.medians["Age"];
        if (di == 0.0 && da == 0.0) {
            report.note = "clusters indistinguishable on Insulin and Age medians";
        } else if (di <= 0.0 && da <= 0.0) {
            c0.orientation = "T1DM-like";
            c1.orientation = "T2DM-like";
            report.note = "inferential: cluster 0 (lower insulin, younger) is T1DM-like; "
                          "cluster 1 is T2DM-like";
        } else if (di >= 0.0 && da >= 0.0) {
            c0.orientation = "T2DM-like";
            c1.orientation = "T1DM-like";
            report.note = "inferential: cluster 1 (lower insulin, younger) is T1DM-like; "
                          "cluster 0 is T2DM-like";
        } else {
            report.note = "indeterminate: insulin and age orderings disagree between clusters";
        }
    } else if (members.size() == 1) {
        report.note = "single cluster; no subtype orientation";
    }
    return report;
}

nlohmann::json profile_to_json(const ProfileReport& report) {
    nlohmann::json doc;
    doc["clusters"] = nlohmann::json::array();
    for (const auto& c : report.clusters) {
        nlohmann::json item{{"cluster", c.cluster}, {"size", c.size}, {"medians", c.medians}};
        if (!c.orientation.empty()) item["orientation"] = c.orientation;
        doc["clusters"].push_back(item);
    }
    doc["note"] = report.note;
    return doc;
}

} // namespace tabml::cluster

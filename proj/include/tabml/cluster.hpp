#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "tabml/common.hpp"
#include "tabml/dataio.hpp"

namespace tabml::cluster {

struct KMeansModel {
    std::size_t k = 0;
    Matrix centroids;               // k x p
    std::vector<int> labels;        // per point
    double inertia = 0.0;           // sum of squared point-centroid distances
    std::size_t iterations = 0;
    std::vector<double> inertia_trace; // recorded after each assignment step of the best run
};

struct KMeansOptions {
    std::size_t n_init = 10;
    std::size_t max_iter = 300;
    double tol = 1e-4; // max centroid movement
    std::size_t workers = 0;
};

// k-means++ seeding, Lloyd iterations, best of n_init restarts by (inertia,
// init index). Empty clusters are repaired by promoting the farthest point.
KMeansModel kmeans_fit(const Matrix& x, std::size_t k, std::uint64_t seed,
                       const KMeansOptions& options = {});

struct SilhouetteDetail {
    std::vector<double> a; // mean intra-cluster distance (self excluded)
    std::vector<double> b; // mean distance to the nearest other cluster
    std::vector<double> s; // (b-a)/max(a,b); 0 for singleton clusters
};

// Mean silhouette over points (Euclidean distances).
std::pair<double, SilhouetteDetail> silhouette(const Matrix& x, const std::vector<int>& labels);

double davies_bouldin(const Matrix& x, const std::vector<int>& labels);

struct CalinskiHarabasz {
    double value = 0.0;
    bool degenerate = false; // tr(W) == 0; value then holds the max-double sentinel
};

CalinskiHarabasz calinski_harabasz(const Matrix& x, const std::vector<int>& labels);

struct ScatterDecomposition {
    double between_trace = 0.0;          // tr(B_k)
    double within_trace = 0.0;           // tr(W_k)
    std::vector<double> dispersion;      // sigma_i: mean distance to own centroid
    Matrix centroid_distances;           // d_ij
};

ScatterDecomposition scatter_decomposition(const Matrix& x, const std::vector<int>& labels);

struct ValidityIndices {
    double silhouette = 0.0;
    double davies_bouldin = 0.0;
    double calinski_harabasz = 0.0;
    bool ch_degenerate = false;
};

ValidityIndices validity_indices(const Matrix& x, const std::vector<int>& labels);

struct KSweepResult {
    std::vector<std::size_t> ks;
    std::vector<ValidityIndices> indices;
    std::vector<KMeansModel> models;
    std::size_t selected_k = 0;
    std::string rationale;
    bool db_agrees = false; // argmin DB equals the selected k
    bool ch_agrees = false; // argmax CH equals the selected k
};

struct SweepOptions {
    std::size_t k_min = 2;
    std::size_t k_max = 8;
    double parsimony_margin = 0.005; // silhouette tolerance for preferring smaller k
    KMeansOptions kmeans;
};

// Sweeps k, recording all three indices; selects the smallest k whose
// silhouette is within parsimony_margin of the sweep maximum.
KSweepResult sweep_k(const Matrix& x, std::uint64_t seed, const SweepOptions& options = {});

nlohmann::json sweep_to_json(const KSweepResult& sweep);

struct ClusterProfile {
    int cluster = 0;
    std::size_t size = 0;
    std::map<std::string, double> medians; // feature -> median in original units
    std::string orientation;               // "T1DM-like" / "T2DM-like" / "" when k != 2
};

struct ProfileReport {
    std::vector<ClusterProfile> clusters;
    std::string note; // inferential orientation note
};

// Per-cluster medians over the given features in original (unstandardized)
// units. For k == 2 the lower-insulin / younger cluster is flagged
// "T1DM-like"; the note is explicitly inferential.
ProfileReport profile_clusters(const dataio::TabularDataset& positives,
                               const std::vector<int>& labels,
                               const std::vector<std::string>& features);

nlohmann::json profile_to_json(const ProfileReport& report);

} // namespace tabml::cluster

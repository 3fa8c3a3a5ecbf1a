#pragma once

// Character identification over feature vectors: an L2-regularized softmax
// regression trained full-batch with a validation-selected, seed-varied
// ensemble; a nearest-centroid fallback for degenerate label sets; and the
// k-means + optimal-assignment clustering baseline.

#include <filesystem>
#include <string>
#include <vector>

#include "comicid/core.hpp"

namespace comicid::clf {

struct TrainConfig {
    int epochs = 200;
    double learning_rate = 0.1;
    double l2 = 1e-3;
    double val_fraction = 0.1;
    int ensemble_size = 5;
    uint64_t seed = 0;
};

struct ClassifierModel {
    std::vector<std::string> classes;          // sorted label names seen in training
    size_t dim = 0;                            // feature dimension d
    std::vector<std::vector<double>> ensemble; // per member: row-major k x (d+1), bias folded into the last column

    bool operator==(const ClassifierModel&) const = default;
};

struct TrainSample {
    std::vector<double> x;
    size_t y = 0;  // class index
};

// Loss/gradient kernels, exposed for finite-difference checking. The bias
// column is excluded from regularization.
double softmax_loss(const std::vector<double>& weights, size_t k, size_t d, const std::vector<TrainSample>& batch,
                    double l2);
std::vector<double> softmax_gradient(const std::vector<double>& weights, size_t k, size_t d,
                                     const std::vector<TrainSample>& batch, double l2);
std::vector<double> softmax_probs(const std::vector<double>& weights, size_t k, size_t d,
                                  const std::vector<double>& x);

// Trains the ensemble on pseudo-labeled features. Each member gets its own
// validation split and initialization; the epoch with the best validation
// accuracy wins. Throws DegenerateTraining when fewer than two classes are
// present and ValidationError on empty labels or missing features.
ClassifierModel train(const FeatureTable& features, const PseudoLabelSet& pseudo_labels, const TrainConfig& config);

// Ensemble-averaged softmax prediction for every region in the table.
LabelAssignment predict(const ClassifierModel& model, const FeatureTable& features);

void save_model(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

// Nearest-centroid fallback (works with a single class).
struct CentroidModel {
    std::vector<std::string> classes;
    std::vector<std::vector<double>> centroids;
};

CentroidModel train_centroid(const FeatureTable& features, const PseudoLabelSet& pseudo_labels);
LabelAssignment predict_centroid(const CentroidModel& model, const FeatureTable& features);

// ---------------------------------------------------------------------------
// Clustering baseline
// ---------------------------------------------------------------------------

struct KMeansResult {
    std::vector<int> assignment;               // per point, cluster index in [0,k)
    std::vector<std::vector<double>> centers;
    std::vector<double> sse_history;           // SSE after each Lloyd iteration
    double sse = 0.0;
};

// Seeded k-means++ initialization followed by Lloyd iterations until the
// assignment stabilizes or max_iter is reached. Throws ValidationError when
// k exceeds the number of points.
KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, uint64_t seed, int max_iter = 100);

struct ClusterMapping {
    // nullopt marks a surplus cluster mapped to the sink (always wrong)
    std::map<int, std::optional<std::string>> cluster_to_name;
    double accuracy = 0.0;
};

// One-to-one cluster -> label mapping maximizing total correct points,
// computed by optimal assignment on the cluster x label count matrix.
ClusterMapping optimal_cluster_mapping(const std::vector<int>& cluster_assignment,
                                       const std::vector<std::string>& gt_labels);

// Exact Hungarian algorithm (minimization, rectangular costs padded square).
// Returns for each row the assigned column, or -1.
std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost);

}  // namespace comicid::clf

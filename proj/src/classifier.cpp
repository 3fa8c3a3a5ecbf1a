#include "comicid/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include <json.hpp>

#include "comicid/rng.hpp"

namespace comicid::clf {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Softmax kernels. Weights are row-major k x (d+1); column d is the bias.
// ---------------------------------------------------------------------------

std::vector<double> softmax_probs(const std::vector<double>& weights, size_t k, size_t d,
                                  const std::vector<double>& x) {
    if (x.size() != d) throw ValidationError("feature dimension mismatch: expected " + std::to_string(d));
    std::vector<double> logits(k, 0.0);
    size_t stride = d + 1;
    for (size_t c = 0; c < k; ++c) {
        double z = weights[c * stride + d];  // bias
        for (size_t j = 0; j < d; ++j) z += weights[c * stride + j] * x[j];
        logits[c] = z;
    }
    double zmax = *std::max_element(logits.begin(), logits.end());
    double total = 0.0;
    std::vector<double> probs(k);
    for (size_t c = 0; c < k; ++c) {
        probs[c] = std::exp(logits[c] - zmax);
        total += probs[c];
    }
    for (size_t c = 0; c < k; ++c) probs[c] /= total;
    return probs;
}

double softmax_loss(const std::vector<double>& weights, size_t k, size_t d, const std::vector<TrainSample>& batch,
                    double l2) {
    if (batch.empty()) throw ValidationError("softmax loss over an empty batch");
    double ce = 0.0;
    for (const auto& sample : batch) {
        std::vector<double> probs = softmax_probs(weights, k, d, sample.x);
        ce -= std::log(std::max(probs[sample.y], 1e-300));
    }
    ce /= static_cast<double>(batch.size());
    double reg = 0.0;
    size_t stride = d + 1;
    for (size_t c = 0; c < k; ++c)
        for (size_t j = 0; j < d; ++j)  // bias excluded
            reg += weights[c * stride + j] * weights[c * stride + j];
    return ce + 0.5 * l2 * reg;
}

std::vector<double> softmax_gradient(const std::vector<double>& weights, size_t k, size_t d,
                                     const std::vector<TrainSample>& batch, double l2) {
    if (batch.empty()) throw ValidationError("softmax gradient over an empty batch");
    size_t stride = d + 1;
    std::vector<double> grad(weights.size(), 0.0);
    for (const auto& sample : batch) {
        std::vector<double> probs = softmax_probs(weights, k, d, sample.x);
        for (size_t c = 0; c < k; ++c) {
            double delta = probs[c] - (c == sample.y ? 1.0 : 0.0);
            for (size_t j = 0; j < d; ++j) grad[c * stride + j] += delta * sample.x[j];
            grad[c * stride + d] += delta;
        }
    }
    double inv_n = 1.0 / static_cast<double>(batch.size());
    for (double& g : grad) g *= inv_n;
    for (size_t c = 0; c < k; ++c)
        for (size_t j = 0; j < d; ++j) grad[c * stride + j] += l2 * weights[c * stride + j];
    return grad;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

namespace {

void validate_train_config(const TrainConfig& cfg) {
    if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (cfg.l2 < 0.0) throw ValidationError("l2 must be >= 0");
    if (!(cfg.val_fraction > 0.0 && cfg.val_fraction < 1.0)) throw ValidationError("val_fraction must be in (0,1)");
    if (cfg.ensemble_size < 1) throw ValidationError("ensemble_size must be >= 1");
}

double subset_accuracy(const std::vector<double>& weights, size_t k, size_t d, const std::vector<TrainSample>& samples,
                       const std::vector<size_t>& idx) {
    if (idx.empty()) return 0.0;
    size_t correct = 0;
    for (size_t i : idx) {
        std::vector<double> probs = softmax_probs(weights, k, d, samples[i].x);
        size_t argmax = 0;
        for (size_t c = 1; c < k; ++c)
            if (probs[c] > probs[argmax]) argmax = c;
        if (argmax == samples[i].y) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(idx.size());
}

}  // namespace

ClassifierModel train(const FeatureTable& features, const PseudoLabelSet& pseudo_labels, const TrainConfig& config) {
    validate_train_config(config);
    if (pseudo_labels.empty()) throw ValidationError("cannot train on an empty pseudo-label set");

    std::set<std::string> class_set;
    for (const auto& [id, pseudo] : pseudo_labels) class_set.insert(pseudo.name);
    if (class_set.size() < 2)
        throw DegenerateTraining("pseudo labels contain " + std::to_string(class_set.size()) +
                                 " class(es); at least 2 are required");

    ClassifierModel model;
    model.classes.assign(class_set.begin(), class_set.end());

    std::vector<TrainSample> samples;
    for (const auto& [region_id, pseudo] : pseudo_labels) {
        auto it = features.find(region_id);
        if (it == features.end()) throw ValidationError("no feature vector for pseudo-labeled region " + region_id);
        size_t y = static_cast<size_t>(
            std::lower_bound(model.classes.begin(), model.classes.end(), pseudo.name) - model.classes.begin());
        samples.push_back({it->second, y});
    }
    model.dim = samples.front().x.size();
    for (const auto& s : samples)
        if (s.x.size() != model.dim) throw ValidationError("feature dimension mismatch in training set");

    size_t k = model.classes.size();
    size_t d = model.dim;
    size_t n = samples.size();
    size_t weight_count = k * (d + 1);

    for (int member = 0; member < config.ensemble_size; ++member) {
        Rng rng(derive_seed(config.seed, "clf-member", static_cast<uint64_t>(member)));

        // validation split: shuffled draw, skipping samples that would leave a
        // class without any training example
        std::vector<size_t> order(n);
        for (size_t i = 0; i < n; ++i) order[i] = i;
        rng.shuffle(order);
        size_t val_target = std::max<size_t>(1, static_cast<size_t>(std::floor(config.val_fraction * static_cast<double>(n))));

        std::vector<size_t> class_train_count(k, 0);
        for (const auto& s : samples) ++class_train_count[s.y];
        std::vector<bool> in_val(n, false);
        size_t val_taken = 0;
        for (size_t i : order) {
            if (val_taken >= val_target) break;
            if (class_train_count[samples[i].y] <= 1) continue;
            in_val[i] = true;
            --class_train_count[samples[i].y];
            ++val_taken;
        }
        std::vector<size_t> train_idx;
        std::vector<size_t> val_idx;
        for (size_t i = 0; i < n; ++i) (in_val[i] ? val_idx : train_idx).push_back(i);

        std::vector<TrainSample> train_batch;
        for (size_t i : train_idx) train_batch.push_back(samples[i]);

        std::vector<double> weights(weight_count);
        for (double& w : weights) w = 0.01 * rng.next_normal();

        double lr = config.learning_rate;
        double current_loss = softmax_loss(weights, k, d, train_batch, config.l2);
        double best_val = subset_accuracy(weights, k, d, samples, val_idx);
        std::vector<double> best_weights = weights;

        for (int epoch = 0; epoch < config.epochs; ++epoch) {
            std::vector<double> grad = softmax_gradient(weights, k, d, train_batch, config.l2);
            std::vector<double> candidate(weight_count);
            double candidate_loss = 0.0;
            bool stepped = false;
            // halve the learning rate until the step no longer increases the
            // loss; keeps the loss trajectory non-increasing on noisy labels
            for (int halving = 0; halving < 40; ++halving) {
                for (size_t w = 0; w < weight_count; ++w) candidate[w] = weights[w] - lr * grad[w];
                candidate_loss = softmax_loss(candidate, k, d, train_batch, config.l2);
                if (candidate_loss <= current_loss) {
                    stepped = true;
                    break;
                }
                lr *= 0.5;
            }
            if (!stepped) break;  // gradient step cannot improve at any usable rate
            weights.swap(candidate);
            current_loss = candidate_loss;
            double val_acc = subset_accuracy(weights, k, d, samples, val_idx);
            if (val_acc > best_val) {
                best_val = val_acc;
                best_weights = weights;
            }
        }
        model.ensemble.push_back(std::move(best_weights));
    }
    return model;
}

LabelAssignment predict(const ClassifierModel& model, const FeatureTable& features) {
    if (model.ensemble.empty()) throw ValidationError("classifier model has no ensemble members");
    size_t k = model.classes.size();
    LabelAssignment out;
    for (const auto& [region_id, x] : features) {
        if (x.size() != model.dim)
            throw ValidationError("feature dimension mismatch for region " + region_id + ": expected " +
                                  std::to_string(model.dim) + ", got " + std::to_string(x.size()));
        std::vector<double> averaged(k, 0.0);
        for (const auto& weights : model.ensemble) {
            std::vector<double> probs = softmax_probs(weights, k, model.dim, x);
            for (size_t c = 0; c < k; ++c) averaged[c] += probs[c];
        }
        for (size_t c = 0; c < k; ++c) averaged[c] /= static_cast<double>(model.ensemble.size());
        size_t argmax = 0;
        for (size_t c = 1; c < k; ++c)
            if (averaged[c] > averaged[argmax]) argmax = c;
        out.set(region_id, Label{model.classes[argmax], Confidence::prob(averaged[argmax])});
    }
    return out;
}

void save_model(const ClassifierModel& model, const std::filesystem::path& path) {
    json root;
    root["classes"] = model.classes;
    root["d"] = model.dim;
    root["ensemble"] = model.ensemble;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write model file: " + path.string());
    out << root.dump(2) << "\n";
}

ClassifierModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open model file: " + path.string());
    json root;
    try {
        root = json::parse(in);
        ClassifierModel model;
        model.classes = root.at("classes").get<std::vector<std::string>>();
        model.dim = root.at("d").get<size_t>();
        model.ensemble = root.at("ensemble").get<std::vector<std::vector<double>>>();
        size_t expected = model.classes.size() * (model.dim + 1);
        for (const auto& weights : model.ensemble)
            if (weights.size() != expected) throw ValidationError("weight matrix size mismatch in " + path.string());
        return model;
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Nearest-centroid fallback
// ---------------------------------------------------------------------------

CentroidModel train_centroid(const FeatureTable& features, const PseudoLabelSet& pseudo_labels) {
    if (pseudo_labels.empty()) throw ValidationError("cannot build centroids from an empty pseudo-label set");
    std::map<std::string, std::pair<std::vector<double>, size_t>> sums;
    for (const auto& [region_id, pseudo] : pseudo_labels) {
        auto it = features.find(region_id);
        if (it == features.end()) throw ValidationError("no feature vector for pseudo-labeled region " + region_id);
        auto& [sum, count] = sums[pseudo.name];
        if (sum.empty()) sum.assign(it->second.size(), 0.0);
        if (sum.size() != it->second.size()) throw ValidationError("feature dimension mismatch in centroid training");
        for (size_t j = 0; j < sum.size(); ++j) sum[j] += it->second[j];
        ++count;
    }
    CentroidModel model;
    for (auto& [name, acc] : sums) {
        model.classes.push_back(name);
        std::vector<double> centroid = acc.first;
        for (double& v : centroid) v /= static_cast<double>(acc.second);
        model.centroids.push_back(std::move(centroid));
    }
    return model;
}

LabelAssignment predict_centroid(const CentroidModel& model, const FeatureTable& features) {
    if (model.classes.empty()) throw ValidationError("empty centroid model");
    LabelAssignment out;
    for (const auto& [region_id, x] : features) {
        if (x.size() != model.centroids.front().size())
            throw ValidationError("feature dimension mismatch for region " + region_id);
        // confidence from softmax over negative distances
        std::vector<double> neg_dist(model.classes.size());
        for (size_t c = 0; c < model.classes.size(); ++c) {
            double d2 = 0.0;
            for (size_t j = 0; j < x.size(); ++j) {
                double diff = x[j] - model.centroids[c][j];
                d2 += diff * diff;
            }
            neg_dist[c] = -std::sqrt(d2);
        }
        double m = *std::max_element(neg_dist.begin(), neg_dist.end());
        double total = 0.0;
        std::vector<double> probs(neg_dist.size());
        for (size_t c = 0; c < neg_dist.size(); ++c) {
            probs[c] = std::exp(neg_dist[c] - m);
            total += probs[c];
        }
        size_t argmax = 0;
        for (size_t c = 0; c < probs.size(); ++c) {
            probs[c] /= total;
            if (probs[c] > probs[argmax]) argmax = c;
        }
        out.set(region_id, Label{model.classes[argmax], Confidence::prob(probs[argmax])});
    }
    return out;
}

// ---------------------------------------------------------------------------
// k-means
// ---------------------------------------------------------------------------

namespace {

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double d2 = 0.0;
    for (size_t j = 0; j < a.size(); ++j) {
        double diff = a[j] - b[j];
        d2 += diff * diff;
    }
    return d2;
}

}  // namespace

KMeansResult kmeans(const std::vector<std::vector<double>>& points, int k, uint64_t seed, int max_iter) {
    if (k < 1) throw ValidationError("k must be >= 1");
    if (static_cast<size_t>(k) > points.size())
        throw ValidationError("k (" + std::to_string(k) + ") exceeds number of points (" + std::to_string(points.size()) +
                              ")");
    size_t n = points.size();
    size_t dim = points.front().size();
    for (const auto& p : points)
        if (p.size() != dim) throw ValidationError("k-means points have inconsistent dimensions");

    Rng rng(derive_seed(seed, "kmeans"));

    // k-means++ style seeding
    std::vector<std::vector<double>> centers;
    centers.push_back(points[static_cast<size_t>(rng.next_int(0, static_cast<int>(n) - 1))]);
    std::vector<double> d2(n, 0.0);
    while (centers.size() < static_cast<size_t>(k)) {
        double total = 0.0;
        for (size_t i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& c : centers) best = std::min(best, squared_distance(points[i], c));
            d2[i] = best;
            total += best;
        }
        size_t pick = 0;
        if (total > 0.0) {
            double target = rng.next_double() * total;
            double cumulative = 0.0;
            for (size_t i = 0; i < n; ++i) {
                cumulative += d2[i];
                if (cumulative >= target) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = static_cast<size_t>(rng.next_int(0, static_cast<int>(n) - 1));
        }
        centers.push_back(points[pick]);
    }

    KMeansResult result;
    result.assignment.assign(n, -1);
    result.centers = std::move(centers);

    auto assign_all = [&]() {
        bool changed = false;
        for (size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d2 = squared_distance(points[i], result.centers[0]);
            for (int c = 1; c < k; ++c) {
                double cd2 = squared_distance(points[i], result.centers[static_cast<size_t>(c)]);
                if (cd2 < best_d2) {
                    best_d2 = cd2;
                    best = c;
                }
            }
            if (result.assignment[i] != best) {
                result.assignment[i] = best;
                changed = true;
            }
        }
        return changed;
    };
    auto compute_sse = [&]() {
        double sse = 0.0;
        for (size_t i = 0; i < n; ++i)
            sse += squared_distance(points[i], result.centers[static_cast<size_t>(result.assignment[i])]);
        return sse;
    };

    assign_all();
    for (int iter = 0; iter < max_iter; ++iter) {
        // update step
        std::vector<std::vector<double>> sums(static_cast<size_t>(k), std::vector<double>(dim, 0.0));
        std::vector<size_t> counts(static_cast<size_t>(k), 0);
        for (size_t i = 0; i < n; ++i) {
            auto c = static_cast<size_t>(result.assignment[i]);
            ++counts[c];
            for (size_t j = 0; j < dim; ++j) sums[c][j] += points[i][j];
        }
        for (size_t c = 0; c < static_cast<size_t>(k); ++c) {
            if (counts[c] == 0) {
                // relocate an empty cluster to the point farthest from its center
                size_t farthest = 0;
                double far_d2 = -1.0;
                for (size_t i = 0; i < n; ++i) {
                    double pd2 = squared_distance(points[i], result.centers[static_cast<size_t>(result.assignment[i])]);
                    if (pd2 > far_d2) {
                        far_d2 = pd2;
                        farthest = i;
                    }
                }
                result.centers[c] = points[farthest];
                continue;
            }
            for (size_t j = 0; j < dim; ++j) result.centers[c][j] = sums[c][j] / static_cast<double>(counts[c]);
        }
        bool changed = assign_all();
        result.sse_history.push_back(compute_sse());
        if (!changed) break;
    }
    if (result.sse_history.empty()) result.sse_history.push_back(compute_sse());
    result.sse = result.sse_history.back();
    return result;
}

// ---------------------------------------------------------------------------
// Optimal cluster -> label mapping
// ---------------------------------------------------------------------------

std::vector<int> hungarian_min_cost(const std::vector<std::vector<double>>& cost) {
    const int n = static_cast<int>(cost.size());
    const int m = n > 0 ? static_cast<int>(cost[0].size()) : 0;
    if (n == 0) return {};
    if (m == 0) return std::vector<int>(n, -1);

    const int N = std::max(n, m);
    const double kInf = std::numeric_limits<double>::infinity();

    // padded square matrix, 1-indexed potentials formulation
    std::vector<std::vector<double>> a(static_cast<size_t>(N + 1), std::vector<double>(static_cast<size_t>(N + 1), 0.0));
    for (int i = 1; i <= N; ++i)
        for (int j = 1; j <= N; ++j)
            a[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                (i <= n && j <= m) ? cost[static_cast<size_t>(i - 1)][static_cast<size_t>(j - 1)] : 0.0;

    std::vector<double> u(static_cast<size_t>(N + 1), 0.0), v(static_cast<size_t>(N + 1), 0.0);
    std::vector<int> p(static_cast<size_t>(N + 1), 0), way(static_cast<size_t>(N + 1), 0);

    for (int i = 1; i <= N; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<double> minv(static_cast<size_t>(N + 1), kInf);
        std::vector<char> used(static_cast<size_t>(N + 1), 0);
        do {
            used[static_cast<size_t>(j0)] = 1;
            int i0 = p[static_cast<size_t>(j0)];
            int j1 = 0;
            double delta = kInf;
            for (int j = 1; j <= N; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                double cur = a[static_cast<size_t>(i0)][static_cast<size_t>(j)] - u[static_cast<size_t>(i0)] -
                             v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= N; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(static_cast<size_t>(n), -1);
    for (int j = 1; j <= N; ++j) {
        int i = p[static_cast<size_t>(j)];
        if (i >= 1 && i <= n && j <= m) row_to_col[static_cast<size_t>(i - 1)] = j - 1;
    }
    return row_to_col;
}

ClusterMapping optimal_cluster_mapping(const std::vector<int>& cluster_assignment,
                                       const std::vector<std::string>& gt_labels) {
    if (cluster_assignment.size() != gt_labels.size())
        throw ValidationError("cluster assignment and ground truth sizes differ");
    if (cluster_assignment.empty()) throw ValidationError("cannot map an empty clustering");

    int k = 0;
    for (int c : cluster_assignment) {
        if (c < 0) throw ValidationError("cluster indices must be >= 0");
        k = std::max(k, c + 1);
    }
    std::vector<std::string> names;
    {
        std::set<std::string> name_set(gt_labels.begin(), gt_labels.end());
        names.assign(name_set.begin(), name_set.end());
    }
    std::map<std::string, size_t> name_index;
    for (size_t j = 0; j < names.size(); ++j) name_index[names[j]] = j;

    std::vector<std::vector<double>> counts(static_cast<size_t>(k), std::vector<double>(names.size(), 0.0));
    for (size_t i = 0; i < cluster_assignment.size(); ++i)
        counts[static_cast<size_t>(cluster_assignment[i])][name_index[gt_labels[i]]] += 1.0;

    // maximize matched counts == minimize (max_count - count)
    double max_count = 0.0;
    for (const auto& row : counts)
        for (double c : row) max_count = std::max(max_count, c);
    std::vector<std::vector<double>> cost(static_cast<size_t>(k), std::vector<double>(names.size(), 0.0));
    for (size_t i = 0; i < counts.size(); ++i)
        for (size_t j = 0; j < names.size(); ++j) cost[i][j] = max_count - counts[i][j];

    std::vector<int> row_to_col = hungarian_min_cost(cost);

    ClusterMapping mapping;
    double correct = 0.0;
    for (int c = 0; c < k; ++c) {
        int col = row_to_col[static_cast<size_t>(c)];
        if (col < 0) {
            mapping.cluster_to_name[c] = std::nullopt;  // surplus cluster -> sink
        } else {
            mapping.cluster_to_name[c] = names[static_cast<size_t>(col)];
            correct += counts[static_cast<size_t>(c)][static_cast<size_t>(col)];
        }
    }
    mapping.accuracy = correct / static_cast<double>(cluster_assignment.size());
    return mapping;
}

}  // namespace comicid::clf

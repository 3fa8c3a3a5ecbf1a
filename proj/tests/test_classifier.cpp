#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "comicid/classifier.hpp"
#include "comicid/rng.hpp"
#include "test_helpers.hpp"

using namespace comicid;
using namespace comicid::clf;

namespace {

// Two Gaussian blobs around +/- center_offset in every dimension.
void make_blobs(FeatureTable& features, PseudoLabelSet& labels, int per_class, double center_offset, uint64_t seed,
                int dim = 4) {
    Rng rng(seed);
    int counter = 0;
    for (const std::string& name : {"Alpha", "Beta"}) {
        double sign = name == "Alpha" ? -1.0 : 1.0;
        for (int i = 0; i < per_class; ++i) {
            std::vector<double> x(static_cast<size_t>(dim));
            for (double& v : x) v = sign * center_offset + rng.next_normal();
            std::string id = "c" + std::to_string(counter++);
            features[id] = x;
            labels[id] = PseudoLabel{name, "t0", Confidence::level(5)};
        }
    }
}

std::vector<TrainSample> to_samples(const FeatureTable& features, const PseudoLabelSet& labels,
                                    const std::vector<std::string>& classes) {
    std::vector<TrainSample> out;
    for (const auto& [id, pseudo] : labels) {
        size_t y = static_cast<size_t>(std::find(classes.begin(), classes.end(), pseudo.name) - classes.begin());
        out.push_back({features.at(id), y});
    }
    return out;
}

}  // namespace

TEST_CASE("gradient matches central finite differences") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        size_t k = static_cast<size_t>(rng.next_int(2, 4));
        size_t d = static_cast<size_t>(rng.next_int(1, 5));
        int n = rng.next_int(2, 12);
        double l2 = rng.next_double() < 0.5 ? 0.0 : 0.01 * rng.next_double();

        std::vector<TrainSample> batch;
        for (int i = 0; i < n; ++i) {
            std::vector<double> x(d);
            for (double& v : x) v = 2.0 * rng.next_normal();
            batch.push_back({x, static_cast<size_t>(rng.next_int(0, static_cast<int>(k) - 1))});
        }
        std::vector<double> w(k * (d + 1));
        for (double& v : w) v = rng.next_normal();

        std::vector<double> grad = softmax_gradient(w, k, d, batch, l2);
        const double h = 1e-5;
        double max_rel_err = 0.0;
        for (size_t j = 0; j < w.size(); ++j) {
            std::vector<double> wp = w;
            std::vector<double> wm = w;
            wp[j] += h;
            wm[j] -= h;
            double numeric = (softmax_loss(wp, k, d, batch, l2) - softmax_loss(wm, k, d, batch, l2)) / (2.0 * h);
            double denom = std::max({std::abs(numeric), std::abs(grad[j]), 1e-8});
            max_rel_err = std::max(max_rel_err, std::abs(numeric - grad[j]) / denom);
        }
        CHECK(max_rel_err <= 1e-4);
    }
}

TEST_CASE("gradient at an optimum and under symmetry") {
    SUBCASE("zero weights, symmetric two-sample batch: bias gradients vanish, class rows cancel") {
        std::vector<TrainSample> batch{{{1.0, 0.0}, 0}, {{-1.0, 0.0}, 1}};
        std::vector<double> w(2 * 3, 0.0);
        std::vector<double> grad = softmax_gradient(w, 2, 2, batch, 0.0);
        CHECK(std::abs(grad[2]) < 1e-12);  // class 0 bias
        CHECK(std::abs(grad[5]) < 1e-12);  // class 1 bias
        // softmax deltas sum to zero per sample, so class rows cancel columnwise
        for (size_t j = 0; j < 3; ++j) CHECK(std::abs(grad[j] + grad[3 + j]) < 1e-12);
        // and the informative direction pulls the true classes apart
        CHECK(grad[0] < 0.0);
        CHECK(grad[3] > 0.0);
    }
    SUBCASE("near-perfect one-hot predictions give a vanishing gradient at l2=0") {
        // large separating weights -> softmax saturates at the labels
        std::vector<double> w{50.0, 0.0, 0.0, /* class 0 */ -50.0, 0.0, 0.0 /* class 1 */};
        std::vector<TrainSample> batch{{{1.0, 0.3}, 0}, {{-1.0, -0.2}, 1}};
        std::vector<double> grad = softmax_gradient(w, 2, 2, batch, 0.0);
        for (double g : grad) CHECK(std::abs(g) < 1e-8);
    }
}

TEST_CASE("training separates two well-separated clusters") {
    FeatureTable features;
    PseudoLabelSet labels;
    make_blobs(features, labels, 20, 3.0, 31);
    TrainConfig config;
    config.seed = 8;
    ClassifierModel model = train(features, labels, config);
    CHECK(model.classes == std::vector<std::string>{"Alpha", "Beta"});
    CHECK(model.ensemble.size() == 5);

    LabelAssignment out = predict(model, features);
    size_t correct = 0;
    for (const auto& [id, pseudo] : labels) {
        auto label = out.get(id);
        REQUIRE(label);
        if (label->name == pseudo.name) ++correct;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(labels.size()) >= 0.95);
}

TEST_CASE("training edge cases") {
    FeatureTable features{{"c0", {0.0, 0.0}}, {"c1", {1.0, 1.0}}};
    SUBCASE("single-class labels degenerate") {
        PseudoLabelSet labels{{"c0", {"Alpha", "t0", Confidence::level(5)}},
                              {"c1", {"Alpha", "t1", Confidence::level(5)}}};
        CHECK_THROWS_AS(train(features, labels, TrainConfig{}), DegenerateTraining);
    }
    SUBCASE("empty labels are invalid") { CHECK_THROWS_AS(train(features, {}, TrainConfig{}), ValidationError); }
    SUBCASE("missing feature vector is named") {
        PseudoLabelSet labels{{"c0", {"Alpha", "t0", Confidence::level(5)}},
                              {"c9", {"Beta", "t1", Confidence::level(5)}}};
        try {
            train(features, labels, TrainConfig{});
            FAIL("expected ValidationError");
        } catch (const ValidationError& e) {
            CHECK(std::string(e.what()).find("c9") != std::string::npos);
        }
    }
}

TEST_CASE("training is bit-deterministic for a fixed config and seed") {
    FeatureTable features;
    PseudoLabelSet labels;
    make_blobs(features, labels, 10, 1.5, 77);
    TrainConfig config;
    config.seed = 99;
    config.epochs = 50;
    ClassifierModel a = train(features, labels, config);
    ClassifierModel b = train(features, labels, config);
    CHECK(a == b);
}

TEST_CASE("prediction yields a proper distribution and breaks ties toward the first class") {
    ClassifierModel model;
    model.classes = {"Alpha", "Beta"};
    model.dim = 2;
    model.ensemble = {std::vector<double>(6, 0.0)};  // zero weights -> uniform probabilities

    FeatureTable features{{"c0", {0.4, -0.7}}};
    LabelAssignment out = predict(model, features);
    REQUIRE(out.get("c0"));
    CHECK(out.get("c0")->name == "Alpha");
    CHECK(out.get("c0")->confidence.prob_value() == doctest::Approx(0.5));

    SUBCASE("averaged probabilities over random ensembles sum to one") {
        Rng rng(3);
        model.ensemble.clear();
        for (int m = 0; m < 4; ++m) {
            std::vector<double> w(6);
            for (double& v : w) v = rng.next_normal();
            model.ensemble.push_back(w);
        }
        for (int trial = 0; trial < 20; ++trial) {
            std::vector<double> x{rng.next_normal(), rng.next_normal()};
            std::vector<double> avg(2, 0.0);
            for (const auto& w : model.ensemble) {
                auto p = softmax_probs(w, 2, 2, x);
                avg[0] += p[0];
                avg[1] += p[1];
                CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-9));
            }
        }
    }
    SUBCASE("dimension mismatch is rejected") {
        FeatureTable bad{{"c0", {1.0, 2.0, 3.0}}};
        CHECK_THROWS_AS(predict(model, bad), ValidationError);
    }
    SUBCASE("argmax is invariant under a constant logit shift") {
        std::vector<double> w{0.4, -0.2, 0.1, /**/ -0.3, 0.5, 0.2};
        std::vector<double> shifted = w;
        for (size_t c = 0; c < 2; ++c)
            for (size_t j = 0; j < 3; ++j) shifted[c * 3 + j] += (j == 2 ? 7.0 : 0.0);  // shift both biases by 7
        std::vector<double> x{0.9, -1.4};
        auto p1 = softmax_probs(w, 2, 2, x);
        auto p2 = softmax_probs(shifted, 2, 2, x);
        CHECK((p1[0] > p1[1]) == (p2[0] > p2[1]));
        CHECK(p1[0] == doctest::Approx(p2[0]).epsilon(1e-9));
    }
}

TEST_CASE("training loss is non-increasing with the halving safeguard") {
    FeatureTable features;
    PseudoLabelSet labels;
    make_blobs(features, labels, 15, 0.5, 13);  // overlapping clusters, noisy problem
    TrainConfig config;
    config.seed = 5;
    config.epochs = 60;
    config.learning_rate = 5.0;  // aggressive on purpose
    config.ensemble_size = 1;
    ClassifierModel model = train(features, labels, config);

    // replicate the member-0 training loop and verify monotonicity directly
    std::vector<TrainSample> batch = to_samples(features, labels, model.classes);
    std::vector<double> w(model.classes.size() * (4 + 1));
    Rng rng(derive_seed(config.seed, "clf-member", 0));
    // (the exact split differs; monotonicity of the safeguard is what matters)
    for (double& v : w) v = 0.01 * rng.next_normal();
    double lr = config.learning_rate;
    double loss = softmax_loss(w, model.classes.size(), 4, batch, config.l2);
    for (int epoch = 0; epoch < 40; ++epoch) {
        auto grad = softmax_gradient(w, model.classes.size(), 4, batch, config.l2);
        std::vector<double> candidate(w.size());
        double new_loss = loss;
        for (int halving = 0; halving < 40; ++halving) {
            for (size_t j = 0; j < w.size(); ++j) candidate[j] = w[j] - lr * grad[j];
            new_loss = softmax_loss(candidate, model.classes.size(), 4, batch, config.l2);
            if (new_loss <= loss) break;
            lr *= 0.5;
        }
        REQUIRE(new_loss <= loss);
        w = candidate;
        loss = new_loss;
    }
}

TEST_CASE("nearest-centroid fallback handles a single class") {
    FeatureTable features{{"c0", {0.0, 0.0}}, {"c1", {0.2, 0.1}}, {"c2", {5.0, 5.0}}};
    PseudoLabelSet labels{{"c0", {"Alpha", "t0", Confidence::level(5)}}};
    CentroidModel model = train_centroid(features, labels);
    LabelAssignment out = predict_centroid(model, features);
    CHECK(out.get("c2")->name == "Alpha");
    CHECK(out.get("c2")->confidence.prob_value() == doctest::Approx(1.0));
}

TEST_CASE("k-means clusters obvious 1-D data") {
    std::vector<std::vector<double>> points{{0.0}, {0.1}, {10.0}, {10.1}};
    KMeansResult result = kmeans(points, 2, 4);
    CHECK(result.assignment[0] == result.assignment[1]);
    CHECK(result.assignment[2] == result.assignment[3]);
    CHECK(result.assignment[0] != result.assignment[2]);

    SUBCASE("k equal to the point count gives singletons with zero SSE") {
        KMeansResult singles = kmeans(points, 4, 4);
        std::set<int> distinct(singles.assignment.begin(), singles.assignment.end());
        CHECK(distinct.size() == 4);
        CHECK(singles.sse == doctest::Approx(0.0));
    }
    SUBCASE("k above the point count is rejected") { CHECK_THROWS_AS(kmeans(points, 5, 4), ValidationError); }
    SUBCASE("same seed, same clustering") {
        KMeansResult a = kmeans(points, 2, 123);
        KMeansResult b = kmeans(points, 2, 123);
        CHECK(a.assignment == b.assignment);
    }
}

TEST_CASE("k-means SSE is non-increasing across Lloyd iterations") {
    Rng rng(55);
    std::vector<std::vector<double>> points;
    for (int i = 0; i < 60; ++i) points.push_back({rng.next_normal() * 3.0, rng.next_normal() * 3.0});
    KMeansResult result = kmeans(points, 5, 9);
    for (size_t i = 1; i < result.sse_history.size(); ++i)
        CHECK(result.sse_history[i] <= result.sse_history[i - 1] + 1e-9);
}

TEST_CASE("optimal cluster mapping") {
    SUBCASE("hand-computed 2x2 fixture") {
        // counts: cluster0 {A:3, B:1}, cluster1 {A:0, B:2}
        std::vector<int> clusters{0, 0, 0, 0, 1, 1};
        std::vector<std::string> labels{"A", "A", "A", "B", "B", "B"};
        ClusterMapping mapping = optimal_cluster_mapping(clusters, labels);
        CHECK(mapping.cluster_to_name.at(0) == "A");
        CHECK(mapping.cluster_to_name.at(1) == "B");
        CHECK(mapping.accuracy == doctest::Approx(5.0 / 6.0));
    }
    SUBCASE("diagonal counts map to the identity with accuracy 1") {
        std::vector<int> clusters{0, 1, 2};
        std::vector<std::string> labels{"A", "B", "C"};
        ClusterMapping mapping = optimal_cluster_mapping(clusters, labels);
        CHECK(mapping.cluster_to_name.at(0) == "A");
        CHECK(mapping.cluster_to_name.at(1) == "B");
        CHECK(mapping.cluster_to_name.at(2) == "C");
        CHECK(mapping.accuracy == doctest::Approx(1.0));
    }
    SUBCASE("surplus clusters sink") {
        std::vector<int> clusters{0, 1, 2, 2};
        std::vector<std::string> labels{"A", "A", "A", "A"};  // one label, three clusters
        ClusterMapping mapping = optimal_cluster_mapping(clusters, labels);
        int mapped = 0;
        for (const auto& [cluster, name] : mapping.cluster_to_name)
            if (name) ++mapped;
        CHECK(mapped == 1);
        CHECK(mapping.accuracy == doctest::Approx(0.5));  // best single cluster covers 2 of 4
    }
}

TEST_CASE("optimal mapping equals brute force over permutations for k <= 5") {
    Rng rng(66);
    const std::vector<std::string> names{"A", "B", "C", "D", "E"};
    for (int trial = 0; trial < 100; ++trial) {
        int k = rng.next_int(1, 5);
        int n = rng.next_int(k, 30);
        std::vector<int> clusters;
        std::vector<std::string> labels;
        for (int i = 0; i < n; ++i) {
            clusters.push_back(rng.next_int(0, k - 1));
            labels.push_back(names[static_cast<size_t>(rng.next_int(0, k - 1))]);
        }

        ClusterMapping mapping = optimal_cluster_mapping(clusters, labels);

        // exact brute force: pad the label list with sink slots so every
        // permutation is an injective cluster -> (label | sink) map
        std::set<std::string> label_set(labels.begin(), labels.end());
        std::vector<std::string> padded(label_set.begin(), label_set.end());
        int max_cluster = *std::max_element(clusters.begin(), clusters.end()) + 1;
        while (padded.size() < static_cast<size_t>(max_cluster)) padded.push_back("");  // sink
        std::vector<int> perm(padded.size());
        std::iota(perm.begin(), perm.end(), 0);
        int best = -1;
        do {
            int correct = 0;
            for (size_t i = 0; i < clusters.size(); ++i) {
                const std::string& assigned = padded[static_cast<size_t>(perm[static_cast<size_t>(clusters[i])])];
                if (!assigned.empty() && assigned == labels[i]) ++correct;
            }
            best = std::max(best, correct);
        } while (std::next_permutation(perm.begin(), perm.end()));

        CHECK(mapping.accuracy == doctest::Approx(static_cast<double>(best) / static_cast<double>(n)));
    }
}

TEST_CASE("model save/load round trip") {
    FeatureTable features;
    PseudoLabelSet labels;
    make_blobs(features, labels, 6, 2.0, 41);
    TrainConfig config;
    config.epochs = 10;
    config.ensemble_size = 2;
    ClassifierModel model = train(features, labels, config);

    auto dir = testutil::scratch_dir("clf_model");
    save_model(model, dir / "model.json");
    ClassifierModel reloaded = load_model(dir / "model.json");
    CHECK(model == reloaded);
}

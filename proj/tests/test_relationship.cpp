#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "comicid/relationship.hpp"
#include "comicid/rng.hpp"
#include "test_helpers.hpp"

using namespace comicid;

namespace {

// Independently coded reference for the verbatim rescoring formula:
// s = min(1, lambda*p_x*p_y), multiplied on a label match, divided otherwise.
double literal_reference(double r, double p_x, double p_y, double lambda, bool match) {
    double s = lambda * p_x * p_y;
    if (s > 1.0) s = 1.0;
    return match ? r * s : r / s;
}

RelationshipMatrix single_pair(double score) {
    RelationshipMatrix m;
    m.set("c0", "t0", score);
    return m;
}

LabelAssignment one_label(const std::string& region, const std::string& name, Confidence conf) {
    LabelAssignment a;
    a.set(region, {name, conf});
    return a;
}

}  // namespace

TEST_CASE("distance scores use reciprocal center distance on the same page") {
    ComicDocument doc;
    doc.title = "dist";
    doc.pages = {{0, 100.0, 100.0}, {1, 100.0, 100.0}};
    // centers: c0 at (0+eps..), crafted: box [0,0,2,2] center (1,1); text box center (4,5) -> d = 5
    doc.characters = {{"c0", 0, {0.0, 0.0, 2.0, 2.0}, std::nullopt}};
    doc.texts = {
        {"t0", 0, {3.0, 4.0, 5.0, 6.0}, "x", 0, std::nullopt},   // center (4,5): distance 5 from (1,1)
        {"t1", 0, {0.0, 0.0, 2.0, 2.0}, "y", 1, std::nullopt},   // coincident center
        {"t2", 1, {0.0, 0.0, 2.0, 2.0}, "z", 0, std::nullopt},   // other page
    };
    RelationshipMatrix m = distance_scores(doc);
    CHECK(m.get("c0", "t0") == doctest::Approx(1.0 / 6.0));
    CHECK(m.get("c0", "t1") == doctest::Approx(1.0));
    CHECK(!m.contains("c0", "t2"));
    CHECK(m.size() == 2);
}

TEST_CASE("gt scores mark annotated pairs with 1.0") {
    ComicDocument doc = testutil::tiny_document();
    SUBCASE("one annotated pair") {
        RelationshipMatrix m = gt_scores(doc, {{"c0", "t0"}});
        CHECK(m.size() == 1);
        CHECK(m.get("c0", "t0") == 1.0);
    }
    SUBCASE("empty pairs give an empty matrix") { CHECK(gt_scores(doc, {}).empty()); }
    SUBCASE("unknown ids are rejected") {
        CHECK_THROWS_AS(gt_scores(doc, {{"c9", "t0"}}), ValidationError);
    }
}

TEST_CASE("rescore worked examples") {
    RescoreConfig intent;
    RescoreConfig literal;
    literal.mode = RescoreConfig::Mode::Literal;

    SUBCASE("intent, match, amplifies") {
        auto out = rescore(single_pair(0.5), one_label("c0", "Naru", Confidence::prob(0.9)),
                           one_label("t0", "Naru", Confidence::prob(0.8)), intent);
        CHECK(out.get("c0", "t0") == doctest::Approx(0.72));  // a = max(1, 1.44)
    }
    SUBCASE("literal, match, scale capped at 1 leaves the score alone") {
        auto out = rescore(single_pair(0.5), one_label("c0", "Naru", Confidence::prob(0.9)),
                           one_label("t0", "Naru", Confidence::prob(0.8)), literal);
        CHECK(out.get("c0", "t0") == doctest::Approx(0.5));
    }
    SUBCASE("intent, mismatch, attenuates") {
        auto out = rescore(single_pair(0.6), one_label("c0", "Naru", Confidence::prob(0.9)),
                           one_label("t0", "Keitaro", Confidence::prob(0.9)), intent);
        CHECK(out.get("c0", "t0") == doctest::Approx(0.6 / 1.62));
    }
    SUBCASE("lambda*p_x*p_y == 1 is a fixed point in both modes") {
        auto cx = Confidence::prob(0.5);
        auto cy = Confidence::prob(1.0);
        for (const auto& config : {intent, literal}) {
            auto matched = rescore(single_pair(0.37), one_label("c0", "N", cx), one_label("t0", "N", cy), config);
            CHECK(matched.get("c0", "t0") == doctest::Approx(0.37));
            auto mismatched = rescore(single_pair(0.37), one_label("c0", "N", cx), one_label("t0", "M", cy), config);
            CHECK(mismatched.get("c0", "t0") == doctest::Approx(0.37));
        }
    }
    SUBCASE("level confidences convert as level/5") {
        // level 5 -> 1.0, level 4 -> 0.8: a = max(1, 2*1.0*0.8) = 1.6
        auto out = rescore(single_pair(0.5), one_label("c0", "N", Confidence::prob(1.0)),
                           one_label("t0", "N", Confidence::level(4)), intent);
        CHECK(out.get("c0", "t0") == doctest::Approx(0.8));
    }
    SUBCASE("nonpositive lambda is rejected") {
        RescoreConfig bad;
        bad.lambda = 0.0;
        CHECK_THROWS_AS(rescore(single_pair(0.5), LabelAssignment{}, LabelAssignment{}, bad), ValidationError);
    }
}

TEST_CASE("literal mode matches the independent reference on 1000 random triples") {
    Rng rng(42);
    RescoreConfig literal;
    literal.mode = RescoreConfig::Mode::Literal;
    for (int i = 0; i < 1000; ++i) {
        double r = 0.001 + 0.999 * rng.next_double();
        double p_x = rng.next_double();
        double p_y = rng.next_double();
        bool match = rng.next_double() < 0.5;
        literal.lambda = 0.5 + 3.0 * rng.next_double();

        auto out = rescore(single_pair(r), one_label("c0", "A", Confidence::prob(p_x)),
                           one_label("t0", match ? "A" : "B", Confidence::prob(p_y)), literal);
        double expected = literal_reference(r, p_x, p_y, literal.lambda, match);
        if (std::isfinite(expected) && expected > 1e-12)
            CHECK(out.get("c0", "t0") == doctest::Approx(expected).epsilon(1e-12));
    }
}

TEST_CASE("intent mode never lowers matches nor raises mismatches") {
    Rng rng(43);
    RescoreConfig intent;
    for (int i = 0; i < 1000; ++i) {
        double r = 0.001 + 0.999 * rng.next_double();
        double p_x = rng.next_double();
        double p_y = rng.next_double();
        auto matched = rescore(single_pair(r), one_label("c0", "A", Confidence::prob(p_x)),
                               one_label("t0", "A", Confidence::prob(p_y)), intent);
        CHECK(matched.get("c0", "t0") >= r);
        auto mismatched = rescore(single_pair(r), one_label("c0", "A", Confidence::prob(p_x)),
                                  one_label("t0", "B", Confidence::prob(p_y)), intent);
        CHECK(mismatched.get("c0", "t0") <= r);
    }
}

TEST_CASE("abstain on either side leaves the pair unchanged in both modes") {
    for (auto mode : {RescoreConfig::Mode::Intent, RescoreConfig::Mode::Literal}) {
        RescoreConfig config;
        config.mode = mode;
        LabelAssignment chars;
        chars.set_abstain("c0");
        LabelAssignment texts = one_label("t0", "A", Confidence::level(5));
        CHECK(rescore(single_pair(0.4), chars, texts, config).get("c0", "t0") == doctest::Approx(0.4));

        LabelAssignment chars2 = one_label("c0", "A", Confidence::prob(0.9));
        LabelAssignment texts2;  // t0 simply absent
        CHECK(rescore(single_pair(0.4), chars2, texts2, config).get("c0", "t0") == doctest::Approx(0.4));
    }
}

TEST_CASE("rescoring preserves the sparsity pattern") {
    Rng rng(44);
    RelationshipMatrix m;
    for (int c = 0; c < 5; ++c)
        for (int t = 0; t < 7; ++t)
            if (rng.next_double() < 0.5) m.set("c" + std::to_string(c), "t" + std::to_string(t), rng.next_double() + 0.01);

    LabelAssignment chars;
    LabelAssignment texts;
    for (int c = 0; c < 5; ++c) {
        if (rng.next_double() < 0.3)
            chars.set_abstain("c" + std::to_string(c));
        else
            chars.set("c" + std::to_string(c), {rng.next_double() < 0.5 ? "A" : "B", Confidence::prob(rng.next_double())});
    }
    for (int t = 0; t < 7; ++t)
        texts.set("t" + std::to_string(t), {rng.next_double() < 0.5 ? "A" : "B", Confidence::level(rng.next_int(1, 5))});

    for (auto mode : {RescoreConfig::Mode::Intent, RescoreConfig::Mode::Literal}) {
        RescoreConfig config;
        config.mode = mode;
        RelationshipMatrix out = rescore(m, chars, texts, config);
        REQUIRE(out.size() == m.size());
        for (const auto& [key, score] : m.entries()) CHECK(out.contains(key.first, key.second));
    }
}

TEST_CASE("uniform scaling preserves the per-text argmax") {
    RelationshipMatrix m;
    m.set("c0", "t0", 0.3);
    m.set("c1", "t0", 0.7);
    m.set("c2", "t0", 0.5);
    LabelAssignment chars;
    LabelAssignment texts;
    // all labels match and all confidence products are equal
    for (const auto& id : {"c0", "c1", "c2"}) chars.set(id, {"A", Confidence::prob(0.9)});
    texts.set("t0", {"A", Confidence::level(5)});

    RescoreConfig intent;
    RelationshipMatrix out = rescore(m, chars, texts, intent);
    CHECK(m.best_char_for_text("t0")->first == out.best_char_for_text("t0")->first);
}

#include <doctest.h>

#include <map>
#include <optional>

#include "comicid/propagation.hpp"
#include "comicid/rng.hpp"

using namespace comicid;

namespace {

// Brute-force reference: enumerate all pairs per target region, take the max
// (smaller partner id on ties), then apply the confidence filter.
PseudoLabelSet brute_text_to_char(const RelationshipMatrix& matrix, const LabelAssignment& texts, int min_level) {
    PseudoLabelSet out;
    for (const auto& char_id : matrix.char_ids()) {
        std::optional<std::pair<std::string, double>> best;
        for (const auto& [key, score] : matrix.entries()) {
            if (key.first != char_id) continue;
            if (!best || score > best->second || (score == best->second && key.second < best->first))
                best = {key.second, score};
        }
        auto label = texts.get(best->first);
        if (!label) continue;
        int level = label->confidence.is_level() ? label->confidence.level_value()
                                                 : static_cast<int>(label->confidence.as_prob() * 5.0);
        if (level < min_level) continue;
        out[char_id] = PseudoLabel{label->name, best->first, label->confidence};
    }
    return out;
}

PseudoLabelSet brute_char_to_text(const RelationshipMatrix& matrix, const LabelAssignment& chars, double min_prob) {
    PseudoLabelSet out;
    for (const auto& text_id : matrix.text_ids()) {
        std::optional<std::pair<std::string, double>> best;
        for (const auto& [key, score] : matrix.entries()) {
            if (key.second != text_id) continue;
            if (!best || score > best->second || (score == best->second && key.first < best->first))
                best = {key.first, score};
        }
        auto label = chars.get(best->first);
        if (!label) continue;
        if (label->confidence.as_prob() < min_prob) continue;
        out[text_id] = PseudoLabel{label->name, best->first, label->confidence};
    }
    return out;
}

}  // namespace

TEST_CASE("text-to-char picks the argmax pair, then filters") {
    RelationshipMatrix m;
    m.set("c1", "t1", 0.9);
    m.set("c1", "t2", 0.3);

    SUBCASE("confident winner propagates") {
        LabelAssignment texts;
        texts.set("t1", {"Naru", Confidence::level(4)});
        texts.set("t2", {"Keitaro", Confidence::level(5)});
        PseudoLabelSet out = propagate_text_to_char(m, texts);
        REQUIRE(out.count("c1") == 1);
        CHECK(out["c1"].name == "Naru");
        CHECK(out["c1"].source_region_id == "t1");
    }
    SUBCASE("low-confidence winner suppresses the region; the runner-up is not consulted") {
        LabelAssignment texts;
        texts.set("t1", {"Naru", Confidence::level(2)});
        texts.set("t2", {"Keitaro", Confidence::level(5)});  // would pass, but t1 won the argmax
        PseudoLabelSet out = propagate_text_to_char(m, texts);
        CHECK(out.empty());
    }
    SUBCASE("abstained winner suppresses the region") {
        LabelAssignment texts;
        texts.set_abstain("t1");
        texts.set("t2", {"Keitaro", Confidence::level(5)});
        CHECK(propagate_text_to_char(m, texts).empty());
    }
    SUBCASE("characters without scored pairs are absent") {
        LabelAssignment texts;
        texts.set("t1", {"Naru", Confidence::level(4)});
        PseudoLabelSet out = propagate_text_to_char(m, texts);
        CHECK(out.count("c2") == 0);
    }
    SUBCASE("level exactly at the cutoff passes") {
        LabelAssignment texts;
        texts.set("t1", {"Naru", Confidence::level(3)});
        CHECK(propagate_text_to_char(m, texts, 3).count("c1") == 1);
    }
}

TEST_CASE("char-to-text emits the argmax character's label above the cutoff") {
    RelationshipMatrix m;
    m.set("c1", "t1", 0.2);
    m.set("c2", "t1", 0.8);

    SUBCASE("candidate above the cutoff") {
        LabelAssignment chars;
        chars.set("c2", {"Keitaro", Confidence::prob(0.56)});
        PseudoLabelSet out = propagate_char_to_text(m, chars);
        REQUIRE(out.count("t1") == 1);
        CHECK(out["t1"].name == "Keitaro");
        CHECK(out["t1"].source_confidence.prob_value() == doctest::Approx(0.56));
    }
    SUBCASE("below the cutoff yields nothing") {
        LabelAssignment chars;
        chars.set("c2", {"Keitaro", Confidence::prob(0.4)});
        CHECK(propagate_char_to_text(m, chars).empty());
    }
    SUBCASE("probability exactly at the cutoff passes") {
        LabelAssignment chars;
        chars.set("c2", {"Keitaro", Confidence::prob(0.5)});
        CHECK(propagate_char_to_text(m, chars).count("t1") == 1);
    }
    SUBCASE("equal scores break toward the lexicographically smaller char id") {
        RelationshipMatrix tie;
        tie.set("c1", "t1", 0.8);
        tie.set("c2", "t1", 0.8);
        LabelAssignment chars;
        chars.set("c1", {"Naru", Confidence::prob(0.9)});
        chars.set("c2", {"Keitaro", Confidence::prob(0.9)});
        PseudoLabelSet out = propagate_char_to_text(tie, chars);
        REQUIRE(out.count("t1") == 1);
        CHECK(out["t1"].name == "Naru");
        CHECK(out["t1"].source_region_id == "c1");
    }
}

TEST_CASE("both operators match the brute-force reference on random instances") {
    Rng rng(99);
    const char* names[] = {"A", "B", "C"};
    for (int instance = 0; instance < 200; ++instance) {
        int num_chars = rng.next_int(1, 10);
        int num_texts = rng.next_int(1, 10);
        RelationshipMatrix m;
        for (int c = 0; c < num_chars; ++c)
            for (int t = 0; t < num_texts; ++t)
                if (rng.next_double() < 0.6) {
                    // quantized scores force plenty of ties
                    double score = 0.1 * rng.next_int(1, 10);
                    m.set("c" + std::to_string(c), "t" + std::to_string(t), score);
                }

        LabelAssignment texts;
        for (int t = 0; t < num_texts; ++t) {
            if (rng.next_double() < 0.2)
                texts.set_abstain("t" + std::to_string(t));
            else
                texts.set("t" + std::to_string(t), {names[rng.next_int(0, 2)], Confidence::level(rng.next_int(1, 5))});
        }
        LabelAssignment chars;
        for (int c = 0; c < num_chars; ++c) {
            if (rng.next_double() < 0.2)
                chars.set_abstain("c" + std::to_string(c));
            else
                chars.set("c" + std::to_string(c),
                          {names[rng.next_int(0, 2)], Confidence::prob(0.1 * rng.next_int(0, 10))});
        }

        int min_level = rng.next_int(1, 5);
        double min_prob = 0.1 * rng.next_int(0, 10);
        CHECK(propagate_text_to_char(m, texts, min_level) == brute_text_to_char(m, texts, min_level));
        CHECK(propagate_char_to_text(m, chars, min_prob) == brute_char_to_text(m, chars, min_prob));
    }
}

TEST_CASE("raising the cutoffs never adds pseudo labels") {
    Rng rng(123);
    for (int instance = 0; instance < 50; ++instance) {
        RelationshipMatrix m;
        LabelAssignment texts;
        LabelAssignment chars;
        for (int c = 0; c < 6; ++c)
            for (int t = 0; t < 6; ++t)
                if (rng.next_double() < 0.5)
                    m.set("c" + std::to_string(c), "t" + std::to_string(t), rng.next_double() + 0.01);
        for (int t = 0; t < 6; ++t)
            texts.set("t" + std::to_string(t), {"A", Confidence::level(rng.next_int(1, 5))});
        for (int c = 0; c < 6; ++c)
            chars.set("c" + std::to_string(c), {"A", Confidence::prob(rng.next_double())});

        for (int level = 1; level < 5; ++level) {
            auto lower = propagate_text_to_char(m, texts, level);
            auto higher = propagate_text_to_char(m, texts, level + 1);
            for (const auto& [id, pseudo] : higher) CHECK(lower.count(id) == 1);
        }
        for (double prob : {0.0, 0.25, 0.5, 0.75}) {
            auto lower = propagate_char_to_text(m, chars, prob);
            auto higher = propagate_char_to_text(m, chars, prob + 0.25);
            for (const auto& [id, pseudo] : higher) CHECK(lower.count(id) == 1);
        }
    }
}

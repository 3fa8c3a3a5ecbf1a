#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "comicid/core.hpp"
#include "comicid/rng.hpp"
#include "test_helpers.hpp"

using namespace comicid;

TEST_CASE("bounding box validation") {
    CHECK_NOTHROW(validate_box({0.0, 0.0, 2.0, 2.0}, "ok"));
    CHECK_THROWS_AS(validate_box({5.0, 5.0, 3.0, 9.0}, "x"), ValidationError);       // x1 >= x2
    CHECK_THROWS_AS(validate_box({0.0, 9.0, 3.0, 9.0}, "y"), ValidationError);       // y1 >= y2
    CHECK_THROWS_AS(validate_box({-1.0, 0.0, 3.0, 9.0}, "neg"), ValidationError);    // negative
    double nan = std::nan("");
    CHECK_THROWS_AS(validate_box({nan, 0.0, 3.0, 9.0}, "nan"), ValidationError);
}

TEST_CASE("roster construction assigns letters in order") {
    NameRoster roster = NameRoster::from_names({"Keitaro", "Naru", "Shinobu"});
    REQUIRE(roster.size() == 3);
    CHECK(roster.entries()[0].char_id == "A");
    CHECK(roster.entries()[1].char_id == "B");
    CHECK(roster.entries()[2].char_id == "C");
    CHECK(roster.find_name("Naru")->char_id == "B");
    CHECK(roster.find_id("C")->name == "Shinobu");
    CHECK(roster.find_name("Mutsumi") == nullptr);

    CHECK_THROWS_AS(NameRoster::from_names({"A", "A"}), ValidationError);
    CHECK_THROWS_AS(NameRoster::from_names({"A", ""}), ValidationError);
    std::vector<std::string> too_many(27);
    for (size_t i = 0; i < too_many.size(); ++i) too_many[i] = "name" + std::to_string(i);
    CHECK_THROWS_AS(NameRoster::from_names(too_many), ValidationError);
}

TEST_CASE("confidence ranges and probability view") {
    CHECK(Confidence::level(3).level_value() == 3);
    CHECK(Confidence::level(5).as_prob() == doctest::Approx(1.0));
    CHECK(Confidence::level(2).as_prob() == doctest::Approx(0.4));
    CHECK(Confidence::prob(0.25).prob_value() == doctest::Approx(0.25));
    CHECK_THROWS_AS(Confidence::level(0), ValidationError);
    CHECK_THROWS_AS(Confidence::level(6), ValidationError);
    CHECK_THROWS_AS(Confidence::prob(-0.1), ValidationError);
    CHECK_THROWS_AS(Confidence::prob(1.1), ValidationError);
}

TEST_CASE("label assignment abstain is explicit") {
    LabelAssignment a;
    a.set("t0", {"Keitaro", Confidence::level(4)});
    a.set_abstain("t1");
    CHECK(a.contains("t1"));
    CHECK(!a.get("t1"));
    CHECK(a.get("t0")->name == "Keitaro");
    CHECK(!a.get("missing"));
    CHECK(a.labeled_count() == 1);
}

TEST_CASE("reading order sorts by page then order key") {
    ComicDocument doc = testutil::tiny_document();
    SUBCASE("two texts on one page follow the order key") {
        auto order = reading_order(doc);
        CHECK(order == std::vector<std::string>{"t0", "t1"});
    }
    SUBCASE("page 0 precedes page 1 regardless of order keys") {
        doc.pages.push_back({1, 800.0, 1200.0});
        doc.texts[0].page_index = 1;  // t0 moves to the later page
        auto order = reading_order(doc);
        CHECK(order == std::vector<std::string>{"t1", "t0"});
    }
    SUBCASE("duplicate order keys are rejected") {
        doc.texts[1].order = 0;
        CHECK_THROWS_AS(reading_order(doc), ValidationError);
        CHECK_THROWS_AS(validate_document(doc), ValidationError);
    }
}

TEST_CASE("reading order is a deterministic permutation of all text ids") {
    Rng rng(7);
    ComicDocument doc;
    doc.title = "perm";
    for (int p = 0; p < 3; ++p) doc.pages.push_back({p, 800.0, 1200.0});
    for (int i = 0; i < 30; ++i) {
        TextRegion t;
        t.id = "t" + std::to_string(i);
        t.page_index = rng.next_int(0, 2);
        t.order = i * 7 % 31;  // scrambled but unique per page by construction below
        t.box = {10.0, 10.0, 50.0, 40.0};
        t.text = "line";
        doc.texts.push_back(t);
    }
    // force unique (page, order) keys
    for (size_t i = 0; i < doc.texts.size(); ++i) doc.texts[i].order = static_cast<int>(i * 3);

    auto order1 = reading_order(doc);
    auto order2 = reading_order(doc);
    CHECK(order1 == order2);
    CHECK(order1.size() == doc.texts.size());
    auto sorted = order1;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::string> expected;
    for (const auto& t : doc.texts) expected.push_back(t.id);
    std::sort(expected.begin(), expected.end());
    CHECK(sorted == expected);
}

TEST_CASE("document validation catches duplicate ids and bad references") {
    ComicDocument doc = testutil::tiny_document();
    SUBCASE("valid") { CHECK_NOTHROW(validate_document(doc)); }
    SUBCASE("duplicate character id") {
        doc.characters.push_back(doc.characters[0]);
        CHECK_THROWS_AS(validate_document(doc), ValidationError);
    }
    SUBCASE("duplicate text id") {
        auto copy = doc.texts[0];
        copy.order = 99;
        doc.texts.push_back(copy);
        CHECK_THROWS_AS(validate_document(doc), ValidationError);
    }
    SUBCASE("unknown page reference") {
        doc.characters[0].page_index = 42;
        CHECK_THROWS_AS(validate_document(doc), ValidationError);
    }
}

TEST_CASE("relationship matrix argmax tie-break favors smaller id") {
    RelationshipMatrix m;
    m.set("c1", "t0", 0.5);
    m.set("c0", "t0", 0.5);
    m.set("c2", "t0", 0.4);
    auto best_char = m.best_char_for_text("t0");
    REQUIRE(best_char);
    CHECK(best_char->first == "c0");

    m.set("c0", "t2", 0.5);
    m.set("c0", "t1", 0.5);
    auto best_text = m.best_text_for_char("c0");
    REQUIRE(best_text);
    CHECK(best_text->first == "t0");  // t0 == t1 == t2 on score, lexicographically smallest wins

    CHECK(!m.best_text_for_char("c9"));
    CHECK(m.get("c9", "t0") == 0.0);
    CHECK_THROWS_AS(m.set("c0", "t0", 0.0), ValidationError);
    CHECK_THROWS_AS(m.set("c0", "t0", -1.0), ValidationError);
}

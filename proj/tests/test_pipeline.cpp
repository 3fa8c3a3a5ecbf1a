#include <doctest.h>

#include <fstream>

#include "comicid/pipeline.hpp"
#include "comicid/relationship.hpp"
#include "comicid/rng.hpp"
#include "comicid/synthgen.hpp"
#include "test_helpers.hpp"

using namespace comicid;

namespace {

struct Fixture {
    synth::SynthCorpus corpus;
    PipelineInputs inputs;
    OracleConfig oracle;
    PipelineConfig config;
};

Fixture make_fixture(uint64_t seed, double oracle_error, bool gt_relation) {
    Fixture f;
    synth::SynthConfig synth_config;
    synth_config.num_pages = 6;
    synth_config.texts_per_page = 8;
    synth_config.chars_per_page = 3;
    synth_config.roster_size = 4;
    synth_config.cluster_sep = 6.0;
    synth_config.seed = seed;
    f.corpus = synth::generate(synth_config);

    f.inputs.document = f.corpus.document;
    f.inputs.features = f.corpus.features;
    f.inputs.gt_pairs = f.corpus.gt_pairs;
    f.inputs.initial_scores =
        gt_relation ? gt_scores(f.corpus.document, f.corpus.gt_pairs) : distance_scores(f.corpus.document);

    f.oracle.error_rate = oracle_error;
    f.oracle.candidate_adopt_prob = 0.7;
    f.oracle.seed = derive_seed(seed, "oracle");

    f.config.seed = seed;
    f.config.iterations = 2;
    f.config.classifier.epochs = 60;
    f.config.roster_filter_pct = 0.0;  // tiny corpora: keep every name
    return f;
}

// backend that delegates to the oracle but fails on the n-th speaker request
class FailingBackend final : public SpeakerBackend {
public:
    FailingBackend(SpeakerBackend& inner, int fail_at) : inner_(inner), fail_at_(fail_at) {}
    BackendCaps caps() const override { return inner_.caps(); }
    std::string complete(const PromptBundle& prompt) override {
        if (prompt.kind == PromptKind::SpeakerPrediction && ++speaker_calls_ >= fail_at_)
            throw BackendError("injected transport failure");
        return inner_.complete(prompt);
    }

private:
    SpeakerBackend& inner_;
    int fail_at_;
    int speaker_calls_ = 0;
};

}  // namespace

TEST_CASE("roster filtering by ground-truth share") {
    ComicDocument doc;
    doc.title = "filter";
    doc.pages = {{0, 800.0, 1200.0}};
    // 50 labeled regions: 30 Main, 19 Side, 1 Rare (2%)
    for (int i = 0; i < 30; ++i)
        doc.characters.push_back({"c" + std::to_string(i), 0, {0.0, double(i), 10.0, double(i) + 5.0}, "Main"});
    for (int i = 30; i < 49; ++i)
        doc.characters.push_back({"c" + std::to_string(i), 0, {0.0, double(i), 10.0, double(i) + 5.0}, "Side"});
    doc.characters.push_back({"c49", 0, {0.0, 200.0, 10.0, 205.0}, "Rare"});
    NameRoster roster = NameRoster::from_names({"Main", "Side", "Rare"});

    SUBCASE("2% share is dropped at the default 3% threshold") {
        NameRoster filtered = filter_roster(roster, doc, 3.0);
        CHECK(filtered.size() == 2);
        CHECK(!filtered.contains_name("Rare"));
        // the region itself stays in the document; accuracy denominators are untouched
        CHECK(char_gt_labels(doc).size() == 50);
    }
    SUBCASE("threshold 0 keeps everything") { CHECK(filter_roster(roster, doc, 0.0).size() == 3); }
    SUBCASE("no ground truth: no-op") {
        ComicDocument blank = doc;
        for (auto& c : blank.characters) c.gt_label.reset();
        CHECK(filter_roster(roster, blank, 3.0).size() == 3);
    }
    SUBCASE("threshold must be below 100") { CHECK_THROWS_AS(filter_roster(roster, doc, 100.0), ValidationError); }
}

TEST_CASE("zero iterations record only the initial prediction") {
    Fixture f = make_fixture(1, 0.2, false);
    f.config.iterations = 0;
    auto backend = make_scripted_oracle(f.corpus.document, f.oracle);
    PipelineTrace trace = run_pipeline(f.inputs, *backend, f.config);
    REQUIRE(trace.iterations.size() == 1);
    CHECK(trace.iterations[0].iteration == 0);
    CHECK(trace.iterations[0].text_assignment.size() == f.corpus.document.texts.size());
    CHECK(trace.iterations[0].char_assignment.labeled_count() == 0);  // identification has not run
    CHECK(trace.iterations[0].metrics.speaker_accuracy.has_value());
    CHECK(!trace.iterations[0].metrics.character_accuracy.has_value());
}

TEST_CASE("perfect inputs give perfect accuracy after one iteration") {
    Fixture f = make_fixture(2, 0.0, true);  // error-free oracle, GT relationships
    f.config.iterations = 1;
    auto backend = make_scripted_oracle(f.corpus.document, f.oracle);
    PipelineTrace trace = run_pipeline(f.inputs, *backend, f.config);
    REQUIRE(trace.iterations.size() == 2);
    CHECK(*trace.iterations[1].metrics.speaker_accuracy == doctest::Approx(1.0));
    CHECK(*trace.iterations[1].metrics.character_accuracy == doctest::Approx(1.0));
    // every region is present in every iteration's assignment
    for (const auto& record : trace.iterations) {
        CHECK(record.text_assignment.size() == f.corpus.document.texts.size());
        CHECK(record.char_assignment.size() == f.corpus.document.characters.size());
    }
}

TEST_CASE("identical config and seed give identical traces") {
    Fixture f = make_fixture(3, 0.4, false);
    auto backend_a = make_scripted_oracle(f.corpus.document, f.oracle);
    auto backend_b = make_scripted_oracle(f.corpus.document, f.oracle);
    PipelineTrace a = run_pipeline(f.inputs, *backend_a, f.config);
    PipelineTrace b = run_pipeline(f.inputs, *backend_b, f.config);
    CHECK(a == b);
}

TEST_CASE("rescoring is applied twice per iteration") {
    // with rescore_reset, iteration i's matrix is rescore(rescore(initial)):
    // reconstruct it by hand from the trace and compare
    Fixture f = make_fixture(4, 0.3, false);
    f.config.iterations = 1;
    f.config.rescore_reset = true;
    auto backend = make_scripted_oracle(f.corpus.document, f.oracle);
    PipelineTrace trace = run_pipeline(f.inputs, *backend, f.config);

    const IterationRecord& it0 = trace.iterations[0];
    const IterationRecord& it1 = trace.iterations[1];
    RelationshipMatrix mid = rescore(f.inputs.initial_scores, it1.char_assignment, it0.text_assignment, f.config.rescore);
    RelationshipMatrix expected = rescore(mid, it1.char_assignment, it1.text_assignment, f.config.rescore);
    CHECK(it1.scores == expected);
}

TEST_CASE("resume extends a run exactly") {
    Fixture f = make_fixture(5, 0.4, false);

    f.config.iterations = 1;
    auto backend_short = make_scripted_oracle(f.corpus.document, f.oracle);
    PipelineTrace short_trace = run_pipeline(f.inputs, *backend_short, f.config);

    f.config.iterations = 2;
    auto backend_full = make_scripted_oracle(f.corpus.document, f.oracle);
    PipelineTrace full = run_pipeline(f.inputs, *backend_full, f.config);

    auto backend_resume = make_scripted_oracle(f.corpus.document, f.oracle);
    PipelineTrace resumed = resume_pipeline(f.inputs, *backend_resume, f.config, short_trace, 1);
    CHECK(resumed == full);

    SUBCASE("resuming zero iterations is the identity") {
        auto backend_noop = make_scripted_oracle(f.corpus.document, f.oracle);
        CHECK(resume_pipeline(f.inputs, *backend_noop, f.config, short_trace, 0) == short_trace);
    }
}

TEST_CASE("an aborted run persists completed iterations and resumes cleanly") {
    Fixture f = make_fixture(6, 0.4, false);
    f.config.iterations = 2;
    f.config.retry_budget = 0;
    auto oracle = make_scripted_oracle(f.corpus.document, f.oracle);

    // iteration 0 issues one speaker request per chunk (one chunk here), then
    // each iteration issues one more; fail on the third speaker request
    FailingBackend failing(*oracle, 3);
    PipelineTrace partial;
    try {
        run_pipeline(f.inputs, failing, f.config);
        FAIL("expected PipelineAborted");
    } catch (const PipelineAborted& e) {
        partial = e.partial_trace;
    }
    REQUIRE(partial.iterations.size() == 2);  // iterations 0 and 1 completed

    // resume with a healthy backend restarts the failed iteration
    auto healthy = make_scripted_oracle(f.corpus.document, f.oracle);
    PipelineTrace resumed = resume_pipeline(f.inputs, *healthy, f.config, partial, 1);
    auto reference_backend = make_scripted_oracle(f.corpus.document, f.oracle);
    PipelineTrace reference = run_pipeline(f.inputs, *reference_backend, f.config);
    CHECK(resumed == reference);
}

TEST_CASE("trace save/load round trip and bit-identical directories") {
    Fixture f = make_fixture(7, 0.4, false);
    auto backend = make_scripted_oracle(f.corpus.document, f.oracle);
    PipelineTrace trace = run_pipeline(f.inputs, *backend, f.config);

    auto dir_a = testutil::scratch_dir("trace_a");
    auto dir_b = testutil::scratch_dir("trace_b");
    save_trace(trace, f.config, dir_a);
    save_trace(trace, f.config, dir_b);

    auto [reloaded, config] = load_trace(dir_a);
    CHECK(reloaded == trace);
    CHECK(config.seed == f.config.seed);
    CHECK(config.iterations == f.config.iterations);

    // byte-compare every file in the two directories
    std::vector<std::filesystem::path> rel_paths;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir_a))
        if (entry.is_regular_file()) rel_paths.push_back(std::filesystem::relative(entry.path(), dir_a));
    REQUIRE(!rel_paths.empty());
    for (const auto& rel : rel_paths) {
        std::ifstream fa(dir_a / rel, std::ios::binary);
        std::ifstream fb(dir_b / rel, std::ios::binary);
        REQUIRE(fb.good());
        std::string sa((std::istreambuf_iterator<char>(fa)), std::istreambuf_iterator<char>());
        std::string sb((std::istreambuf_iterator<char>(fb)), std::istreambuf_iterator<char>());
        CHECK(sa == sb);
    }
}

TEST_CASE("metrics snapshots carry pseudo-label quality per direction") {
    Fixture f = make_fixture(8, 0.3, false);
    f.config.iterations = 1;
    auto backend = make_scripted_oracle(f.corpus.document, f.oracle);
    PipelineTrace trace = run_pipeline(f.inputs, *backend, f.config);
    const MetricSnapshot& m = trace.iterations[1].metrics;
    REQUIRE(m.pseudo_tc);
    REQUIRE(m.pseudo_ct);
    CHECK(m.pseudo_tc->precision >= 0.0);
    CHECK(m.pseudo_tc->recall <= 1.0);
    // unthresholded accuracy is measured over at least as many emissions
    CHECK(m.pseudo_tc->accuracy >= 0.0);
    CHECK(m.relationship_accuracy.has_value());
}

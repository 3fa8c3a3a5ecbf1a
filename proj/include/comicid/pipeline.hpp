#pragma once

// End-to-end iterative loop: initial text-only speaker prediction, then
// alternating character identification and multimodal speaker prediction with
// relationship rescoring after each half-step, all captured in a trace that
// can be persisted, reloaded and resumed.

#include <filesystem>
#include <optional>

#include "comicid/classifier.hpp"
#include "comicid/core.hpp"
#include "comicid/relationship.hpp"
#include "comicid/speaker.hpp"

namespace comicid {

struct PipelineConfig {
    int iterations = 2;
    RescoreConfig rescore;
    bool rescore_reset = false;  // restart each iteration from the initial scores instead of compounding
    int min_level = 3;           // H(t->c) confidence cutoff
    double min_prob = 0.5;       // H(c->t) confidence cutoff
    PromptOptions prompt;
    double roster_filter_pct = 3.0;
    int chunk_size = 60;
    int retry_budget = 2;
    clf::TrainConfig classifier;
    uint64_t seed = 0;
};

// Thrown when an iteration fails mid-loop; carries the completed iterations
// so the caller can persist them and resume later.
class PipelineAborted : public Error {
public:
    PipelineAborted(const std::string& message, PipelineTrace partial)
        : Error(message), partial_trace(std::move(partial)) {}

    PipelineTrace partial_trace;
};

struct PipelineInputs {
    ComicDocument document;
    RelationshipMatrix initial_scores;
    FeatureTable features;
    std::optional<NameRoster> roster;  // extracted via the backend when absent
    GtPairs gt_pairs;                  // optional; enables relationship metrics
};

// Drops roster entries whose ground-truth share of labeled regions (character
// and text combined) is below pct percent. No-op for documents without ground
// truth; dropped names still count in evaluation denominators.
NameRoster filter_roster(const NameRoster& roster, const ComicDocument& doc, double pct);

PipelineTrace run_pipeline(const PipelineInputs& inputs, SpeakerBackend& backend, const PipelineConfig& config);

// Continues the loop from the last recorded iteration; with the same seed
// derivation, resume(run(x, n), m) equals run(x, n + m).
PipelineTrace resume_pipeline(const PipelineInputs& inputs, SpeakerBackend& backend, const PipelineConfig& config,
                              const PipelineTrace& existing, int additional_iterations);

// Trace directory layout:
//   <dir>/meta.json                 config, seed, format version, per-iteration metrics
//   <dir>/iter_<k>/text_labels.jsonl
//   <dir>/iter_<k>/char_labels.jsonl
//   <dir>/iter_<k>/pseudo_tc.jsonl
//   <dir>/iter_<k>/pseudo_ct.jsonl
//   <dir>/iter_<k>/scores.jsonl
void save_trace(const PipelineTrace& trace, const PipelineConfig& config, const std::filesystem::path& dir);
std::pair<PipelineTrace, PipelineConfig> load_trace(const std::filesystem::path& dir);

// Flat key-value view of the config (mirrors the CLI flags; embedded in meta.json).
std::string config_to_json_string(const PipelineConfig& config);

}  // namespace comicid

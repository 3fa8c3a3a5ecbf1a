#pragma once

// Speaker prediction backends and the pipe-delimited prompt/reply protocol:
// dialogue chunking, name and context extraction, prompt building, strict
// reply parsing with retries, and the deterministic scripted oracle used for
// offline runs and tests.

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "comicid/core.hpp"

namespace comicid {

// ---------------------------------------------------------------------------
// Protocol types
// ---------------------------------------------------------------------------

struct BackendCaps {
    bool supports_context = true;
    bool supports_candidates = true;
};

enum class PromptKind { NameExtraction, ContextExtraction, SpeakerPrediction };

struct CandidateInfo {
    std::string name;
    double prob = 0.0;
    bool show_prob = true;  // render "Name (0.56)" vs bare "Name"

    bool operator==(const CandidateInfo&) const = default;
};

struct PromptLine {
    std::string text_id;
    std::string text;
    std::optional<CandidateInfo> candidate;
};

struct PromptBundle {
    PromptKind kind = PromptKind::SpeakerPrediction;
    std::string system_prompt;
    std::vector<std::string> user_lines;  // exact wire format, one per text

    // Structured mirror of the request, used by the scripted oracle; remote
    // backends transmit only system_prompt and user_lines.
    std::vector<PromptLine> lines;
    std::vector<RosterEntry> roster;

    std::string user_content() const;  // user_lines joined with newlines
};

struct SpeakerReplyLine {
    std::string text_id;
    std::string name;     // as printed by the backend; the char_id is authoritative
    std::string char_id;  // roster id
    int level = 0;        // 1..5

    bool operator==(const SpeakerReplyLine&) const = default;
};

struct SpeakerReply {
    std::vector<SpeakerReplyLine> lines;

    bool operator==(const SpeakerReply&) const = default;
};

// ---------------------------------------------------------------------------
// Backend contract
// ---------------------------------------------------------------------------

class SpeakerBackend {
public:
    virtual ~SpeakerBackend() = default;
    virtual BackendCaps caps() const { return {}; }
    // Returns the raw reply text for one request. Throws BackendError on
    // transport-level failure.
    virtual std::string complete(const PromptBundle& prompt) = 0;
};

// ---------------------------------------------------------------------------
// Chunking and prompt construction
// ---------------------------------------------------------------------------

struct PromptOptions {
    bool context = true;     // inject extracted story context
    bool candidates = true;  // append per-text speaker candidates
    bool show_prob = true;   // print candidate probabilities
    std::string language = "en";
};

// Reading-ordered text ids split greedily into consecutive chunks of at most
// chunk_size entries.
std::vector<std::vector<std::string>> chunk_dialogue(const ComicDocument& doc, int chunk_size = 60);

PromptBundle build_name_extraction_prompt(const ComicDocument& doc, const std::string& language = "en");
PromptBundle build_context_prompt(const ComicDocument& doc, const NameRoster& roster,
                                  const std::string& language = "en");

// Builds the speaker prediction request for one chunk. `context` may be empty
// (section omitted); `candidates` maps text ids to their speaker candidates
// and may be empty.
PromptBundle build_prompt(const ComicDocument& doc, const std::vector<std::string>& chunk_ids,
                          const NameRoster& roster, const std::string& context,
                          const std::map<std::string, CandidateInfo>& candidates,
                          const std::string& language = "en");

// Strict parse of a pipe-delimited reply. Validates line count, id-set
// equality with the chunk, roster membership and the confidence level range.
// Throws ReplyParseError carrying the offending line.
SpeakerReply parse_reply(const std::string& raw, const std::vector<std::string>& chunk_ids, const NameRoster& roster);

// Canonical rendering of a reply; parse_reply(format_reply(r)) == r.
std::string format_reply(const SpeakerReply& reply);

// The reprompt sent after a parse failure: the original request plus a
// correction section naming the error. Deterministic, so transcripts recorded
// from flaky sessions replay exactly.
PromptBundle with_parse_correction(const PromptBundle& bundle, const std::string& error);

// Renders one candidate suffix, e.g. "Keitaro (0.56)" (probability always
// with two decimals) or "Keitaro" when probabilities are hidden.
std::string format_candidate(const CandidateInfo& candidate);

// ---------------------------------------------------------------------------
// High-level operations
// ---------------------------------------------------------------------------

// Parses "Character ID | Character Name" lines into a roster; ids are
// reassigned A, B, ... and duplicate names keep their first occurrence.
// Retries on parse failure; throws BackendError once the budget is spent.
NameRoster extract_names(const ComicDocument& doc, SpeakerBackend& backend, int retry_budget = 2,
                         const std::string& language = "en");

// Opaque story summary + character profiles, injected verbatim into later
// prompts. Whitespace-only replies collapse to the empty string.
std::string extract_context(const ComicDocument& doc, const NameRoster& roster, SpeakerBackend& backend,
                            int retry_budget = 2, const std::string& language = "en");

// Runs chunked speaker prediction over the whole document. Texts whose chunk
// still fails to parse after retry_budget retries are ABSTAIN. Candidates are
// taken from `candidates` (usually H(c->t) output) when the option and the
// backend both allow them.
LabelAssignment predict_speakers(const ComicDocument& doc, const NameRoster& roster, SpeakerBackend& backend,
                                 const PromptOptions& options, const PseudoLabelSet* candidates = nullptr,
                                 const std::string& context = "", int chunk_size = 60, int retry_budget = 2);

// ---------------------------------------------------------------------------
// Scripted oracle
// ---------------------------------------------------------------------------

struct LevelModel {
    int correct_min = 4;
    int correct_max = 5;
    int wrong_min = 1;
    int wrong_max = 3;
};

struct OracleConfig {
    double error_rate = 0.0;           // probability of answering with a wrong roster name
    double candidate_adopt_prob = 0.0; // probability of echoing a supplied candidate
    uint64_t seed = 0;
    LevelModel level_model;
};

// Deterministic stand-in for a remote LLM: answers from the document's ground
// truth, corrupted per error_rate, adopting supplied candidates per
// candidate_adopt_prob. Per-text randomness derives from (seed, text_id) so
// results are independent of chunking and dispatch order. Requires ground
// truth on every text region.
std::unique_ptr<SpeakerBackend> make_scripted_oracle(const ComicDocument& doc, const OracleConfig& config);

}  // namespace comicid

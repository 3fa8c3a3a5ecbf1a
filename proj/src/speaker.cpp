#include "comicid/speaker.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

#include "comicid/prompts.hpp"
#include "comicid/rng.hpp"

namespace comicid {

namespace {

std::string trim(const std::string& s) {
    size_t begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    size_t end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_lines(const std::string& raw) {
    std::vector<std::string> lines;
    std::istringstream in(raw);
    std::string line;
    while (std::getline(in, line)) {
        std::string t = trim(line);
        if (!t.empty()) lines.push_back(std::move(t));
    }
    return lines;
}

std::vector<std::string> split_pipes(const std::string& line) {
    std::vector<std::string> fields;
    size_t start = 0;
    while (true) {
        size_t pos = line.find('|', start);
        if (pos == std::string::npos) {
            fields.push_back(trim(line.substr(start)));
            break;
        }
        fields.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return fields;
}

std::string roster_block(const std::vector<RosterEntry>& entries) {
    std::string out;
    for (const auto& e : entries) out += e.char_id + " | " + e.name + "\n";
    return out;
}

}  // namespace

std::string PromptBundle::user_content() const {
    std::string out;
    for (size_t i = 0; i < user_lines.size(); ++i) {
        out += user_lines[i];
        if (i + 1 < user_lines.size()) out += "\n";
    }
    return out;
}

std::string format_candidate(const CandidateInfo& candidate) {
    if (!candidate.show_prob) return candidate.name;
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", candidate.prob);
    return candidate.name + " (" + buf + ")";
}

// ---------------------------------------------------------------------------
// Chunking
// ---------------------------------------------------------------------------

std::vector<std::vector<std::string>> chunk_dialogue(const ComicDocument& doc, int chunk_size) {
    if (chunk_size < 1) throw ValidationError("chunk_size must be >= 1");
    std::vector<std::string> ordered = reading_order(doc);
    std::vector<std::vector<std::string>> chunks;
    for (size_t start = 0; start < ordered.size(); start += static_cast<size_t>(chunk_size)) {
        size_t end = std::min(ordered.size(), start + static_cast<size_t>(chunk_size));
        chunks.emplace_back(ordered.begin() + static_cast<long>(start), ordered.begin() + static_cast<long>(end));
    }
    return chunks;
}

// ---------------------------------------------------------------------------
// Prompt construction
// ---------------------------------------------------------------------------

PromptBundle build_name_extraction_prompt(const ComicDocument& doc, const std::string& language) {
    const PromptTemplateSet& t = prompt_templates(language);
    PromptBundle bundle;
    bundle.kind = PromptKind::NameExtraction;
    bundle.system_prompt = t.name_extraction;
    for (const auto& id : reading_order(doc)) {
        const TextRegion* text = doc.find_text(id);
        bundle.user_lines.push_back(id + " | " + text->text);
        bundle.lines.push_back({id, text->text, std::nullopt});
    }
    return bundle;
}

PromptBundle build_context_prompt(const ComicDocument& doc, const NameRoster& roster, const std::string& language) {
    if (roster.empty()) throw ValidationError("context extraction requires a non-empty roster");
    const PromptTemplateSet& t = prompt_templates(language);
    PromptBundle bundle;
    bundle.kind = PromptKind::ContextExtraction;
    std::string prompt = t.context_intro;
    prompt += "\n" + t.roster_header + roster_block(roster.entries()) + "\n";
    prompt += t.context_io_format;
    for (const auto& e : roster.entries()) prompt += "- " + e.name + ":\n";
    bundle.system_prompt = prompt;
    for (const auto& id : reading_order(doc)) {
        const TextRegion* text = doc.find_text(id);
        bundle.user_lines.push_back(id + " | " + text->text);
        bundle.lines.push_back({id, text->text, std::nullopt});
    }
    bundle.roster = roster.entries();
    return bundle;
}

PromptBundle build_prompt(const ComicDocument& doc, const std::vector<std::string>& chunk_ids,
                          const NameRoster& roster, const std::string& context,
                          const std::map<std::string, CandidateInfo>& candidates, const std::string& language) {
    const PromptTemplateSet& t = prompt_templates(language);
    bool with_candidates = !candidates.empty();
    bool show_prob = true;
    if (with_candidates) show_prob = candidates.begin()->second.show_prob;

    std::string prompt = t.speaker_intro;
    if (with_candidates) prompt += "\n" + t.speaker_candidate_intro;

    prompt += "\n### Note\n";
    for (const auto& note : t.speaker_notes) prompt += note + "\n";
    if (with_candidates)
        for (const auto& note : t.speaker_candidate_notes) prompt += note + "\n";

    prompt += "\n" + t.roster_header + roster_block(roster.entries());

    std::string trimmed_context = trim(context);
    if (!trimmed_context.empty()) prompt += "\n" + t.context_header + trimmed_context + "\n";

    prompt += "\n" + t.io_format_header;
    prompt += "[Input format]\n";
    if (!with_candidates)
        prompt += t.input_format_plain;
    else
        prompt += show_prob ? t.input_format_candidate : t.input_format_candidate_noprob;
    prompt += "\n\n[Output format]\n" + t.output_format + "\n";

    prompt += "\n" + t.confidence_rubric;
    prompt += "\n";
    if (!with_candidates)
        prompt += t.example_plain;
    else
        prompt += show_prob ? t.example_candidate : t.example_candidate_noprob;

    PromptBundle bundle;
    bundle.kind = PromptKind::SpeakerPrediction;
    bundle.system_prompt = prompt;
    bundle.roster = roster.entries();
    for (const auto& id : chunk_ids) {
        const TextRegion* text = doc.find_text(id);
        if (!text) throw ValidationError("chunk references unknown text id: " + id);
        std::string line = id + " | " + text->text;
        std::optional<CandidateInfo> candidate;
        auto it = candidates.find(id);
        if (it != candidates.end()) {
            candidate = it->second;
            line += " | " + format_candidate(*candidate);
        }
        bundle.user_lines.push_back(std::move(line));
        bundle.lines.push_back({id, text->text, candidate});
    }
    return bundle;
}

// ---------------------------------------------------------------------------
// Reply parsing
// ---------------------------------------------------------------------------

SpeakerReply parse_reply(const std::string& raw, const std::vector<std::string>& chunk_ids, const NameRoster& roster) {
    std::vector<std::string> lines = split_lines(raw);
    if (lines.size() != chunk_ids.size())
        throw ReplyParseError(ReplyParseError::Code::LineCountMismatch,
                              "The number of output lines should be the same as the number of input lines (expected " +
                                  std::to_string(chunk_ids.size()) + ", got " + std::to_string(lines.size()) + ")",
                              lines.empty() ? "" : lines.front());

    std::set<std::string> expected(chunk_ids.begin(), chunk_ids.end());
    std::set<std::string> seen;
    SpeakerReply reply;
    for (const auto& line : lines) {
        std::vector<std::string> fields = split_pipes(line);
        if (fields.size() != 4)
            throw ReplyParseError(ReplyParseError::Code::MalformedLine,
                                  "expected 'Text ID | Character Name | Character ID | Confidence Level'", line);
        const std::string& text_id = fields[0];
        const std::string& name = fields[1];
        const std::string& char_id = fields[2];
        const std::string& level_str = fields[3];
        if (text_id.empty() || name.empty())
            throw ReplyParseError(ReplyParseError::Code::MalformedLine, "empty text id or character name", line);
        if (!expected.count(text_id))
            throw ReplyParseError(ReplyParseError::Code::MalformedLine, "text id '" + text_id + "' is not in this chunk",
                                  line);
        if (!seen.insert(text_id).second)
            throw ReplyParseError(ReplyParseError::Code::MalformedLine, "duplicate text id '" + text_id + "'", line);
        if (!roster.find_id(char_id))
            throw ReplyParseError(ReplyParseError::Code::UnknownCharId, "character id '" + char_id + "' is not in the roster",
                                  line);
        int level = 0;
        try {
            size_t consumed = 0;
            level = std::stoi(level_str, &consumed);
            if (consumed != level_str.size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw ReplyParseError(ReplyParseError::Code::MalformedLine, "confidence level is not an integer", line);
        }
        if (level < 1 || level > 5)
            throw ReplyParseError(ReplyParseError::Code::LevelOutOfRange,
                                  "confidence level must be in 1..5, got " + std::to_string(level), line);
        reply.lines.push_back({text_id, name, char_id, level});
    }
    return reply;
}

std::string format_reply(const SpeakerReply& reply) {
    std::string out;
    for (const auto& line : reply.lines)
        out += line.text_id + " | " + line.name + " | " + line.char_id + " | " + std::to_string(line.level) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Name / context extraction
// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> parse_roster_reply(const std::string& raw) {
    std::vector<std::string> lines = split_lines(raw);
    if (lines.empty())
        throw ReplyParseError(ReplyParseError::Code::LineCountMismatch, "empty name extraction reply", "");
    std::vector<std::string> names;
    std::set<std::string> seen;
    for (const auto& line : lines) {
        std::vector<std::string> fields = split_pipes(line);
        if (fields.size() != 2 || fields[1].empty())
            throw ReplyParseError(ReplyParseError::Code::MalformedLine, "expected 'Character ID | Character Name'", line);
        if (seen.insert(fields[1]).second) names.push_back(fields[1]);
    }
    return names;
}

}  // namespace

NameRoster extract_names(const ComicDocument& doc, SpeakerBackend& backend, int retry_budget,
                         const std::string& language) {
    PromptBundle bundle = build_name_extraction_prompt(doc, language);
    std::string last_error;
    for (int attempt = 0; attempt <= retry_budget; ++attempt) {
        std::string raw = backend.complete(bundle);
        try {
            return NameRoster::from_names(parse_roster_reply(raw));
        } catch (const ReplyParseError& e) {
            last_error = e.what();
        }
    }
    throw BackendError("name extraction failed after " + std::to_string(retry_budget) + " retries: " + last_error);
}

std::string extract_context(const ComicDocument& doc, const NameRoster& roster, SpeakerBackend& backend,
                            int /*retry_budget*/, const std::string& language) {
    PromptBundle bundle = build_context_prompt(doc, roster, language);
    return trim(backend.complete(bundle));
}

// ---------------------------------------------------------------------------
// Chunked prediction with retries
// ---------------------------------------------------------------------------

PromptBundle with_parse_correction(const PromptBundle& bundle, const std::string& error) {
    PromptBundle retry = bundle;
    retry.system_prompt += "\n### Correction\nYour previous reply could not be parsed: " + error +
                           ". Reply again, strictly following the output format, one line per input line.\n";
    return retry;
}

LabelAssignment predict_speakers(const ComicDocument& doc, const NameRoster& roster, SpeakerBackend& backend,
                                 const PromptOptions& options, const PseudoLabelSet* candidates,
                                 const std::string& context, int chunk_size, int retry_budget) {
    BackendCaps caps = backend.caps();
    bool use_candidates = options.candidates && caps.supports_candidates && candidates != nullptr;
    std::string effective_context = options.context && caps.supports_context ? context : "";

    std::map<std::string, CandidateInfo> candidate_map;
    if (use_candidates) {
        for (const auto& [text_id, pseudo] : *candidates)
            candidate_map[text_id] = CandidateInfo{pseudo.name, pseudo.source_confidence.as_prob(), options.show_prob};
    }

    LabelAssignment assignment;
    for (const auto& chunk : chunk_dialogue(doc, chunk_size)) {
        std::map<std::string, CandidateInfo> chunk_candidates;
        for (const auto& id : chunk) {
            auto it = candidate_map.find(id);
            if (it != candidate_map.end()) chunk_candidates[id] = it->second;
        }
        PromptBundle bundle = build_prompt(doc, chunk, roster, effective_context, chunk_candidates, options.language);

        std::optional<SpeakerReply> reply;
        PromptBundle attempt_bundle = bundle;
        for (int attempt = 0; attempt <= retry_budget && !reply; ++attempt) {
            std::string raw = backend.complete(attempt_bundle);
            try {
                reply = parse_reply(raw, chunk, roster);
            } catch (const ReplyParseError& e) {
                attempt_bundle = with_parse_correction(bundle, e.what());
            }
        }

        if (reply) {
            for (const auto& line : reply->lines) {
                const RosterEntry* entry = roster.find_id(line.char_id);
                // the character id is the authoritative field; the printed
                // name is informational
                assignment.set(line.text_id, Label{entry->name, Confidence::level(line.level)});
            }
        } else {
            for (const auto& id : chunk) assignment.set_abstain(id);
        }
    }
    return assignment;
}

// ---------------------------------------------------------------------------
// Scripted oracle
// ---------------------------------------------------------------------------

namespace {

class ScriptedOracle final : public SpeakerBackend {
public:
    ScriptedOracle(const ComicDocument& doc, const OracleConfig& config) : config_(config), title_(doc.title) {
        if (config.error_rate < 0.0 || config.error_rate > 1.0)
            throw ValidationError("oracle error_rate must be in [0,1]");
        if (config.candidate_adopt_prob < 0.0 || config.candidate_adopt_prob > 1.0)
            throw ValidationError("oracle candidate_adopt_prob must be in [0,1]");
        for (const auto& t : doc.texts) {
            if (!t.gt_label)
                throw ValidationError("scripted oracle requires ground truth on every text; missing at " + t.id);
        }
        for (const auto& id : reading_order(doc)) {
            const std::string& name = *doc.find_text(id)->gt_label;
            if (seen_.insert(name).second) names_in_order_.push_back(name);
        }
        for (const auto& c : doc.characters) {
            if (c.gt_label && seen_.insert(*c.gt_label).second) names_in_order_.push_back(*c.gt_label);
        }
        for (const auto& t : doc.texts) text_gt_[t.id] = *t.gt_label;
    }

    std::string complete(const PromptBundle& prompt) override {
        switch (prompt.kind) {
            case PromptKind::NameExtraction: return reply_names();
            case PromptKind::ContextExtraction: return reply_context(prompt);
            case PromptKind::SpeakerPrediction: return reply_speakers(prompt);
        }
        throw InternalError("unhandled prompt kind");
    }

private:
    std::string reply_names() const {
        std::string out;
        for (size_t i = 0; i < names_in_order_.size(); ++i) {
            std::string id = std::string(1, static_cast<char>('A' + i % 26));
            out += id + " | " + names_in_order_[i] + "\n";
        }
        return out;
    }

    std::string reply_context(const PromptBundle& prompt) const {
        std::string out = "1. Summary: " + (title_.empty() ? std::string("The story") : title_) +
                          " follows the listed characters through a sequence of short scenes.\n2. Characters:\n";
        for (const auto& e : prompt.roster) out += "- " + e.name + ": a recurring character.\n";
        return out;
    }

    std::string reply_speakers(const PromptBundle& prompt) const {
        std::vector<std::string> roster_names;
        for (const auto& e : prompt.roster) roster_names.push_back(e.name);
        if (roster_names.empty()) throw InternalError("speaker prompt carries an empty roster");

        std::string out;
        for (const auto& line : prompt.lines) {
            auto gt_it = text_gt_.find(line.text_id);
            if (gt_it == text_gt_.end()) throw InternalError("oracle asked about unknown text id: " + line.text_id);
            const std::string& gt = gt_it->second;

            // fixed draw order keeps results independent of branching
            Rng rng(derive_seed(config_.seed, "oracle-text", fnv1a64(line.text_id)));
            double u_err = rng.next_double();
            uint64_t wrong_pick = rng.next_u64();
            double u_adopt = rng.next_double();
            uint64_t level_pick = rng.next_u64();

            std::vector<std::string> wrong_pool;
            for (const auto& name : roster_names)
                if (name != gt) wrong_pool.push_back(name);

            std::string answer;
            bool gt_available = std::find(roster_names.begin(), roster_names.end(), gt) != roster_names.end();
            if (u_err < config_.error_rate || !gt_available) {
                answer = wrong_pool.empty() ? roster_names.front() : wrong_pool[wrong_pick % wrong_pool.size()];
            } else {
                answer = gt;
            }
            if (line.candidate && u_adopt < config_.candidate_adopt_prob) answer = line.candidate->name;

            bool correct = answer == gt;
            int lo = correct ? config_.level_model.correct_min : config_.level_model.wrong_min;
            int hi = correct ? config_.level_model.correct_max : config_.level_model.wrong_max;
            int level = lo + static_cast<int>(level_pick % static_cast<uint64_t>(hi - lo + 1));

            std::string char_id = "?";
            for (const auto& e : prompt.roster)
                if (e.name == answer) {
                    char_id = e.char_id;
                    break;
                }
            out += line.text_id + " | " + answer + " | " + char_id + " | " + std::to_string(level) + "\n";
        }
        return out;
    }

    OracleConfig config_;
    std::string title_;
    std::set<std::string> seen_;
    std::vector<std::string> names_in_order_;
    std::map<std::string, std::string> text_gt_;
};

}  // namespace

std::unique_ptr<SpeakerBackend> make_scripted_oracle(const ComicDocument& doc, const OracleConfig& config) {
    return std::make_unique<ScriptedOracle>(doc, config);
}

}  // namespace comicid

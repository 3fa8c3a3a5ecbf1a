#pragma once

// Versioned prompt template assets. Wording is data, not logic: the template
// set is selected by language tag so alternative translations can be
// registered without touching the prompt builders.

#include <string>
#include <vector>

namespace comicid {

struct PromptTemplateSet {
    std::string language;
    std::string version;

    // character name extraction
    std::string name_extraction;

    // context extraction (story summary + character profiles); roster and
    // output skeleton are injected between intro and io_format
    std::string context_intro;
    std::string context_io_format;

    // speaker prediction
    std::string speaker_intro;
    std::string speaker_candidate_intro;  // extra paragraph when candidates are supplied
    std::vector<std::string> speaker_notes;
    std::vector<std::string> speaker_candidate_notes;
    std::string roster_header;      // "### List of appearing characters" + column header
    std::string context_header;     // "### Context information"
    std::string io_format_header;   // "### Input/Output format"
    std::string input_format_plain;
    std::string input_format_candidate;
    std::string input_format_candidate_noprob;
    std::string output_format;
    std::string confidence_rubric;  // full "### Confidence level" block
    std::string example_plain;
    std::string example_candidate;
    std::string example_candidate_noprob;
};

// Throws ValidationError for unknown language tags; "en" is built in.
const PromptTemplateSet& prompt_templates(const std::string& language = "en");

}  // namespace comicid

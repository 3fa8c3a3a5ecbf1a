#include "comicid/prompts.hpp"

#include "comicid/errors.hpp"

namespace comicid {

namespace {

PromptTemplateSet make_english() {
    PromptTemplateSet t;
    t.language = "en";
    t.version = "en-1";

    t.name_extraction =
        "Given a sequence of manga text, identify the names of the characters estimated to appear.\n"
        "\n"
        "### Note\n"
        "- When extracting character names, provide full names if possible, e.g., \"Taro Yamada\".\n"
        "- If full names are not explicitly mentioned, analyze the context within the text to deduce the full names.\n"
        "- If the name of a character is unknown, describe them by their occupation or their relationship with other "
        "characters, e.g., \"the teacher\" or \"Yamada's mother\".\n"
        "\n"
        "### Input/Output format\n"
        "[Input format]\n"
        "Text ID | Text\n"
        "\n"
        "[Output format]\n"
        "Character ID | Character Name\n";

    t.context_intro =
        "Given a sequence of manga text and a list of characters who appear in it, produce a story summary and "
        "character profiles based on the following steps.\n"
        "\n"
        "1. Summary: summarize the story in the manga.\n"
        "2. Characters: For each character listed, provide details about their attributes, including gender, "
        "estimated age, role, a brief description, and relationships with other characters.\n";

    t.context_io_format =
        "### Input/Output format\n"
        "[Input format]\n"
        "Text ID | Text\n"
        "\n"
        "[Output format]\n"
        "1. Summary:\n"
        "2. Characters:\n";

    t.speaker_intro =
        "Given a sequence of manga text and a list of characters who appear in it, predict the speaker of each text "
        "considering the context information.\n"
        "Please also output a confidence level of prediction on a scale of 5.\n";

    t.speaker_candidate_intro =
        "For each text, you will be given a speaker candidate, which is obtained from the image-based prediction, "
        "along with a probability for that prediction. Use this as a reference.\n";

    t.speaker_notes = {
        "- Not all the given characters might be speaking in the provided text.",
        "- The number of output lines should be the same as the number of input lines.",
    };

    t.speaker_candidate_notes = {
        "- If no image-based predictions are given, predict the speaker based on the text and the context.",
        "- The image-based predictions may not always be correct. Exercise caution, especially when the prediction "
        "probability is low.",
    };

    t.roster_header =
        "### List of appearing characters\n"
        "Character ID | Character Name\n";

    t.context_header = "### Context information\n";

    t.io_format_header = "### Input/Output format\n";
    t.input_format_plain = "Text ID | Text";
    t.input_format_candidate = "Text ID | Text | Speaker Candidate (Prediction Probability)";
    t.input_format_candidate_noprob = "Text ID | Text | Speaker Candidate";
    t.output_format = "Text ID | Character Name | Character ID | Confidence Level";

    t.confidence_rubric =
        "### Confidence level\n"
        "Score and criteria:\n"
        "1: Completely uncertain, the prediction is near random.\n"
        "2: Low confidence, the probability that the prediction is correct is less than 50%.\n"
        "3: Moderate confidence, the prediction is likely correct but could be wrong.\n"
        "4: High confidence, the prediction is probably correct, but not 100%.\n"
        "5: Very high confidence, the prediction is almost certainly correct.\n";

    t.example_plain =
        "### Input/Output example\n"
        "[Input]\n"
        "1 | Hey, Naru.\n"
        "2 | What, Keitaro?\n"
        "\n"
        "[Output]\n"
        "1 | Keitaro | A | 5\n"
        "2 | Naru | B | 4\n";

    t.example_candidate =
        "### Input/Output example\n"
        "[Input]\n"
        "1 | Hey, Naru. | Keitaro (0.56)\n"
        "2 | What, Keitaro? | Naru (0.80)\n"
        "\n"
        "[Output]\n"
        "1 | Keitaro | A | 5\n"
        "2 | Naru | B | 4\n";

    t.example_candidate_noprob =
        "### Input/Output example\n"
        "[Input]\n"
        "1 | Hey, Naru. | Keitaro\n"
        "2 | What, Keitaro? | Naru\n"
        "\n"
        "[Output]\n"
        "1 | Keitaro | A | 5\n"
        "2 | Naru | B | 4\n";

    return t;
}

}  // namespace

const PromptTemplateSet& prompt_templates(const std::string& language) {
    static const PromptTemplateSet english = make_english();
    if (language == "en") return english;
    throw ValidationError("no prompt template set registered for language '" + language + "'");
}

}  // namespace comicid

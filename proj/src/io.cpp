#include "comicid/io.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace comicid::io {

using nlohmann::json;

namespace {

json parse_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValidationError("cannot write file: " + path.string());
    out << content;
}

// Applies fn to each non-empty line parsed as JSON, with 1-based line numbers
// in error messages.
template <typename Fn>
void for_each_jsonl_record(const std::filesystem::path& path, Fn&& fn) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open file: " + path.string());
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
        try {
            fn(record);
        } catch (const ValidationError& e) {
            throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

double require_finite_number(const json& j, const std::string& field) {
    if (!j.is_number()) throw ValidationError("field '" + field + "' must be a number");
    double v = j.get<double>();
    if (!std::isfinite(v)) throw ValidationError("field '" + field + "' must be finite");
    return v;
}

std::string require_string(const json& j, const std::string& field) {
    if (!j.is_string()) throw ValidationError("field '" + field + "' must be a string");
    return j.get<std::string>();
}

int require_int(const json& j, const std::string& field) {
    if (!j.is_number_integer()) throw ValidationError("field '" + field + "' must be an integer");
    return j.get<int>();
}

BoundingBox parse_box(const json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 4) throw ValidationError(where + ": box must be an array of 4 numbers");
    BoundingBox box;
    box.x1 = require_finite_number(j[0], where + ".box[0]");
    box.y1 = require_finite_number(j[1], where + ".box[1]");
    box.x2 = require_finite_number(j[2], where + ".box[2]");
    box.y2 = require_finite_number(j[3], where + ".box[3]");
    validate_box(box, where);
    return box;
}

json box_to_json(const BoundingBox& box) { return json::array({box.x1, box.y1, box.x2, box.y2}); }

json confidence_to_json(const Confidence& c) {
    json j;
    if (c.is_level())
        j["level"] = c.level_value();
    else
        j["prob"] = c.prob_value();
    return j;
}

Confidence confidence_from_json(const json& j) {
    if (!j.is_object()) throw ValidationError("confidence must be an object with 'level' or 'prob'");
    if (j.contains("level")) {
        int level = require_int(j.at("level"), "confidence.level");
        if (level < 1 || level > 5) throw ValidationError("confidence level out of range 1..5: " + std::to_string(level));
        return Confidence::level(level);
    }
    if (j.contains("prob")) {
        double p = require_finite_number(j.at("prob"), "confidence.prob");
        if (p < 0.0 || p > 1.0) throw ValidationError("confidence prob out of range [0,1]");
        return Confidence::prob(p);
    }
    throw ValidationError("confidence must contain 'level' or 'prob'");
}

}  // namespace

// ---------------------------------------------------------------------------
// Documents
// ---------------------------------------------------------------------------

ComicDocument load_document(const std::filesystem::path& path) {
    json root = parse_json_file(path);
    if (!root.is_object()) throw ValidationError(path.string() + ": document root must be an object");
    try {
        ComicDocument doc;
        if (root.contains("format_version") && require_string(root.at("format_version"), "format_version") != kFormatVersion)
            throw ValidationError("unsupported format_version (expected " + std::string(kFormatVersion) + ")");
        doc.title = root.contains("title") ? require_string(root.at("title"), "title") : "";
        if (!root.contains("pages") || !root.at("pages").is_array())
            throw ValidationError("document requires a 'pages' array");

        for (const auto& page_json : root.at("pages")) {
            PageInfo page;
            page.index = require_int(page_json.at("index"), "page.index");
            page.width = require_finite_number(page_json.at("width"), "page.width");
            page.height = require_finite_number(page_json.at("height"), "page.height");
            doc.pages.push_back(page);

            std::string page_locus = "page " + std::to_string(page.index);
            if (page_json.contains("characters")) {
                for (const auto& cj : page_json.at("characters")) {
                    CharacterRegion c;
                    c.id = require_string(cj.at("id"), page_locus + " character.id");
                    c.page_index = page.index;
                    c.box = parse_box(cj.at("box"), page_locus + " character " + c.id);
                    if (cj.contains("gt_label") && !cj.at("gt_label").is_null())
                        c.gt_label = require_string(cj.at("gt_label"), "character " + c.id + ".gt_label");
                    doc.characters.push_back(std::move(c));
                }
            }
            if (page_json.contains("texts")) {
                for (const auto& tj : page_json.at("texts")) {
                    TextRegion t;
                    t.id = require_string(tj.at("id"), page_locus + " text.id");
                    t.page_index = page.index;
                    t.box = parse_box(tj.at("box"), page_locus + " text " + t.id);
                    t.text = require_string(tj.at("text"), "text " + t.id + ".text");
                    t.order = require_int(tj.at("order"), "text " + t.id + ".order");
                    if (tj.contains("gt_label") && !tj.at("gt_label").is_null())
                        t.gt_label = require_string(tj.at("gt_label"), "text " + t.id + ".gt_label");
                    doc.texts.push_back(std::move(t));
                }
            }
        }

        if (root.contains("roster")) {
            std::vector<RosterEntry> entries;
            for (const auto& rj : root.at("roster")) {
                RosterEntry e;
                e.char_id = require_string(rj.at("id"), "roster.id");
                e.name = require_string(rj.at("name"), "roster.name");
                if (rj.contains("unmapped")) e.unmapped = rj.at("unmapped").get<bool>();
                entries.push_back(std::move(e));
            }
            doc.roster = NameRoster::from_entries(std::move(entries));
        }

        validate_document(doc);
        return doc;
    } catch (const json::exception& e) {
        throw ValidationError(path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void save_document(const ComicDocument& doc, const std::filesystem::path& path) {
    json root;
    root["format_version"] = kFormatVersion;
    root["title"] = doc.title;
    json pages = json::array();
    for (const auto& page : doc.pages) {
        json pj;
        pj["index"] = page.index;
        pj["width"] = page.width;
        pj["height"] = page.height;
        json chars = json::array();
        for (const auto& c : doc.characters) {
            if (c.page_index != page.index) continue;
            json cj;
            cj["id"] = c.id;
            cj["box"] = box_to_json(c.box);
            if (c.gt_label) cj["gt_label"] = *c.gt_label;
            chars.push_back(std::move(cj));
        }
        json texts = json::array();
        for (const auto& t : doc.texts) {
            if (t.page_index != page.index) continue;
            json tj;
            tj["id"] = t.id;
            tj["box"] = box_to_json(t.box);
            tj["text"] = t.text;
            tj["order"] = t.order;
            if (t.gt_label) tj["gt_label"] = *t.gt_label;
            texts.push_back(std::move(tj));
        }
        pj["characters"] = std::move(chars);
        pj["texts"] = std::move(texts);
        pages.push_back(std::move(pj));
    }
    root["pages"] = std::move(pages);
    if (!doc.roster.empty()) {
        json roster = json::array();
        for (const auto& e : doc.roster.entries()) {
            json rj;
            rj["id"] = e.char_id;
            rj["name"] = e.name;
            if (e.unmapped) rj["unmapped"] = true;
            roster.push_back(std::move(rj));
        }
        root["roster"] = std::move(roster);
    }
    write_text_file(path, root.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Scores
// ---------------------------------------------------------------------------

RelationshipMatrix load_scores(const std::filesystem::path& path, const ComicDocument& doc, ScoreRange range) {
    RelationshipMatrix matrix;
    for_each_jsonl_record(path, [&](const json& record) {
        std::string char_id = require_string(record.at("char_id"), "char_id");
        std::string text_id = require_string(record.at("text_id"), "text_id");
        double score = require_finite_number(record.at("score"), "score");
        if (!doc.find_character(char_id)) throw ValidationError("unknown char_id: " + char_id);
        if (!doc.find_text(text_id)) throw ValidationError("unknown text_id: " + text_id);
        if (matrix.contains(char_id, text_id)) throw ValidationError("duplicate pair (" + char_id + "," + text_id + ")");
        if (range == ScoreRange::UnitInterval && !(score > 0.0 && score <= 1.0))
            throw ValidationError("score must be in (0,1], got " + std::to_string(score));
        if (!(score > 0.0)) throw ValidationError("score must be positive, got " + std::to_string(score));
        matrix.set(char_id, text_id, score);
    });
    return matrix;
}

void save_scores(const RelationshipMatrix& matrix, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& [key, score] : matrix.entries()) {
        json record;
        record["char_id"] = key.first;
        record["text_id"] = key.second;
        record["score"] = score;
        out << record.dump() << "\n";
    }
    write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Ground-truth pairs
// ---------------------------------------------------------------------------

GtPairs load_gt_pairs(const std::filesystem::path& path, const ComicDocument& doc) {
    GtPairs pairs;
    for_each_jsonl_record(path, [&](const json& record) {
        std::string char_id = require_string(record.at("char_id"), "char_id");
        std::string text_id = require_string(record.at("text_id"), "text_id");
        if (!doc.find_character(char_id)) throw ValidationError("unknown char_id: " + char_id);
        if (!doc.find_text(text_id)) throw ValidationError("unknown text_id: " + text_id);
        pairs.insert({char_id, text_id});  // duplicates collapse
    });
    return pairs;
}

void save_gt_pairs(const GtPairs& pairs, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& [char_id, text_id] : pairs) {
        json record;
        record["char_id"] = char_id;
        record["text_id"] = text_id;
        out << record.dump() << "\n";
    }
    write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Features
// ---------------------------------------------------------------------------

FeatureTable load_features(const std::filesystem::path& path) {
    FeatureTable table;
    std::optional<size_t> dim;
    for_each_jsonl_record(path, [&](const json& record) {
        std::string char_id = require_string(record.at("char_id"), "char_id");
        const json& vec_json = record.at("vector");
        if (!vec_json.is_array()) throw ValidationError("field 'vector' must be an array");
        std::vector<double> vec;
        vec.reserve(vec_json.size());
        for (size_t i = 0; i < vec_json.size(); ++i)
            vec.push_back(require_finite_number(vec_json[i], "vector[" + std::to_string(i) + "]"));
        if (vec.empty()) throw ValidationError("empty feature vector for " + char_id);
        if (dim && *dim != vec.size())
            throw ValidationError("feature dimension mismatch for " + char_id + ": expected " + std::to_string(*dim) +
                                  ", got " + std::to_string(vec.size()));
        dim = vec.size();
        if (table.count(char_id)) throw ValidationError("duplicate feature record for " + char_id);
        table[char_id] = std::move(vec);
    });
    return table;
}

void save_features(const FeatureTable& features, const std::filesystem::path& path) {
    std::ostringstream out;
    for (const auto& [char_id, vec] : features) {
        json record;
        record["char_id"] = char_id;
        record["vector"] = vec;
        out << record.dump() << "\n";
    }
    write_text_file(path, out.str());
}

// ---------------------------------------------------------------------------
// Name maps
// ---------------------------------------------------------------------------

NameMap load_name_map(const std::filesystem::path& path) {
    json root = parse_json_file(path);
    if (!root.is_object()) throw ValidationError(path.string() + ": name map must be a JSON object");
    NameMap map;
    for (const auto& [key, value] : root.items()) {
        if (value.is_null())
            map[key] = std::nullopt;
        else if (value.is_string())
            map[key] = value.get<std::string>();
        else
            throw ValidationError(path.string() + ": mapping for '" + key + "' must be a string or null");
    }
    return map;
}

void save_name_map(const NameMap& map, const std::filesystem::path& path) {
    json root = json::object();
    for (const auto& [key, value] : map) {
        if (value)
            root[key] = *value;
        else
            root[key] = nullptr;
    }
    write_text_file(path, root.dump(2) + "\n");
}

NameRoster apply_name_map(const NameRoster& roster, const NameMap& map) {
    std::vector<RosterEntry> entries;
    for (const auto& e : roster.entries()) {
        auto it = map.find(e.name);
        if (it == map.end()) throw ValidationError("name map is missing key: " + e.name);
        RosterEntry mapped = e;
        if (it->second)
            mapped.name = *it->second;
        else
            mapped.unmapped = true;
        entries.push_back(std::move(mapped));
    }
    return NameRoster::from_entries(std::move(entries));
}

// ---------------------------------------------------------------------------
// Prediction dumps
// ---------------------------------------------------------------------------

void dump_predictions(const PipelineTrace& trace, const std::filesystem::path& path) {
    if (trace.iterations.empty()) throw ValidationError("cannot dump an empty trace");
    std::ostringstream out;
    auto emit = [&](int iteration, const char* kind, const LabelAssignment& assignment) {
        for (const auto& [region_id, label] : assignment.entries()) {
            json record;
            record["iteration"] = iteration;
            record["region_kind"] = kind;
            record["region_id"] = region_id;
            if (label) {
                record["name"] = label->name;
                record["confidence"] = confidence_to_json(label->confidence);
            } else {
                record["name"] = nullptr;
            }
            out << record.dump() << "\n";
        }
    };
    for (const auto& rec : trace.iterations) {
        emit(rec.iteration, "text", rec.text_assignment);
        emit(rec.iteration, "char", rec.char_assignment);
    }
    write_text_file(path, out.str());
}

std::vector<PredictionRecord> load_predictions(const std::filesystem::path& path) {
    std::vector<PredictionRecord> records;
    for_each_jsonl_record(path, [&](const json& record) {
        PredictionRecord out;
        out.iteration = require_int(record.at("iteration"), "iteration");
        if (out.iteration < 0) throw ValidationError("iteration must be >= 0");
        out.region_kind = require_string(record.at("region_kind"), "region_kind");
        if (out.region_kind != "text" && out.region_kind != "char")
            throw ValidationError("region_kind must be 'text' or 'char', got '" + out.region_kind + "'");
        out.region_id = require_string(record.at("region_id"), "region_id");
        if (record.at("name").is_null()) {
            if (record.contains("confidence")) throw ValidationError("ABSTAIN record must not carry a confidence");
        } else {
            std::string name = require_string(record.at("name"), "name");
            if (!record.contains("confidence")) throw ValidationError("labeled record requires a confidence");
            out.label = Label{name, confidence_from_json(record.at("confidence"))};
        }
        records.push_back(std::move(out));
    });
    return records;
}

std::map<int, std::pair<LabelAssignment, LabelAssignment>> fold_predictions(
    const std::vector<PredictionRecord>& records) {
    std::map<int, std::pair<LabelAssignment, LabelAssignment>> out;
    for (const auto& rec : records) {
        auto& [texts, chars] = out[rec.iteration];
        LabelAssignment& target = rec.region_kind == "text" ? texts : chars;
        if (rec.label)
            target.set(rec.region_id, *rec.label);
        else
            target.set_abstain(rec.region_id);
    }
    return out;
}

}  // namespace comicid::io

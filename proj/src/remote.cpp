#include "comicid/remote.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "comicid/rng.hpp"

namespace comicid {

using nlohmann::json;

uint64_t request_hash(const PromptBundle& bundle) {
    std::string material = bundle.system_prompt;
    material += '\x1e';
    for (const auto& line : bundle.user_lines) {
        material += line;
        material += '\x1f';
    }
    return fnv1a64(material);
}

namespace {

std::string hash_hex(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct TranscriptRecord {
    int chunk_index = 0;
    std::string request_hash_hex;
    std::string raw_reply;
};

std::vector<TranscriptRecord> load_transcript(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("cannot open transcript: " + path.string());
    std::vector<TranscriptRecord> records;
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
        TranscriptRecord out;
        out.chunk_index = record.at("chunk_index").get<int>();
        out.request_hash_hex = record.at("request_hash").get<std::string>();
        out.raw_reply = record.at("raw_reply").get<std::string>();
        records.push_back(std::move(out));
    }
    return records;
}

// Splits "http://host:port/path" into client base and path.
struct ParsedEndpoint {
    std::string base;  // scheme://host[:port]
    std::string path;
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
    size_t scheme_end = endpoint.find("://");
    if (scheme_end == std::string::npos) throw ValidationError("endpoint must include a scheme: " + endpoint);
    size_t path_start = endpoint.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

class RemoteBackend final : public SpeakerBackend {
public:
    explicit RemoteBackend(RemoteConfig config) : config_(std::move(config)) {
        if (config_.transcript_path.empty()) throw ValidationError("remote backend requires a transcript path");
        if (config_.mode == TranscriptMode::Replay) {
            records_ = load_transcript(config_.transcript_path);
            served_.assign(records_.size(), false);
        } else {
            if (config_.endpoint.empty()) throw ValidationError("record mode requires an endpoint");
        }
    }

    std::string complete(const PromptBundle& prompt) override {
        uint64_t hash = request_hash(prompt);
        if (config_.mode == TranscriptMode::Replay) return replay(hash);
        std::string reply = post(prompt);
        append_transcript_record(config_.transcript_path, request_index_, hash, reply);
        ++request_index_;
        return reply;
    }

private:
    std::string replay(uint64_t hash) {
        std::string hex = hash_hex(hash);
        // serve matching records in recorded order; once all are consumed the
        // last match is reused so deterministic re-derivations (e.g. resume
        // re-requesting the context) still replay
        int last_match = -1;
        for (size_t i = 0; i < records_.size(); ++i) {
            if (records_[i].request_hash_hex != hex) continue;
            last_match = static_cast<int>(i);
            if (!served_[i]) {
                served_[i] = true;
                return records_[i].raw_reply;
            }
        }
        if (last_match >= 0) return records_[static_cast<size_t>(last_match)].raw_reply;
        throw BackendError("no transcript record for request hash " + hex + " in " + config_.transcript_path.string());
    }

    std::string post(const PromptBundle& prompt) {
        ParsedEndpoint ep = parse_endpoint(config_.endpoint);
        json body;
        body["model"] = config_.model;
        body["temperature"] = 0;
        body["messages"] = json::array({
            json{{"role", "system"}, {"content", prompt.system_prompt}},
            json{{"role", "user"}, {"content", prompt.user_content()}},
        });
        std::string payload = body.dump();

        std::string last_error;
        for (int attempt = 0; attempt <= config_.transport_retries; ++attempt) {
            httplib::Client client(ep.base);
            client.set_read_timeout(120, 0);
            client.set_connection_timeout(10, 0);
            httplib::Headers headers;
            const char* token = std::getenv(config_.auth_env.c_str());
            if (token && *token) headers.emplace("Authorization", std::string("Bearer ") + token);
            auto res = client.Post(ep.path, headers, payload, "application/json");
            if (!res) {
                last_error = "transport error: " + httplib::to_string(res.error());
                continue;
            }
            if (res->status != 200) {
                last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
                continue;
            }
            try {
                json reply = json::parse(res->body);
                return reply.at("choices").at(0).at("message").at("content").get<std::string>();
            } catch (const json::exception& e) {
                last_error = std::string("malformed completion response: ") + e.what();
            }
        }
        throw BackendError("remote backend failed after " + std::to_string(config_.transport_retries) +
                           " retries: " + last_error);
    }

    RemoteConfig config_;
    std::vector<TranscriptRecord> records_;
    std::vector<bool> served_;
    int request_index_ = 0;
};

}  // namespace

void append_transcript_record(const std::filesystem::path& path, int chunk_index, uint64_t hash,
                              const std::string& raw_reply) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw ValidationError("cannot write transcript: " + path.string());
    json record;
    record["chunk_index"] = chunk_index;
    record["request_hash"] = hash_hex(hash);
    record["raw_reply"] = raw_reply;
    out << record.dump() << "\n";
}

std::unique_ptr<SpeakerBackend> make_remote_backend(const RemoteConfig& config) {
    return std::make_unique<RemoteBackend>(config);
}

}  // namespace comicid

#pragma once

// Remote chat-completion backend with mandatory transcript record/replay.
// Record mode talks HTTP and appends every exchange to a JSON-lines
// transcript; replay mode serves recorded raw replies byte-exactly with no
// network access, keyed by a stable request hash.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "comicid/speaker.hpp"

namespace comicid {

enum class TranscriptMode { Record, Replay };

struct RemoteConfig {
    std::string endpoint;  // e.g. "http://localhost:8089/v1/chat/completions"
    std::string model = "gpt-4";
    std::string auth_env = "COMICID_API_TOKEN";  // bearer token environment variable
    int transport_retries = 2;                   // extra attempts on transport failure
    TranscriptMode mode = TranscriptMode::Replay;
    std::filesystem::path transcript_path;
};

// Stable content hash of a request (system prompt + user lines); transcript
// records are matched on it during replay.
uint64_t request_hash(const PromptBundle& bundle);

std::unique_ptr<SpeakerBackend> make_remote_backend(const RemoteConfig& config);

// Test/tooling helper: append one exchange to a transcript file in the same
// format record mode produces.
void append_transcript_record(const std::filesystem::path& path, int chunk_index, uint64_t hash,
                              const std::string& raw_reply);

}  // namespace comicid

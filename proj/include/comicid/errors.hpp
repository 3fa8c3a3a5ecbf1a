#pragma once

#include <stdexcept>
#include <string>

namespace comicid {

// Base class for all engine errors. Subclasses map to distinct CLI exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data: schema violations, invariant breaches in files, bad config values.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Structured-reply parse failure. Carries the offending line; callers may retry.
class ReplyParseError : public Error {
public:
    enum class Code {
        LineCountMismatch,
        UnknownCharId,
        LevelOutOfRange,
        MalformedLine,
    };

    ReplyParseError(Code code, const std::string& message, std::string offending_line)
        : Error(message), code_(code), offending_line_(std::move(offending_line)) {}

    Code code() const { return code_; }
    const std::string& offending_line() const { return offending_line_; }

private:
    Code code_;
    std::string offending_line_;
};

// Backend transport failure or retry exhaustion.
class BackendError : public Error {
public:
    using Error::Error;
};

// Classifier training is impossible: fewer than two classes in the pseudo labels.
class DegenerateTraining : public Error {
public:
    using Error::Error;
};

// States that should be unreachable.
class InternalError : public Error {
public:
    using Error::Error;
};

}  // namespace comicid

#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace harsel {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A required input file could not be opened.
class LoadError : public Error {
public:
    using Error::Error;
};

/// Input data is present but malformed.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Raw LLM/fixture text is not a single JSON object of the expected shape.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Parsed content references labels/features outside the allowed vocabulary,
/// or a value violates a hard constraint.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Invalid or incomplete configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// An operation's precondition on its arguments was violated.
class ArgumentError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    TransportError(int status, const std::string& what)
        : Error(what), status_(status) {}

    /// HTTP status, or -1 when no response was received.
    int status() const noexcept { return status_; }

private:
    int status_;
};

/// Wraps a failure of one pipeline stage.
class StageError : public Error {
public:
    StageError(std::string stage, const std::string& cause)
        : Error(stage + ": " + cause), stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

}  // namespace harsel

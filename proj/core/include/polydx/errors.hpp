#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace polydx {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad configuration value, detected at load/construction time.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Missing or unreadable file.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed record in a line-delimited input file.
class FormatError : public Error {
public:
    FormatError(const std::string& message, std::size_t line)
        : Error(message + " (line " + std::to_string(line) + ")"), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// A completion that should have contained a disease list contained none.
/// Callers decide whether to retry, fall back, or mark the source failed.
class EmptyListError : public Error {
public:
    using Error::Error;
};

/// Neither a Subjective nor an Objective section could be located.
class StructuringError : public Error {
public:
    using Error::Error;
};

/// No query could be extracted from a search-plan completion.
class PlanParseError : public Error {
public:
    using Error::Error;
};

/// A web tool invocation failed at the transport level. The research loop
/// continues to the next step.
class ToolError : public Error {
public:
    using Error::Error;
};

/// Transient transport failure from a completion provider. The gateway
/// retries these; callers never see them directly.
class TransportError : public Error {
public:
    using Error::Error;
};

/// Completion provider failed for good (retries exhausted or a
/// non-retryable response).
class ProviderError : public Error {
public:
    using Error::Error;
};

/// The scripted mock had no entry matching the prompt. Indicates a
/// test-authoring mistake, so it is never retried.
class MockMissError : public Error {
public:
    using Error::Error;
};

/// The configured entity extractor backend is unreachable.
class ExtractorError : public Error {
public:
    using Error::Error;
};

/// Every enabled evidence source failed for a case.
class PipelineError : public Error {
public:
    using Error::Error;
};

} // namespace polydx

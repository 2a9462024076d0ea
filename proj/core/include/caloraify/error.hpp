#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace caloraify {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (CSV rows, snapshots, catalogs, configs).
class InputError : public Error {
public:
    using Error::Error;
};

/// Knowledge-base ingestion failure. `line` is 1-based and 0 when the error is not tied to a row.
class IngestError : public InputError {
public:
    IngestError(const std::string& what, std::size_t line = 0)
        : InputError(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class ParseError : public InputError {
public:
    using InputError::InputError;
};

/// A precondition on an argument was violated (k < 1, empty index, bad ratios, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A remote backend (VLM, embedder, rephraser) could not be reached or answered badly.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int attempts)
        : Error(what + " (after " + std::to_string(attempts) + " attempt" + (attempts == 1 ? "" : "s") + ")"),
          attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

}  // namespace caloraify

#pragma once
// Exception hierarchy shared by all akan modules.

#include <cstddef>
#include <stdexcept>
#include <string>

namespace akan {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Shapes or counts that do not match what an operation requires.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// A voltage (or other bounded quantity) outside its declared interval.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Bad argument values (non-positive step, empty input, length mismatch).
class ArgumentError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf met during evaluation or differentiation.
class NumericalError : public Error {
public:
    using Error::Error;
};

enum class ParseErrorKind {
    SchemaVersion,
    Truncated,
    NonFinite,
    Structural,
    Syntax,
    MissingColumn,
    NonNumeric,
    EmptyFile,
};

const char* to_string(ParseErrorKind kind);

/// Raised by every file reader. Carries 1-based line/column where known (0 = unknown).
class ParseError : public Error {
public:
    ParseError(ParseErrorKind kind, const std::string& what, std::size_t line = 0, std::size_t column = 0);

    ParseErrorKind kind() const noexcept { return kind_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    ParseErrorKind kind_;
    std::size_t line_;
    std::size_t column_;
};

class PruneError : public Error {
public:
    using Error::Error;
};

/// Transport failures talking to a measurement server.
class DevlinkError : public Error {
public:
    using Error::Error;
};

}  // namespace akan

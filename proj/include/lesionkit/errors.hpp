#pragma once

#include <stdexcept>
#include <string>

namespace lesionkit {

// Base class for every data-level failure the toolkit can raise.
// CLI maps these to exit code 2; anything else is a usage error (1).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class InvalidBoxError : public Error {
public:
    using Error::Error;
};

class DegenerateBoxError : public InvalidBoxError {
public:
    using InvalidBoxError::InvalidBoxError;
};

class InvalidMeasurementError : public Error {
public:
    using Error::Error;
};

class InvalidSpacingError : public Error {
public:
    using Error::Error;
};

// Carries the 1-based line number and, when known, the offending column.
// Line 0 means the location is not line-addressable (e.g. a JSON document).
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::string column, const std::string& msg)
        : Error(format(line, column, msg)), line_(line), column_(std::move(column)) {}

    explicit ParseError(const std::string& msg) : Error(msg), line_(0) {}

    std::size_t line() const { return line_; }
    const std::string& column() const { return column_; }

private:
    static std::string format(std::size_t line, const std::string& column, const std::string& msg) {
        std::string s = "line " + std::to_string(line);
        if (!column.empty()) s += ", column '" + column + "'";
        return s + ": " + msg;
    }

    std::size_t line_;
    std::string column_;
};

class DuplicateIdError : public Error {
public:
    using Error::Error;
};

class InsufficientPatientsError : public Error {
public:
    using Error::Error;
};

class InvalidWindowError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class EmptyClassError : public Error {
public:
    using Error::Error;
};

class EmptyGroupError : public Error {
public:
    using Error::Error;
};

class SampleSizeError : public Error {
public:
    using Error::Error;
};

class UnlabeledLesionError : public Error {
public:
    using Error::Error;
};

class KeyMismatchError : public Error {
public:
    using Error::Error;
};

class EmptyEvalError : public Error {
public:
    using Error::Error;
};

class MissingIndexError : public Error {
public:
    using Error::Error;
};

class SpecError : public Error {
public:
    using Error::Error;
};

// Binary/file-level problems: bad magic, truncated stream, unopenable path.
class FormatError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace lesionkit

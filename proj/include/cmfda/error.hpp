#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmfda {

enum class ErrorCode {
    DegenerateInput,
    OutOfRangeDay,
    OutOfRange,
    InvalidValue,
    InsufficientData,
    RankDeficient,
    MissingBandValue,
    WrongWindowLength,
    SingularCovariance,
    NoModels,
    EmptyHistory,
    UnknownKey,
    EmptySample,
    OutOfDomain,
    KeyMismatch,
    DegenerateClass,
    NoPositivePredictions,
    InitOffGrid,
    TooFewPositives,
    ShapeMismatch,
    InvalidConfig,
    ParseError,
    SchemaVersionMismatch,
    Io,
};

const char* to_string(ErrorCode code) noexcept;

/// Base exception for every failure raised by the library. The code lets
/// callers (the CLI in particular) map failures to exit statuses.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

/// Malformed input file. Line and column are 1-based; column 0 means the
/// whole line is at fault.
class ParseError : public Error {
public:
    ParseError(std::string file, std::size_t line, std::size_t column, const std::string& msg);

    const std::string& file() const noexcept { return file_; }
    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }

private:
    std::string file_;
    std::size_t line_;
    std::size_t column_;
};

}  // namespace cmfda

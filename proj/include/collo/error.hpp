#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace collo {

enum class ErrorCode {
    InvalidArgument,
    TooFewSamples,
    EmptySegment,
    InvalidParams,
    NoBeatsDetected,
    LengthMismatch,
    MissingCovariance,
    ShapeMismatch,
    EmptyViewList,
    StaleCache,
    EmptyDataset,
    DivergedLoss,
    CorruptCheckpoint,
    VersionMismatch,
    EmptyMapList,
    RecordMismatch,
    EmptyRatings,
    MissingGenre,
    InvalidBounds,
    EmptyInput,
    TooFewRecords,
    UnknownSubcommand,
    ConfigParseError,
    IoError,
};

std::string_view to_string(ErrorCode code);

/// Base exception for every failure raised by the library. Carries a code so
/// callers (and tests) can branch on the failure kind without string matching.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), message_(what) {}

    ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace collo

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace datasens {

enum class ErrorCode {
    // I/O
    FileNotFound,
    IoFailure,
    // input format / content
    EmptyDataset,
    MalformedRecord,
    UnknownLabel,
    DuplicateSentence,
    DimensionMismatch,
    DuplicateEmbedding,
    InvalidValue,
    MissingEmbedding,
    FingerprintMismatch,
    UnknownSentence,
    // arguments and degenerate configurations
    InvalidArgument,
    InvalidGroupSize,
    InvalidSchema,
    DegenerateSplit,
    TooManyFolds,
    DegenerateValidation,
    ShapeError,
    LabelRangeError,
    EmptyEvaluation,
};

enum class ErrorCategory { Io, Format, Argument };

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::DuplicateSentence: return "DuplicateSentence";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DuplicateEmbedding: return "DuplicateEmbedding";
    case ErrorCode::InvalidValue: return "InvalidValue";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorCode::UnknownSentence: return "UnknownSentence";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidGroupSize: return "InvalidGroupSize";
    case ErrorCode::InvalidSchema: return "InvalidSchema";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::TooManyFolds: return "TooManyFolds";
    case ErrorCode::DegenerateValidation: return "DegenerateValidation";
    case ErrorCode::ShapeError: return "ShapeError";
    case ErrorCode::LabelRangeError: return "LabelRangeError";
    case ErrorCode::EmptyEvaluation: return "EmptyEvaluation";
    }
    return "Unknown";
}

constexpr ErrorCategory category_of(ErrorCode code) {
    switch (code) {
    case ErrorCode::FileNotFound:
    case ErrorCode::IoFailure:
        return ErrorCategory::Io;
    case ErrorCode::EmptyDataset:
    case ErrorCode::MalformedRecord:
    case ErrorCode::UnknownLabel:
    case ErrorCode::DuplicateSentence:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::DuplicateEmbedding:
    case ErrorCode::InvalidValue:
    case ErrorCode::MissingEmbedding:
    case ErrorCode::FingerprintMismatch:
        return ErrorCategory::Format;
    default:
        return ErrorCategory::Argument;
    }
}

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }
    ErrorCategory category() const noexcept { return category_of(code_); }

private:
    ErrorCode code_;
};

/// MalformedRecord carrying the 1-based line number of the offending record.
class MalformedRecordError : public Error {
public:
    MalformedRecordError(std::size_t line, const std::string& what)
        : Error(ErrorCode::MalformedRecord, "line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

} // namespace datasens

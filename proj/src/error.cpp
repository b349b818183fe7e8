#include "collo/error.hpp"

namespace collo {

std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::TooFewSamples: return "TooFewSamples";
        case ErrorCode::EmptySegment: return "EmptySegment";
        case ErrorCode::InvalidParams: return "InvalidParams";
        case ErrorCode::NoBeatsDetected: return "NoBeatsDetected";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::MissingCovariance: return "MissingCovariance";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::EmptyViewList: return "EmptyViewList";
        case ErrorCode::StaleCache: return "StaleCache";
        case ErrorCode::EmptyDataset: return "EmptyDataset";
        case ErrorCode::DivergedLoss: return "DivergedLoss";
        case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::EmptyMapList: return "EmptyMapList";
        case ErrorCode::RecordMismatch: return "RecordMismatch";
        case ErrorCode::EmptyRatings: return "EmptyRatings";
        case ErrorCode::MissingGenre: return "MissingGenre";
        case ErrorCode::InvalidBounds: return "InvalidBounds";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::TooFewRecords: return "TooFewRecords";
        case ErrorCode::UnknownSubcommand: return "UnknownSubcommand";
        case ErrorCode::ConfigParseError: return "ConfigParseError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace collo

#include "distsynth/error.hpp"

namespace distsynth {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSchema: return "InvalidSchema";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::DegenerateTruncation: return "DegenerateTruncation";
    case ErrorCode::UnknownCategory: return "UnknownCategory";
    case ErrorCode::ZeroStd: return "ZeroStd";
    case ErrorCode::NotContinuous: return "NotContinuous";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::DegenerateBins: return "DegenerateBins";
    case ErrorCode::MissingBinSpec: return "MissingBinSpec";
    case ErrorCode::InvalidComponent: return "InvalidComponent";
    case ErrorCode::UnitMismatch: return "UnitMismatch";
    case ErrorCode::MissingSummary: return "MissingSummary";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::LabelMismatch: return "LabelMismatch";
    case ErrorCode::LlmUnavailable: return "LlmUnavailable";
    case ErrorCode::MalformedReply: return "MalformedReply";
    case ErrorCode::TooFewVariables: return "TooFewVariables";
    case ErrorCode::InfeasibleProposal: return "InfeasibleProposal";
    case ErrorCode::PromptTooLarge: return "PromptTooLarge";
    case ErrorCode::InvalidContext: return "InvalidContext";
    case ErrorCode::ProposerFailure: return "ProposerFailure";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

}  // namespace distsynth

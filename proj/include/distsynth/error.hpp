#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace distsynth {

enum class ErrorCode {
  // schema / dataset
  InvalidSchema,
  MissingColumn,
  TypeMismatch,
  OutOfBounds,
  EmptyFile,
  IoFailure,
  SchemaMismatch,
  // reference generator
  InvalidParams,
  DegenerateTruncation,
  UnknownCategory,
  ZeroStd,
  // summarizer
  NotContinuous,
  EmptyDataset,
  DegenerateBins,
  MissingBinSpec,
  InvalidComponent,
  // discrepancy / metrics
  UnitMismatch,
  MissingSummary,
  EmptyInput,
  LabelMismatch,
  // proposer
  LlmUnavailable,
  MalformedReply,
  TooFewVariables,
  InfeasibleProposal,
  PromptTooLarge,
  InvalidContext,
  // loop
  ProposerFailure,
  CorruptCheckpoint,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Error tied to a cell in a tabular file; row is 1-based over data lines.
class LocatedError : public Error {
 public:
  LocatedError(ErrorCode code, std::size_t row, std::string column,
               const std::string& message)
      : Error(code, "row " + std::to_string(row) + ", column '" + column +
                        "': " + message),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

}  // namespace distsynth

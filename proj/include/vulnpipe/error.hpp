#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vulnpipe {

enum class ErrorCode {
  EmptyCode,
  MalformedCwe,
  MalformedCve,
  FileUnreadable,
  UnsupportedFormat,
  SchemaMismatch,
  RowError,
  NvdUnavailable,
  NotFound,
  UnknownDataset,
  EmptyCorpus,
  UnknownBackend,
  BudgetExceeded,
  BackendFailure,
  UnscriptedRequest,
  TransientFailure,
  ParseFailure,
  PreconditionViolation,
  UniquenessExhausted,
  RemediationIdentical,
  SameBackend,
  InsufficientSamples,
  BadRatios,
  EmptyDistribution,
  UnknownReviewer,
  NotAssigned,
  DuplicateVerdict,
  NoVerdicts,
  ConfigInvalid,
  InvariantViolation,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Base error for every pipeline stage. The code is stable and machine readable;
/// the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace vulnpipe

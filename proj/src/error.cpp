#include "vulnpipe/error.hpp"

namespace vulnpipe {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyCode: return "EmptyCode";
    case ErrorCode::MalformedCwe: return "MalformedCwe";
    case ErrorCode::MalformedCve: return "MalformedCve";
    case ErrorCode::FileUnreadable: return "FileUnreadable";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::RowError: return "RowError";
    case ErrorCode::NvdUnavailable: return "NvdUnavailable";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::UnknownDataset: return "UnknownDataset";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::UnknownBackend: return "UnknownBackend";
    case ErrorCode::BudgetExceeded: return "BudgetExceeded";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::UnscriptedRequest: return "UnscriptedRequest";
    case ErrorCode::TransientFailure: return "TransientFailure";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::UniquenessExhausted: return "UniquenessExhausted";
    case ErrorCode::RemediationIdentical: return "RemediationIdentical";
    case ErrorCode::SameBackend: return "SameBackend";
    case ErrorCode::InsufficientSamples: return "InsufficientSamples";
    case ErrorCode::BadRatios: return "BadRatios";
    case ErrorCode::EmptyDistribution: return "EmptyDistribution";
    case ErrorCode::UnknownReviewer: return "UnknownReviewer";
    case ErrorCode::NotAssigned: return "NotAssigned";
    case ErrorCode::DuplicateVerdict: return "DuplicateVerdict";
    case ErrorCode::NoVerdicts: return "NoVerdicts";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

}  // namespace vulnpipe

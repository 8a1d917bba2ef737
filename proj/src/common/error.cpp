#include "common/error.hpp"

namespace volprop {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MalformedHeader: return "MalformedHeader";
    case ErrorCode::UnsupportedDatatype: return "UnsupportedDatatype";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::EmptyRoi: return "EmptyRoi";
    case ErrorCode::TileTooSmall: return "TileTooSmall";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::ExtentTooSmall: return "ExtentTooSmall";
    case ErrorCode::SlotOverflow: return "SlotOverflow";
    case ErrorCode::EmptyPrompts: return "EmptyPrompts";
    case ErrorCode::BackendFailure: return "BackendFailure";
    case ErrorCode::MissingGraph: return "MissingGraph";
    case ErrorCode::SignatureMismatch: return "SignatureMismatch";
    case ErrorCode::RuntimeUnavailable: return "RuntimeUnavailable";
    case ErrorCode::BothEmpty: return "BothEmpty";
    case ErrorCode::EitherEmpty: return "EitherEmpty";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::InsufficientCandidates: return "InsufficientCandidates";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::ManifestMissing: return "ManifestMissing";
    case ErrorCode::GridInvalid: return "GridInvalid";
    case ErrorCode::NoResults: return "NoResults";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string message, std::string subject)
    : std::runtime_error(std::string(to_string(code)) + ": " + message),
      code_(code),
      subject_(std::move(subject)) {}

void fail(ErrorCode code, std::string message, std::string subject) {
  throw Error(code, std::move(message), std::move(subject));
}

}  // namespace volprop

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace volprop {

enum class ErrorCode {
  InvalidArgument = 1,
  IoFailure,
  MalformedHeader,
  UnsupportedDatatype,
  DimensionMismatch,
  EmptyRoi,
  TileTooSmall,
  EmptyMask,
  ExtentTooSmall,
  SlotOverflow,
  EmptyPrompts,
  BackendFailure,
  MissingGraph,
  SignatureMismatch,
  RuntimeUnavailable,
  BothEmpty,
  EitherEmpty,
  ZeroVector,
  InsufficientCandidates,
  ConfigInvalid,
  ManifestMissing,
  GridInvalid,
  NoResults,
};

std::string_view to_string(ErrorCode code) noexcept;

// `subject` names the thing at fault (a config key, a tensor, a class) so
// callers can branch on it without parsing the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message, std::string subject = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& subject() const noexcept { return subject_; }

 private:
  ErrorCode code_;
  std::string subject_;
};

[[noreturn]] void fail(ErrorCode code, std::string message, std::string subject = {});

}  // namespace volprop

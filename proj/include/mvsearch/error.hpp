#ifndef MVSEARCH_ERROR_HPP
#define MVSEARCH_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace mvs {

enum class ErrorCode {
  InvalidArgument,
  ImageTooSmall,
  PatchOutOfBounds,
  IoError,
  BadMagic,
  BadVersion,
  VersionMismatch,
  TruncatedPayload,
  CorruptPayload,
  TooFewDescriptors,
  MixedChannels,
  ChannelMismatch,
  LengthMismatch,
  EmptyInput,
  InconsistentUniverse,
  DuplicateObjectId,
  SpecInvalid,
  EmptyStore,
  ListTooShort,
  NoIndex,
  BadSpec,
  UnknownSession,
  UnknownObject,
  SessionFinalized,
  MalformedPayload,
  EmptySession,
};

/// Kebab-case name used in CLI messages and wire error bodies.
constexpr std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::ImageTooSmall: return "image-too-small";
    case ErrorCode::PatchOutOfBounds: return "patch-out-of-bounds";
    case ErrorCode::IoError: return "io-error";
    case ErrorCode::BadMagic: return "bad-magic";
    case ErrorCode::BadVersion: return "bad-version";
    case ErrorCode::VersionMismatch: return "version-mismatch";
    case ErrorCode::TruncatedPayload: return "truncated-payload";
    case ErrorCode::CorruptPayload: return "corrupt-payload";
    case ErrorCode::TooFewDescriptors: return "too-few-descriptors";
    case ErrorCode::MixedChannels: return "mixed-channels";
    case ErrorCode::ChannelMismatch: return "channel-mismatch";
    case ErrorCode::LengthMismatch: return "length-mismatch";
    case ErrorCode::EmptyInput: return "empty-input";
    case ErrorCode::InconsistentUniverse: return "inconsistent-universe";
    case ErrorCode::DuplicateObjectId: return "duplicate-object-id";
    case ErrorCode::SpecInvalid: return "spec-invalid";
    case ErrorCode::EmptyStore: return "empty-store";
    case ErrorCode::ListTooShort: return "list-too-short";
    case ErrorCode::NoIndex: return "no-index";
    case ErrorCode::BadSpec: return "bad-spec";
    case ErrorCode::UnknownSession: return "unknown-session";
    case ErrorCode::UnknownObject: return "unknown-object";
    case ErrorCode::SessionFinalized: return "session-finalized";
    case ErrorCode::MalformedPayload: return "malformed-payload";
    case ErrorCode::EmptySession: return "empty-session";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mvs

#endif  // MVSEARCH_ERROR_HPP

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eobkit {

// Every failure the toolkit reports carries one of these classes. The CLI
// prints the class name as the first token of its single-line error.
enum class ErrorKind {
  ParseError,
  InvariantViolation,
  EmptySetError,
  IOError,
  AnswerCollision,
  DuplicateNegative,
  ZeroVector,
  EmptyFrames,
  DimMismatch,
  NotNormalized,
  BadMagic,
  TruncatedFile,
  NonFinite,
  TooFewCandidates,
  TooFewPoints,
  EndpointError,
  EmptyResponse,
  InsufficientCandidates,
  NoOptionsFound,
  MediaError,
  MissingPredictions,
  DomainError,
  UnknownSample,
  EmptyReport,
  MissingEmbedding,
  MissingArtifact,
  ConfigError,
  UsageError,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }
  std::string_view kind_name() const noexcept { return to_string(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace eobkit

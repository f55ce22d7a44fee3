#include "eobkit/error.hpp"

namespace eobkit {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::InvariantViolation: return "InvariantViolation";
    case ErrorKind::EmptySetError: return "EmptySetError";
    case ErrorKind::IOError: return "IOError";
    case ErrorKind::AnswerCollision: return "AnswerCollision";
    case ErrorKind::DuplicateNegative: return "DuplicateNegative";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::EmptyFrames: return "EmptyFrames";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::TooFewCandidates: return "TooFewCandidates";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::EndpointError: return "EndpointError";
    case ErrorKind::EmptyResponse: return "EmptyResponse";
    case ErrorKind::InsufficientCandidates: return "InsufficientCandidates";
    case ErrorKind::NoOptionsFound: return "NoOptionsFound";
    case ErrorKind::MediaError: return "MediaError";
    case ErrorKind::MissingPredictions: return "MissingPredictions";
    case ErrorKind::DomainError: return "DomainError";
    case ErrorKind::UnknownSample: return "UnknownSample";
    case ErrorKind::EmptyReport: return "EmptyReport";
    case ErrorKind::MissingEmbedding: return "MissingEmbedding";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::UsageError: return "UsageError";
  }
  return "Error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace eobkit

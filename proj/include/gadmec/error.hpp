#pragma once

#include <stdexcept>
#include <string>

namespace gadmec {

/// Error codes carried by every gadmec::Error. Tests match on the code,
/// messages are for humans.
enum class ErrorCode {
    DimensionMismatch,
    ZeroVector,
    NonFiniteEmbedding,
    DuplicateId,
    MalformedManifest,
    UnknownId,
    EmptyStore,
    EmptyPool,
    EmptyPlan,
    ComponentUndefined,
    ConfigurationError,
    SameMethod,
    ParseError,
    TransportError,
    EmptyOutcomes,
    TooFewClusters,
    DegenerateVariance,
    DegenerateAgreement,
    FixedBudgetViolation,
    ValidationError,
    IoError,
};

inline const char* error_code_name(ErrorCode c) {
    switch (c) {
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::NonFiniteEmbedding: return "NonFiniteEmbedding";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::MalformedManifest: return "MalformedManifest";
        case ErrorCode::UnknownId: return "UnknownId";
        case ErrorCode::EmptyStore: return "EmptyStore";
        case ErrorCode::EmptyPool: return "EmptyPool";
        case ErrorCode::EmptyPlan: return "EmptyPlan";
        case ErrorCode::ComponentUndefined: return "ComponentUndefined";
        case ErrorCode::ConfigurationError: return "ConfigurationError";
        case ErrorCode::SameMethod: return "SameMethod";
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::TransportError: return "TransportError";
        case ErrorCode::EmptyOutcomes: return "EmptyOutcomes";
        case ErrorCode::TooFewClusters: return "TooFewClusters";
        case ErrorCode::DegenerateVariance: return "DegenerateVariance";
        case ErrorCode::DegenerateAgreement: return "DegenerateAgreement";
        case ErrorCode::FixedBudgetViolation: return "FixedBudgetViolation";
        case ErrorCode::ValidationError: return "ValidationError";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace gadmec

#include "fpb/error.hpp"

namespace fpb {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonSymmetric: return "NonSymmetric";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::ZeroNormal: return "ZeroNormal";
    case ErrorCode::DegenerateNormalDirection: return "DegenerateNormalDirection";
    case ErrorCode::EigenFailure: return "EigenFailure";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DriftTooLarge: return "DriftTooLarge";
    case ErrorCode::AbsorptionTooLarge: return "AbsorptionTooLarge";
    case ErrorCode::TruncationBreach: return "TruncationBreach";
    case ErrorCode::EmptyEnsemble: return "EmptyEnsemble";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::RootNotFound: return "RootNotFound";
    case ErrorCode::ConvergenceStrip: return "ConvergenceStrip";
    case ErrorCode::OutOfAsymptoticRange: return "OutOfAsymptoticRange";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::UnstableStep: return "UnstableStep";
    case ErrorCode::NegativeDensity: return "NegativeDensity";
    case ErrorCode::InsufficientResolution: return "InsufficientResolution";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace fpb

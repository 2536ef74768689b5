#include "qfedtd/error.hpp"

namespace qfedtd {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::BadDims: return "BadDims";
    case ErrorKind::NonStochasticRow: return "NonStochasticRow";
    case ErrorKind::NegativeProbability: return "NegativeProbability";
    case ErrorKind::GammaOutOfRange: return "GammaOutOfRange";
    case ErrorKind::InvalidFeatures: return "InvalidFeatures";
    case ErrorKind::ReducibleChain: return "ReducibleChain";
    case ErrorKind::PeriodicChain: return "PeriodicChain";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::Divergence: return "Divergence";
    case ErrorKind::MixingNotReached: return "MixingNotReached";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::HorizonTooShort: return "HorizonTooShort";
    case ErrorKind::InsufficientPoints: return "InsufficientPoints";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace qfedtd

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace qfedtd {

enum class ErrorKind {
  // Model validation.
  BadDims,
  NonStochasticRow,
  NegativeProbability,
  GammaOutOfRange,
  InvalidFeatures,
  ReducibleChain,
  PeriodicChain,
  SingularSystem,
  NotSymmetric,
  // Simulation.
  DimMismatch,
  Divergence,
  MixingNotReached,
  NonFiniteInput,
  // Verification.
  HorizonTooShort,
  InsufficientPoints,
  // Plumbing.
  InvalidArgument,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Every failure raised by the library carries an ErrorKind so callers (and
/// tests) can branch on the category without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace qfedtd

#pragma once

#include <stdexcept>
#include <string>

namespace meshforge {

enum class ErrorKind {
  // numerical
  DenominatorNearZero,
  OutsideValidity,
  UtmConversionFailure,
  InverseDivergence,
  FitResidualTooLarge,
  NoValidPairs,
  InsufficientOverlap,
  EmptyEvaluation,
  EmptyDem,
  InvalidModel,
  InvalidArgument,
  // environment
  Io,
  Config,
};

/// Coarse grouping used by the command line tool to pick an exit status.
enum class ErrorClass { Config, Io, Numerical };

const char* to_string(ErrorKind kind);
ErrorClass classify(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace meshforge

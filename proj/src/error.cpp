#include "meshforge/error.hpp"

namespace meshforge {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DenominatorNearZero: return "DenominatorNearZero";
    case ErrorKind::OutsideValidity: return "OutsideValidity";
    case ErrorKind::UtmConversionFailure: return "UtmConversionFailure";
    case ErrorKind::InverseDivergence: return "InverseDivergence";
    case ErrorKind::FitResidualTooLarge: return "FitResidualTooLarge";
    case ErrorKind::NoValidPairs: return "NoValidPairs";
    case ErrorKind::InsufficientOverlap: return "InsufficientOverlap";
    case ErrorKind::EmptyEvaluation: return "EmptyEvaluation";
    case ErrorKind::EmptyDem: return "EmptyDem";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Config: return "ConfigError";
  }
  return "Error";
}

ErrorClass classify(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return ErrorClass::Io;
    case ErrorKind::Config: return ErrorClass::Config;
    default: return ErrorClass::Numerical;
  }
}

}  // namespace meshforge

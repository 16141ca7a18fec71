#include "toricbar/error.hpp"

namespace toricbar {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter: return "invalid-parameter";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::InvalidComplex: return "invalid-complex";
    case ErrorKind::DomainError: return "domain-error";
    case ErrorKind::Unsupported: return "unsupported-operation";
    case ErrorKind::SpectralValue: return "spectral-value";
    case ErrorKind::ExtensionUnavailable: return "extension-unavailable";
    case ErrorKind::MarginError: return "margin-error";
    case ErrorKind::SmoothingFailure: return "smoothing-failure";
    case ErrorKind::InconsistentSurface: return "inconsistent-surface";
    case ErrorKind::NoRegularPerturbation: return "no-regular-perturbation-found";
    case ErrorKind::PreconditionViolated: return "precondition-violated";
    case ErrorKind::NonDelzant: return "non-delzant";
    case ErrorKind::ParseError: return "parse-error";
  }
  return "unknown";
}

bool is_input_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidParameter:
    case ErrorKind::InsufficientData:
    case ErrorKind::InvalidComplex:
    case ErrorKind::DomainError:
    case ErrorKind::Unsupported:
    case ErrorKind::SpectralValue:
    case ErrorKind::ExtensionUnavailable:
    case ErrorKind::PreconditionViolated:
    case ErrorKind::NonDelzant:
    case ErrorKind::ParseError:
      return true;
    default:
      return false;
  }
}

}  // namespace toricbar

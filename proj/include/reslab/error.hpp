#pragma once

/// \file error.hpp
/// \brief Exception type shared by every module.

#include <stdexcept>
#include <string>

namespace reslab {

enum class ErrorCode {
  InvalidArgument,
  GridMismatch,
  DomainExceeded,
  ResonantLambda,
  NotConverged,
  StepRejected,
  MissingData,
  ConfigError,
  IoError,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid argument";
    case ErrorCode::GridMismatch: return "grid mismatch";
    case ErrorCode::DomainExceeded: return "domain exceeded";
    case ErrorCode::ResonantLambda: return "resonant lambda";
    case ErrorCode::NotConverged: return "not converged";
    case ErrorCode::StepRejected: return "step rejected";
    case ErrorCode::MissingData: return "missing data";
    case ErrorCode::ConfigError: return "config error";
    case ErrorCode::IoError: return "i/o error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

  /// Errors caused by malformed input rather than numerics.
  bool is_input_error() const noexcept {
    return code_ == ErrorCode::InvalidArgument || code_ == ErrorCode::ConfigError ||
           code_ == ErrorCode::GridMismatch || code_ == ErrorCode::DomainExceeded ||
           code_ == ErrorCode::MissingData || code_ == ErrorCode::IoError;
  }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace reslab

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace unitflow {

enum class ErrorKind {
  InvalidInput,
  EmptyAfterTrim,
  DegenerateData,
  LengthOverflow,
  DivergenceError,
  IncompatibleCheckpoint,
  NumericalError,
  IoError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::EmptyAfterTrim: return "EmptyAfterTrim";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::LengthOverflow: return "LengthOverflow";
    case ErrorKind::DivergenceError: return "DivergenceError";
    case ErrorKind::IncompatibleCheckpoint: return "IncompatibleCheckpoint";
    case ErrorKind::NumericalError: return "NumericalError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace unitflow

#pragma once

#include <stdexcept>
#include <string>

namespace fibra {

enum class ErrorKind {
  NearZeroVector,
  InvalidParameter,
  MalformedInput,
  GridMismatch,
  EmptyWindow,
  TooFewPoints,
  TooFewWindows,
  NoValidWindows,
  Io,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NearZeroVector: return "NearZeroVector";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::MalformedInput: return "MalformedInput";
    case ErrorKind::GridMismatch: return "GridMismatch";
    case ErrorKind::EmptyWindow: return "EmptyWindow";
    case ErrorKind::TooFewPoints: return "TooFewPoints";
    case ErrorKind::TooFewWindows: return "TooFewWindows";
    case ErrorKind::NoValidWindows: return "NoValidWindows";
    case ErrorKind::Io: return "Io";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Validation errors are caused by the caller's inputs; the CLI maps them to exit status 2.
  bool is_validation() const noexcept {
    return kind_ != ErrorKind::Io && kind_ != ErrorKind::NoValidWindows;
  }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorKind::InvalidParameter, what);
}

}  // namespace fibra

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace irlvla {

enum class ErrorCode {
  ExpertInfeasible,
  HorizonMismatch,
  TooFewDemos,
  ShapeMismatch,
  TapeReused,
  EmptyDataset,
  DivergenceDetected,
  MissingDataset,
  MissingCheckpoint,
  ConfigInvalid,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Every recoverable failure in the library is reported through this type so
// the CLI can translate it into a machine-readable error line.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace irlvla

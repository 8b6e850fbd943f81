#pragma once

#include <stdexcept>
#include <string>

namespace sieveate {

enum class ErrorCode {
  InvalidArgument,
  DegenerateDesign,
  RankDeficient,
  DegeneratePropensity,
  EmptySample,
  SelectionFailure,
  BootstrapInstability,
  Schema,
  Validation,
  InsufficientData,
  Io,
};

const char* to_string(ErrorCode code);

/// Single exception type for the library; `code()` tells callers which contract failed.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::InvalidArgument, what);
}

}  // namespace sieveate

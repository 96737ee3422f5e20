#pragma once

#include <stdexcept>
#include <string>

namespace pcm {

enum class ErrorCode {
  InvalidParams,
  ZeroInverse,
  EmptyRoots,
  WrongKey,
  SlotOverflow,
  BackendMismatch,
  MissingRotationKeys,
  DepthUnavailable,
  EmptySet,
  InsufficientPowers,
  Oversize,
  OutOfDomain,
  LengthMismatch,
  WeightLengthMismatch,
  InvalidThreshold,
  CapacityExceeded,
  MalformedFrame,
  UnsupportedVersion,
  ParseError,
  WidthMismatch,
  ProtocolFailure,
  ConfigError,
  IoError,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace pcm

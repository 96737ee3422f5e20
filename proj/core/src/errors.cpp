#include "pcm/errors.hpp"

namespace pcm {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::ZeroInverse: return "ZeroInverse";
    case ErrorCode::EmptyRoots: return "EmptyRoots";
    case ErrorCode::WrongKey: return "WrongKey";
    case ErrorCode::SlotOverflow: return "SlotOverflow";
    case ErrorCode::BackendMismatch: return "BackendMismatch";
    case ErrorCode::MissingRotationKeys: return "MissingRotationKeys";
    case ErrorCode::DepthUnavailable: return "DepthUnavailable";
    case ErrorCode::EmptySet: return "EmptySet";
    case ErrorCode::InsufficientPowers: return "InsufficientPowers";
    case ErrorCode::Oversize: return "Oversize";
    case ErrorCode::OutOfDomain: return "OutOfDomain";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::WeightLengthMismatch: return "WeightLengthMismatch";
    case ErrorCode::InvalidThreshold: return "InvalidThreshold";
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::MalformedFrame: return "MalformedFrame";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::WidthMismatch: return "WidthMismatch";
    case ErrorCode::ProtocolFailure: return "ProtocolFailure";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "UnknownError";
}

}  // namespace pcm

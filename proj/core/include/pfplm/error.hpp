#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pfplm {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An Error carrying a module-specific code so callers can branch without
/// string matching.
template <class Code>
class CodedError : public Error {
 public:
  CodedError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

enum class CodecErrc {
  kBadVersion,
  kBadRoutingType,
  kTruncated,
  kTruncatedExtensionHeader,
  kLengthMismatch,
  kInvalidSrh,
  kPayloadTooLarge,
  kBadHex,
  kEmptySidList,
  kTooManySids,
  kNotFinalSegment,
  kNoInnerPacket,
  kMalformedInner,
};
using CodecError = CodedError<CodecErrc>;

enum class MatcherErrc { kDuplicateFlow, kUnknownFlow, kInvalidSidList };
using MatcherError = CodedError<MatcherErrc>;

enum class DataplaneErrc { kTimeRegression, kBadPeriod, kDuplicatePolicy, kBadPrefix };
using DataplaneError = CodedError<DataplaneErrc>;

enum class LmErrc {
  kBlockStillActive,
  kGuardNotReached,
  kOutstandingQuery,
  kStaleResponse,
  kNegativeLoss,
  kUnknownFlow,
  kCounterDiscontinuity,
  kUnknownMessageType,
  kTruncated,
  kMalformed,
};
using ProtocolError = CodedError<LmErrc>;

enum class SimErrc { kInvalidScenario, kEventInPast, kAlreadyStarted };
using SimError = CodedError<SimErrc>;

enum class BenchErrc { kInvalidConfig, kTrialTooShort, kNoConvergence };
using BenchError = CodedError<BenchErrc>;

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File or socket failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace pfplm

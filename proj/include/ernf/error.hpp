#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ernf {

enum class ErrorCode {
  InvalidArgument,
  RefractoryExceedsInterval,
  GeometryMismatch,
  OutOfRange,
  InvalidParams,
  NonFiniteRadiance,
  ChannelMismatch,
  DegenerateRay,
  EmptyInterval,
  EmptyBatch,
  NoIntervals,
  DivergedLoss,
  RankDeficient,
  ShapeMismatch,
  TooSmall,
  InvalidCovariance,
  BadMagic,
  CorruptFile,
  Io,
  Config,
};

std::string_view to_string(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so the
// CLI can map it to an exit status without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

}  // namespace ernf

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace neckscope {

enum class Errc {
  InvalidSpec,
  OutOfDomain,
  NoConvergence,
  ExitedDomain,
  RequiresPole,
  InvalidRange,
  InvalidWindow,
  InvalidInput,
  PreconditionNeck,
  NotSmooth,
  HypothesisFail,
  OddDimensionOnly,
  RequiresNoncompact,
  Undefined,
  NotApplicable,
  NotClassified,
  RequiresPositiveScalar,
  SingularityReached,
  StepTooLarge,
  InvalidProfile,
  NotStored,
  BelowFloor,
  Overflow,
};

std::string_view errc_name(Errc c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what);
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] void fail(Errc code, const std::string& what);

}  // namespace neckscope

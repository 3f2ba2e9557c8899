#include "neckscope/error.hpp"

namespace neckscope {

std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::OutOfDomain: return "OutOfDomain";
    case Errc::NoConvergence: return "NoConvergence";
    case Errc::ExitedDomain: return "ExitedDomain";
    case Errc::RequiresPole: return "RequiresPole";
    case Errc::InvalidRange: return "InvalidRange";
    case Errc::InvalidWindow: return "InvalidWindow";
    case Errc::InvalidInput: return "InvalidInput";
    case Errc::PreconditionNeck: return "PreconditionNeck";
    case Errc::NotSmooth: return "NotSmooth";
    case Errc::HypothesisFail: return "HypothesisFail";
    case Errc::OddDimensionOnly: return "OddDimensionOnly";
    case Errc::RequiresNoncompact: return "RequiresNoncompact";
    case Errc::Undefined: return "Undefined";
    case Errc::NotApplicable: return "NotApplicable";
    case Errc::NotClassified: return "NotClassified";
    case Errc::RequiresPositiveScalar: return "RequiresPositiveScalar";
    case Errc::SingularityReached: return "SingularityReached";
    case Errc::StepTooLarge: return "StepTooLarge";
    case Errc::InvalidProfile: return "InvalidProfile";
    case Errc::NotStored: return "NotStored";
    case Errc::BelowFloor: return "BelowFloor";
    case Errc::Overflow: return "Overflow";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

void fail(Errc code, const std::string& what) { throw Error(code, what); }

}  // namespace neckscope

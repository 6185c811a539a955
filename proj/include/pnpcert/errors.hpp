#pragma once

#include <stdexcept>
#include <string>

namespace pnpcert {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionMismatch : Error {
  using Error::Error;
};
struct SingularResolvent : Error {
  using Error::Error;
};
struct UnstableSystem : Error {
  using Error::Error;
};
struct DegeneratePencil : Error {
  using Error::Error;
};
struct NoConvergence : Error {
  using Error::Error;
};
struct LinearizationFailure : Error {
  using Error::Error;
};
struct InvalidOrder : Error {
  using Error::Error;
};
struct NonHurwitzA : Error {
  using Error::Error;
};
struct SingularMultiplier : Error {
  using Error::Error;
};
struct IllPosedFeedthrough : Error {
  using Error::Error;
};
struct MinimumPhaseViolation : Error {
  using Error::Error;
};
struct SingularPencil : Error {
  using Error::Error;
};
struct MissingDeviceModel : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct ValidationError : Error {
  using Error::Error;
};

}  // namespace pnpcert

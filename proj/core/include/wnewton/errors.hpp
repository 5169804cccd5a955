#pragma once

#include <stdexcept>
#include <string>

namespace wnewton {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidConfig : Error {
  using Error::Error;
};

struct InvalidInput : Error {
  using Error::Error;
};

struct InvalidModel : Error {
  using Error::Error;
};

struct DegenerateBandwidth : Error {
  using Error::Error;
};

struct CapacityError : Error {
  using Error::Error;
};

struct StateError : Error {
  using Error::Error;
};

struct StepTooLarge : Error {
  using Error::Error;
};

struct InsufficientSupport : Error {
  using Error::Error;
};

}  // namespace wnewton

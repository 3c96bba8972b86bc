#pragma once

#include <stdexcept>
#include <string>

namespace misexp {

/// Root of every error raised by the library. `kind()` is a stable tag used
/// in machine-readable error records.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "Error"; }
};

#define MISEXP_DEFINE_ERROR(Name, Base)                             \
  class Name : public Base {                                        \
   public:                                                          \
    using Base::Base;                                               \
    const char* kind() const noexcept override { return #Name; }    \
  };

// Numerical failures.
MISEXP_DEFINE_ERROR(NumericalError, Error)
MISEXP_DEFINE_ERROR(SeparationError, NumericalError)
MISEXP_DEFINE_ERROR(RankError, NumericalError)
MISEXP_DEFINE_ERROR(ConvergenceError, NumericalError)
MISEXP_DEFINE_ERROR(SingularJacobianError, NumericalError)
MISEXP_DEFINE_ERROR(EmptyClassError, NumericalError)
MISEXP_DEFINE_ERROR(DegenerateArmError, NumericalError)
MISEXP_DEFINE_ERROR(InsufficientReplicatesError, NumericalError)
MISEXP_DEFINE_ERROR(DomainError, NumericalError)

// Input data problems.
MISEXP_DEFINE_ERROR(DataError, Error)
MISEXP_DEFINE_ERROR(ParseError, DataError)
MISEXP_DEFINE_ERROR(SchemaError, DataError)
MISEXP_DEFINE_ERROR(ValueError, DataError)

// Bad configuration or API misuse.
MISEXP_DEFINE_ERROR(ConfigError, Error)

#undef MISEXP_DEFINE_ERROR

}  // namespace misexp

#pragma once

#include <stdexcept>
#include <string>

namespace conesolve {

/// Base of every error raised by the library. `name()` is the stable
/// identifier written into CLI reports.
class Error : public std::runtime_error {
 public:
  Error(std::string name, const std::string& what)
      : std::runtime_error(name + ": " + what), name_(std::move(name)) {}
  const std::string& name() const noexcept { return name_; }

 private:
  std::string name_;
};

#define CONESOLVE_DEFINE_ERROR(Type)                                  \
  class Type : public Error {                                         \
   public:                                                            \
    explicit Type(const std::string& what) : Error(#Type, what) {}    \
  };

CONESOLVE_DEFINE_ERROR(DomainError)
CONESOLVE_DEFINE_ERROR(ScopeError)
CONESOLVE_DEFINE_ERROR(ShapeError)
CONESOLVE_DEFINE_ERROR(MeshError)
CONESOLVE_DEFINE_ERROR(GeometryError)
CONESOLVE_DEFINE_ERROR(BackgroundError)
CONESOLVE_DEFINE_ERROR(NormalizationError)
CONESOLVE_DEFINE_ERROR(NonPositiveTarget)
CONESOLVE_DEFINE_ERROR(SingularLinearization)
CONESOLVE_DEFINE_ERROR(NewtonDivergence)
CONESOLVE_DEFINE_ERROR(ContinuationStall)
CONESOLVE_DEFINE_ERROR(SpectralError)
CONESOLVE_DEFINE_ERROR(ClosureViolation)
CONESOLVE_DEFINE_ERROR(ConfigError)

#undef CONESOLVE_DEFINE_ERROR

}  // namespace conesolve

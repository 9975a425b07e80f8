#ifndef KACSPHERE_CORE_ERROR_HPP
#define KACSPHERE_CORE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace kacsphere {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid dimensions, sample counts, exponents or other inputs.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Array shape does not match the declared (d, N).
class ShapeError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

/// Projection onto the sphere is undefined (input lies on the momentum line).
class DegenerateProjectionError : public Error {
 public:
  using Error::Error;
};

/// Query point outside the support of a law or of a sphere.
class SupportError : public Error {
 public:
  using Error::Error;
};

/// A numerical grid or window does not contain the requested mass or point.
class CoverageError : public Error {
 public:
  using Error::Error;
};

/// Problem size exceeds what the chosen algorithm is allowed to handle.
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// The energy variance of a density vanishes.
class DegenerateVarianceError : public Error {
 public:
  using Error::Error;
};

/// Malformed configuration or command line.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace kacsphere

#endif

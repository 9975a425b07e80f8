#ifndef KACSPHERE_CORE_SPECIAL_HPP
#define KACSPHERE_CORE_SPECIAL_HPP

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "error.hpp"

namespace kacsphere {

/// log of the surface area of the unit sphere S^{n-1} in R^n.
inline double log_unit_sphere_area(double n) {
  if (!(n > 0.0)) throw ParameterError("sphere area requires ambient dimension n > 0");
  return std::log(2.0) + 0.5 * n * std::log(std::numbers::pi) - boost::math::lgamma(0.5 * n);
}

/// log of the volume of the unit ball in R^n.
inline double log_unit_ball_volume(double n) {
  if (!(n > 0.0)) throw ParameterError("ball volume requires n > 0");
  return 0.5 * n * std::log(std::numbers::pi) - boost::math::lgamma(0.5 * n + 1.0);
}

inline double log_gamma(double x) { return boost::math::lgamma(x); }

inline constexpr double neg_infinity = -std::numeric_limits<double>::infinity();

}  // namespace kacsphere

#endif

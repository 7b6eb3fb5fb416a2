#pragma once

#include <Eigen/Dense>

#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace ahx {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid input: bad parameters, malformed documents, out-of-range points.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The metric family failed validation (not symmetric, not positive definite,
/// derivatives inconsistent with the metric).
class InvalidFamily : public Error {
 public:
  using Error::Error;
};

/// Hyperbolic arclength budget exhausted before the orbit reached the boundary.
class TrappedOrSlow : public Error {
 public:
  using Error::Error;
};

/// The orbit left the coordinate domain (affine chart bounds or rho > rho_max).
class ChartExit : public Error {
 public:
  using Error::Error;
};

/// An iterative solve (Newton, Levenberg-Marquardt, root bracketing) failed.
class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  double r = std::remainder(a, 2.0 * kPi);
  if (r <= -kPi) r += 2.0 * kPi;
  return r;
}

/// Reduces an angle to [0, 2pi).
inline double reduce_angle(double a) {
  double r = std::fmod(a, 2.0 * kPi);
  if (r < 0) r += 2.0 * kPi;
  return r;
}

}  // namespace ahx

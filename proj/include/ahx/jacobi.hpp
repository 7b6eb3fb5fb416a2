#pragma once

// Jacobi fields along a geodesic, conjugate points, and the stable and
// unstable bundles of the hyperbolic geodesic flow.
//
// Everything is parametrized by hyperbolic arclength t, with t = 0 at the
// reference phase point. The base geodesic is integrated once in t over
// [-t_range, t_range]. For n = 1 the Jacobi equation is the scalar
// y'' + K(gamma(t)) y = 0. In higher dimension the linearized flow of
// X = rho Xbar on the 2n + 2 phase coordinates is used instead.

#include "ahx/flow.hpp"
#include "ahx/metric.hpp"

#include <vector>

namespace ahx {

class JacobiSystem {
 public:
  /// Integrates the base geodesic through p (an interior phase point) over
  /// t in [-t_range, t_range].
  JacobiSystem(BoundaryMetricFamily family, const BPhasePoint& p, double t_range = 40.0,
               double tol = 1e-12);

  /// Geodesic through the point where the incoming geodesic of z reaches its
  /// largest rho.
  static JacobiSystem from_boundary(const BoundaryMetricFamily& family, const BoundaryCovector& z,
                                    double t_range = 40.0, double tol = 1e-12);

  const BoundaryMetricFamily& family() const { return family_; }
  int dim() const { return family_.dim(); }
  double t_min() const { return t_min_; }
  double t_max() const { return t_max_; }

  /// Phase point gamma(t).
  BPhasePoint base(double t) const;
  /// Coordinate velocity (d rho/dt, dy/dt) of the base geodesic.
  Vec velocity(double t) const;
  /// R(t): the Gauss curvature along the geodesic (n = 1 only).
  double curvature(double t) const;

  /// Throws InvalidArgument unless [a, b] lies inside the traced range.
  void require_range(double a, double b) const;

 private:
  Vec state(double t) const;

  BoundaryMetricFamily family_;
  double t_min_ = 0.0, t_max_ = 0.0;
  std::vector<DenseSegment<double>> forward_, backward_;
};

/// Dense solution of the scalar Jacobi equation.
struct JacobiSolution {
  std::vector<DenseSegment<double>> segments;  // ordered in the direction of integration
  double t0 = 0.0, t1 = 0.0;

  /// (y, ydot) at t between t0 and t1.
  Eigen::Vector2d at(double t) const;
  /// Knot times, including both ends.
  std::vector<double> knots() const;
};

/// Solves y'' + R(t) y = 0 (n = 1) from (y0, ydot0) at t_span.first to
/// t_span.second (either direction).
JacobiSolution jacobi_solve(const JacobiSystem& system, double y0, double ydot0,
                            std::pair<double, double> t_span, double tol = 1e-12);

/// Linearized flow: propagates the columns of V0 (tangent vectors in the phase
/// coordinates (rho, y, xi_bar0, eta)) from t_span.first to t_span.second.
/// Returns the propagated columns at the end time.
Mat linearized_flow(const JacobiSystem& system, const Mat& V0, std::pair<double, double> t_span,
                    double tol = 1e-10);

/// Basis (columns) of the vertical tangent space of the unit cosphere at p:
/// variations of (xi_bar0, eta) preserving xi_bar0^2 + rho^2 |eta|^2 = 1.
Mat vertical_basis(const BoundaryMetricFamily& family, const BPhasePoint& p);

/// Conjugate times in (0, t_max] to t = 0. For n = 1, zeros of the Jacobi
/// field with y(0) = 0, ydot(0) = 1. For n > 1, sign changes of
/// det[J_1 ... J_n, gamma'] with J_k the position parts of the linearized
/// flow of a vertical basis.
std::vector<double> conjugate_points(const JacobiSystem& system, double t_max);
/// The linearized-flow route for any n (used for n > 1 by conjugate_points).
std::vector<double> conjugate_points_linearized(const JacobiSystem& system, double t_max,
                                                int samples_per_unit = 8);

struct BundleFrame {
  BPhasePoint z;
  /// Columns are initial data at t = 0, unit Euclidean norm. For n = 1 these
  /// are (y, ydot) pairs; for n > 1 they are phase-coordinate tangent vectors.
  Mat stable;
  Mat unstable;
  double transversality_deg = 0.0;  // smallest principal angle between the spans
  double det = 0.0;                 // |det [stable | unstable]| (n = 1)
};

/// Stable solutions by backward integration from T_asym with data
/// e^{-T}(1, -1), unstable ones forward from -T_asym with e^{-T}(1, 1).
/// For n > 1 the vertical basis at +-T_asym is propagated by the linearized
/// flow instead. Throws InvalidArgument if |R(+-T_asym) + 1| > curvature_tol.
BundleFrame stable_unstable(const JacobiSystem& system, double T_asym = 25.0,
                            double curvature_tol = 1e-10);

/// Hyperbolicity constants of the stable solution on [0, t_end] (n = 1),
/// measured with the proxy norm |y| + |ydot|.
struct DecayReport {
  double nu_fit = 0.0;      // least-squares decay exponent of log |x(t)|
  double C_cert = 0.0;      // max over s < t of |x(t)| / |x(s)| e^{nu (t - s)}
  double nu = 0.95;
  double curvature_C = 0.0;  // max |R(t) + 1| e^{|t - t_peak|} over the range
};
DecayReport stable_decay(const JacobiSystem& system, double nu = 0.95, double t_fit_lo = 2.0,
                         double t_end = 20.0, double T_asym = 25.0);

/// Constant C of rho(s) e^{-(t - s)} <= rho(t) <= C rho(s) e^{-(t - s)} for
/// s < t after the base geodesic enters the collar rho <= epsilon on its way
/// out. Returns the measured C (>= 1); `lower_ok` reports the left inequality.
struct ApproachReport {
  double C = 1.0;
  bool lower_ok = true;
  double t_collar = 0.0;
};
ApproachReport boundary_approach(const JacobiSystem& system, double epsilon = 0.1,
                                 int samples = 400);

struct SimplicityReport {
  double min_angle_deg = 90.0;
  int conjugate_count = 0;
  double min_det = 1.0;
  int geodesics = 0;
  int failures = 0;  // traces that could not be completed
};

/// Sweeps stable_unstable and conjugate_points over the geodesics of the
/// given incoming covectors.
SimplicityReport simplicity_check(const BoundaryMetricFamily& family,
                                  const std::vector<BoundaryCovector>& grid,
                                  double T_asym = 25.0, double t_conj = 30.0, int jobs = 0);

}  // namespace ahx

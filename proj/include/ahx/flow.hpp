#pragma once

// Rescaled geodesic flow on the compactified cosphere bundle.
//
// With xi_bar0 = rho xi_0 the geodesic spray is X = rho Xbar, where
//
//   Xbar = ( xi_bar0,
//            rho h^{ij} eta_i,
//            -[rho |eta|^2 + 1/2 rho^2 d_rho |eta|^2],
//            -1/2 rho d_{y^k} |eta|^2 )
//
// is smooth up to rho = 0 and transverse to the boundary. Incoming boundary
// data sit at (0, y, +1, eta), outgoing data at (0, y, -1, eta).
//
// Integration runs on an augmented state
//
//   [rho, y (n), xi_bar0, eta (n), A, B]   with A' = 1 - xi_bar0, B' = 1 + xi_bar0.
//
// For a trace started on the boundary, A = tau - rho exactly, and on the final
// approach rho = (tau_plus - tau) - (B_plus - B). Both brackets are integrated
// from their small closed forms rho^2|eta|^2 / (1 +- xi_bar0), so the
// endpoint-singular integrands of the renormalization are cancellation free.

#include "ahx/metric.hpp"
#include "ahx/ode.hpp"
#include "ahx/types.hpp"

#include <utility>
#include <vector>

namespace ahx {

/// Point (rho, y, xi_bar0, eta) of the compactified cosphere bundle.
struct BPhasePoint {
  double rho = 0.0;
  Vec y;
  double xi_bar0 = 1.0;
  Vec eta;

  /// xi_bar0^2 + rho^2 |eta|^2_{h_rho} - 1.
  double constraint_defect(const BoundaryMetricFamily& family) const;
};

enum class Side { incoming, outgoing };

/// Boundary datum (y, eta) on the incoming or outgoing boundary of S*M.
struct BoundaryCovector {
  Vec y;
  Vec eta;
  Side side = Side::incoming;

  BPhasePoint phase_point() const;
};

struct TraceOptions {
  double rtol = 1e-10;
  double atol = 1e-10;
  double event_tol = 1e-13;  // |rho| at the located boundary event
  double t_max = 60.0;       // hyperbolic arclength budget
};

/// Dense solution of the rescaled flow, ending on the outgoing boundary.
class GeodesicTrajectory {
 public:
  using Segment = DenseSegment<double>;

  GeodesicTrajectory(int n, bool starts_on_boundary, std::vector<Segment> segments,
                     std::vector<double> b_increments);

  int dim() const { return n_; }
  bool starts_on_boundary() const { return from_boundary_; }
  double tau_plus() const { return tau_plus_; }
  const std::vector<Segment>& segments() const { return segments_; }

  BPhasePoint start() const { return at(0.0); }
  BPhasePoint end() const;
  BPhasePoint at(double tau) const;
  /// Augmented state at tau (the B slot holds the per-step local value).
  Vec raw(double tau) const;

  /// rho(tau), evaluated from the bracket that is accurate at the nearer end.
  double rho(double tau) const;
  /// tau - rho(tau) (only meaningful for boundary starts).
  double head_gap(double tau) const;
  /// (tau_plus - tau) - rho(tau).
  double tail_gap(double tau) const;
  /// Rescaled time of the maximum of rho.
  double tau_peak() const;

  /// Hyperbolic arclength int dtau / rho between two interior rescaled times.
  double arclength(double tau_a, double tau_b) const;

  /// Accepted-step knots (tau, state).
  std::vector<std::pair<double, BPhasePoint>> samples() const;

  const Segment& segment_at(double tau) const;

 private:
  BPhasePoint unpack(const Vec& x) const;

  int n_;
  bool from_boundary_;
  std::vector<Segment> segments_;
  std::vector<double> b_suffix_;  // B increments from each segment to the end
  double tau_plus_;
  mutable double tau_peak_ = -1.0;
};

/// Layout helpers for the augmented state.
struct StateLayout {
  int n;
  int rho() const { return 0; }
  int y(int k) const { return 1 + k; }
  int xi() const { return 1 + n; }
  int eta(int k) const { return 2 + n + k; }
  int a() const { return 2 + 2 * n; }
  int b() const { return 3 + 2 * n; }
  int size() const { return 4 + 2 * n; }
};

/// The rescaled field at a phase point: (d rho, dy, d xi_bar0, d eta) / d tau.
struct Tangent {
  double drho;
  Vec dy;
  double dxi;
  Vec deta;
};
Tangent barX_eval(const BoundaryMetricFamily& family, const BPhasePoint& state);

/// Right-hand side of the augmented system (no range checks; used slightly
/// beyond rho = 0 by the integrator).
void augmented_rhs(const BoundaryMetricFamily& family, const Vec& x, Vec& dx);

/// Traces the geodesic entering at z (incoming side) until it reaches the
/// outgoing boundary. Throws TrappedOrSlow or ChartExit.
GeodesicTrajectory trace_geodesic(const BoundaryMetricFamily& family, const BoundaryCovector& z,
                                  const TraceOptions& opts = {});

/// Forward trace from an interior phase point to the outgoing boundary.
GeodesicTrajectory trace_from(const BoundaryMetricFamily& family, const BPhasePoint& start,
                              const TraceOptions& opts = {});

/// Time reversal (rho, y, xi_bar0, eta) -> (rho, y, -xi_bar0, -eta).
BPhasePoint reversed(const BPhasePoint& p);

/// Outgoing boundary datum of the geodesic entering at z; periodic y reduced.
BoundaryCovector scattering_map(const BoundaryMetricFamily& family, const BoundaryCovector& z,
                                const TraceOptions& opts = {});

struct ShortGeodesicSample {
  double s;
  double theta;
  Vec u;
  Vec omega;
  double rho;
};

struct ShortGeodesicResult {
  double delta = 0.0;
  Vec omega0;
  std::vector<ShortGeodesicSample> samples;
  Vec y_end;
  Vec u_end;
  Vec omega_end;
  double s0 = 0.0;
};

/// Largest delta accepted by short_geodesic unless overridden.
inline constexpr double kDefaultDeltaMax = 0.2;

/// Integrates the short-geodesic system in s,
///   dtheta/ds = 1 + delta Qt,
///   du^i/ds   = sin(theta) h^{ij} omega_j / |omega|^2,
///   domega_i/ds = -delta sin(theta) d_{y^i} h^{jk} omega_j omega_k / (2 |omega|^2),
/// where h is evaluated at (rho, y0 + delta u) and rho solves
/// rho |omega|_{h_rho} = delta sin(theta). Stops at theta = pi.
ShortGeodesicResult short_geodesic(const BoundaryMetricFamily& family, const Vec& y0,
                                   const Vec& omega0, double delta,
                                   double delta_max = kDefaultDeltaMax, double tol = 1e-11);

struct ScatteringJacobian {
  Mat dS;                       // 2n x 2n, ordering (y, eta)
  double symplectic_residual;   // || dS^T J dS - J ||
  double det;
};

ScatteringJacobian scattering_jacobian(const BoundaryMetricFamily& family,
                                       const BoundaryCovector& z, double step = 1e-4,
                                       const TraceOptions& opts = {1e-12, 1e-12, 1e-14, 60.0});

}  // namespace ahx

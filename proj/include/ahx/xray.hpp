#pragma once

// X-ray transforms along traced geodesics, phase-space quadrature for the
// Santalo and adjointness identities, and the zero-energy resolvents.

#include "ahx/flow.hpp"
#include "ahx/quadrature.hpp"
#include "ahx/tensor.hpp"

#include <functional>
#include <vector>

namespace ahx {

/// Scalar function on the compactified cosphere bundle.
using PhaseFunction = std::function<double(const BPhasePoint&)>;

/// int_0^{tau_plus} g(tau) dtau over the dense segments of traj.
QuadResult integrate_along(const GeodesicTrajectory& traj, const std::function<double(double)>& g,
                           double abs_tol = 1e-14, double rel_tol = 1e-12);

/// I_m f along an already traced geodesic: int (lift f) / rho dtau.
double xray_transform(const BoundaryMetricFamily& family, const SymmetricTensorField& f,
                      const GeodesicTrajectory& traj);
/// I_m f(z) for an incoming boundary covector z.
double xray_transform(const BoundaryMetricFamily& family, const SymmetricTensorField& f,
                      const BoundaryCovector& z, const TraceOptions& opts = {});

/// I F = int F / rho dtau for a function on S*M (compactly supported or
/// vanishing at the boundary).
double xray_phase(const GeodesicTrajectory& traj, const PhaseFunction& F);

/// Incoming boundary datum B_-(p) of the orbit through an interior point p.
BoundaryCovector incoming_endpoint(const BoundaryMetricFamily& family, const BPhasePoint& p,
                                   const TraceOptions& opts = {});

/// R_+(0)F(z) = int_0^inf (F(phi_t z) - F(B_+ z)) dt   (sign = +1),
/// R_-(0)F(z) = int_0^inf (F(B_- z) - F(phi_{-t} z)) dt (sign = -1),
/// evaluated in the rescaled time.
double resolvent_zero(const BoundaryMetricFamily& family, const PhaseFunction& F,
                      const BPhasePoint& z, int sign, const TraceOptions& opts = {});

/// Nodes and positive weights of a product Gauss rule. On the incoming
/// boundary the nodes are (y, eta) and the weights carry d eta dy. On the
/// phase-space window (n = 1) the nodes are (rho, y, angle) with the
/// Liouville density sqrt(h) / rho^2 folded into the weights.
struct QuadratureMeasure {
  std::vector<Vec> nodes;
  std::vector<double> weights;
  std::vector<bool> edge;  // outermost node in some coordinate
};

struct Box {
  double lo, hi;
};

QuadratureMeasure boundary_measure(Box y, Box eta, int panels_y, int panels_eta, int p);
QuadratureMeasure phase_window_measure(const BoundaryMetricFamily& family, Box rho, Box y,
                                       Box angle, int panels, int p);

/// n = 1 phase point at angle a of the fiber circle:
/// xi_bar0 = cos a, rho eta / sqrt(h) = sin a.
BPhasePoint phase_point_from_angle(const BoundaryMetricFamily& family, double rho, double y,
                                   double angle);
/// Inverse of phase_point_from_angle for the angle coordinate.
double fiber_angle(const BoundaryMetricFamily& family, const BPhasePoint& p);

struct SantaloResult {
  double lhs = 0.0;       // int_{S*M} F |mu|
  double rhs = 0.0;       // int_{d_- S*M} I F |mu_d|
  double leakage = 0.0;   // largest edge-node contribution relative to the total
  int traced = 0;
};

/// Compares both sides of the Santalo formula for a compactly supported F.
/// Throws InvalidArgument when the edge contributions exceed leak_tol.
SantaloResult santalo_check(const BoundaryMetricFamily& family, const PhaseFunction& F,
                            const QuadratureMeasure& interior, const QuadratureMeasure& boundary,
                            const TraceOptions& opts = {}, double leak_tol = 1e-10);

struct AdjointResult {
  double boundary_side = 0.0;  // <I F, omega> on d_- S*M
  double interior_side = 0.0;  // <F, omega o B_-> on S*M
  double leakage = 0.0;
  int traced = 0;
};

/// Checks <I F, omega> = <F, omega o B_-> for omega a function of (y, eta).
AdjointResult adjointness_check(const BoundaryMetricFamily& family, const PhaseFunction& F,
                                const std::function<double(const Vec& y, const Vec& eta)>& omega,
                                const QuadratureMeasure& interior,
                                const QuadratureMeasure& boundary, const TraceOptions& opts = {},
                                double leak_tol = 1e-10);

/// Bounding box (centred y offsets about y_ref, eta) of the incoming data of
/// orbits through the given interior points, enlarged by `margin` (relative).
std::pair<Box, Box> incoming_window(const BoundaryMetricFamily& family,
                                    const std::vector<BPhasePoint>& points, double y_ref,
                                    double margin, const TraceOptions& opts = {});

}  // namespace ahx

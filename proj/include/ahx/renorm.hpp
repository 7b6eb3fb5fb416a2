#pragma once

// Renormalized lengths of complete geodesics, the renormalized boundary
// distance, the conformal-change law and the first variation under metric
// deformations.

#include "ahx/flow.hpp"
#include "ahx/tensor.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace ahx {

enum class LengthMethod { regularized, mellin };

struct RenormalizedLengthRecord {
  BoundaryCovector z;
  double L = 0.0;
  LengthMethod method = LengthMethod::regularized;
  double estimated_error = 0.0;
  /// Mellin route only: fitted residue c_{-1} and |c_{-1} - 2|.
  double residue = 0.0;
  double residue_defect = 0.0;
};

/// L = int_0^{tau_plus} [1/rho - 1/tau - 1/(tau_plus - tau)] dtau + 2 log tau_plus,
/// evaluated as two cancellation-free brackets split at the peak of rho.
RenormalizedLengthRecord renormalized_length(const GeodesicTrajectory& traj);

/// Default lambda grid: 12 Chebyshev points on [0.02, 0.5].
std::vector<double> default_lambda_grid();

/// I(lambda) = int rho^{lambda - 1} dtau on the grid, least-squares fit of
/// c_{-1}/lambda + sum_{k=0}^{degree} c_k lambda^k, L = c_0.
/// Throws ConvergenceFailure if |c_{-1} - 2| exceeds residue_tol.
RenormalizedLengthRecord renormalized_length_mellin(const GeodesicTrajectory& traj,
                                                    const std::vector<double>& lambda_grid = default_lambda_grid(),
                                                    int degree = 8, double residue_tol = 1e-3);

/// The Mellin integral I(lambda) for one lambda in (0, 1].
double mellin_integral(const GeodesicTrajectory& traj, double lambda, double* error = nullptr);

struct DistanceRecord {
  Vec y_minus;
  Vec y_plus;
  double dR = 0.0;
  Vec eta_star;
  int newton_iters = 0;
  double residual = 0.0;
  double length_error = 0.0;
};

struct DistanceOptions {
  double tol = 1e-11;      // shooting residual |pi(S_g) - y_plus|
  int max_iters = 50;
  double fd_step = 1e-6;   // relative step of the shooting Jacobian
  TraceOptions trace{};
};

/// Renormalized distance between two boundary points by damped Newton
/// shooting on pi(S_g(y_minus, eta)) = y_plus.
DistanceRecord boundary_distance(const BoundaryMetricFamily& family, const Vec& y_minus,
                                 const Vec& y_plus, const DistanceOptions& opts = {},
                                 std::optional<Vec> eta_guess = std::nullopt);

struct ScatteringFromDistanceReport {
  Vec grad_p;            // d_p d^R
  Vec grad_q;            // d_q d^R
  Vec eta_star;          // connecting momentum from shooting
  Vec y_out;             // pi(S_g(p, -grad_p))
  Vec eta_out;
  double residual_y = 0.0;
  double residual_eta = 0.0;
  double residual = 0.0;  // max of the two
};

ScatteringFromDistanceReport scattering_from_distance_check(const BoundaryMetricFamily& family,
                                                            const Vec& y_minus, const Vec& y_plus,
                                                            double fd_step = 1e-3,
                                                            const DistanceOptions& opts = {});

/// Scalar function on the boundary with its gradient.
struct BoundaryFunction {
  std::function<double(const Vec&)> value;
  std::function<Vec(const Vec&)> gradient;

  static BoundaryFunction constant(double c, int n);
  /// From an expression in y1..yn (rho must not appear).
  static BoundaryFunction from_expression(const Expression& e, int n);
};

/// Renormalized length computed with the defining function rho e^{omega(y)}
/// directly (log-derivative regularization split at the peak of rho).
double renormalized_length_conformal(const BoundaryMetricFamily& family,
                                     const GeodesicTrajectory& traj, const BoundaryFunction& omega);

/// L_hat - L for the representative e^{2 omega} h_0; the contract is
/// omega(pi(z)) + omega(pi(S_g z)).
double conformal_shift(const BoundaryMetricFamily& family, const GeodesicTrajectory& traj,
                       const BoundaryFunction& omega);

struct DeformationResult {
  double dL_ds = 0.0;     // central difference of L_{g(s)}(z)
  double I2 = 0.0;        // X-ray transform of gdot along the s = 0 geodesic
};

using FamilyPath = std::function<BoundaryMetricFamily(double s)>;

/// gdot = d/ds g(s) at s = 0 as a rank-2 tensor, from a central difference of
/// h_rho(s) / rho^2 with the given step.
SymmetricTensorField metric_variation(const FamilyPath& path, double step, int weight);

DeformationResult deformation_derivative(const FamilyPath& path, const BoundaryCovector& z,
                                         double fd_step = 1e-3, int gdot_weight = 2,
                                         const TraceOptions& opts = {});

/// Variation of the renormalized distance between the two fixed boundary
/// endpoints of the s = 0 geodesic through z, by central difference. The
/// first-variation formula predicts half of I_2(gdot) here, since the ends
/// do not move.
double distance_variation(const FamilyPath& path, const BoundaryCovector& z, double fd_step = 1e-3,
                          const DistanceOptions& opts = {});

}  // namespace ahx

#pragma once

// Boundary determination from renormalized lengths of short geodesics.
//
// A short geodesic enters at y0 with momentum eta = omega0 / delta. Its
// renormalized length behaves like
//
//   L(delta) = 2 log 2 delta - 2 log |omega0|_{h_0} + F(delta'),  delta' = delta / |omega0|,
//
// with F(0) = 0. The constant term recovers h_0. The slope F'(0) carries
// -(pi/2) d_rho h^{-1}(omega, omega) plus two tangential terms that only
// involve h_0. A second route fits a truncated Taylor model of h_rho to the
// samples with a forward simulator.

#include "ahx/metric.hpp"
#include "ahx/types.hpp"

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace ahx {

struct LengthSampleSet {
  Vec y0;
  std::vector<Vec> directions;  // raw covectors omega0
  std::vector<double> deltas;   // decreasing
  Mat L;                        // L(direction index, delta index)
  double noise = 0.0;           // amplitude of the additive uniform noise
  bool periodic = true;         // boundary chart of y0 (for tangential differences)
};

/// Geometric grid 0.2, 0.1, ..., 0.003125.
std::vector<double> default_delta_grid();

/// Traces every (direction, delta) pair and records L. Noise, if requested,
/// is uniform in [-noise, noise] from a generator seeded with `seed`.
LengthSampleSet synthesize_samples(const BoundaryMetricFamily& family, const Vec& y0,
                                   const std::vector<Vec>& directions,
                                   const std::vector<double>& deltas, double noise = 0.0,
                                   std::uint64_t seed = 0, int jobs = 0);

struct H0Estimate {
  Vec norms;                 // |omega0|_{h_0} per direction
  Mat h0;                    // assembled by polarization
  std::vector<Vec> coeffs;   // (c0, c1, c2) per direction
  double fit_residual = 0.0; // largest rms misfit of the per-direction fits
};

/// Fits L - 2 log 2 delta = c0 + c1 delta + c2 delta^2 per direction and
/// polarizes the values e^{-c0} = h_0^{-1}(omega, omega). Needs at least 3
/// deltas and n(n+1)/2 independent directions.
H0Estimate recover_h0(const LengthSampleSet& samples);

struct FirstJetEstimate {
  Vec y0;
  Vec slopes;                // F'(0) per direction
  Vec slope_errors;          // change of F'(0) between fit orders
  Vec corrections;           // tangential terms per direction (they cancel)
  Vec quadratic_values;      // d_rho h^{-1}(omega_hat, omega_hat)
  Mat drho_h_inv;
  Mat drho_h;                // -h0 (d_rho h^{-1}) h0
};

/// Asymptotic route for d_rho h at every sample point. Tangential
/// derivatives of the recovered h_0 come from local least-squares fits over
/// the neighbouring sample points (at least n + 1 of them).
std::vector<FirstJetEstimate> recover_first_jet(const std::vector<LengthSampleSet>& sets,
                                                const std::vector<H0Estimate>& h0s,
                                                int fit_order = 3);

struct JetEstimate {
  Vec y0;
  Mat h0;
  Mat drho_h;
  Mat d2rho_h;   // zero when order < 2
  int order = 0;
};

struct JetFitReport {
  std::vector<JetEstimate> jets;  // one per sample point
  Vec fit_residuals;              // model minus data, per sample
  double residual_rms = 0.0;
  int iterations = 0;
  int parameters = 0;
  int rank = 0;                   // numerical rank of the final Jacobian
  Mat unresolved;                 // parameter-space directions beyond the rank (columns)
  bool converged = false;
};

struct JetFitOptions {
  int k_max = 2;
  int max_iters = 30;
  double rank_tol = 1e-7;   // relative singular-value cutoff
  double fd_step = 1e-6;
  int jobs = 0;
};

/// Levenberg-Marquardt fit of h_rho = h0(y) + rho h1(y) + rho^2/2 h2(y)
/// (n = 1, periodic boundary) to all samples. Each coefficient is a
/// trigonometric interpolant on 8 equispaced nodes when the samples cover at
/// least 8 distinct points, and a constant otherwise.
JetFitReport recover_jet_fit(const std::vector<LengthSampleSet>& sets, const JetFitOptions& opts = {});

/// Trigonometric polynomial interpolating values at y_j = 2 pi j / m.
TrigPoly trig_interpolant(const std::vector<double>& values);

nlohmann::json to_json(const LengthSampleSet& s);
LengthSampleSet sample_set_from_json(const nlohmann::json& j);
nlohmann::json to_json(const JetEstimate& e);
nlohmann::json to_json(const JetFitReport& r);
nlohmann::json to_json(const FirstJetEstimate& e);

}  // namespace ahx

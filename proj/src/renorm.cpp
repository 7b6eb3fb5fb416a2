#include "ahx/renorm.hpp"

#include "ahx/quadrature.hpp"
#include "ahx/xray.hpp"

#include <algorithm>
#include <cmath>

namespace ahx {

namespace {

// Floor for the error estimate: the trajectory itself is only as accurate as
// the integrator tolerance.
constexpr double kTraceErrorFloor = 1e-9;

QuadResult integrate_range(const GeodesicTrajectory& traj, const std::function<double(double)>& g,
                           double a, double b) {
  QuadResult total;
  for (const auto& seg : traj.segments()) {
    const double lo = std::max(a, seg.t0), hi = std::min(b, seg.t1());
    if (hi <= lo) continue;
    const QuadResult r = integrate_gk15(g, lo, hi, 1e-15, 1e-13);
    total.value += r.value;
    total.error += r.error;
    total.evaluations += r.evaluations;
  }
  return total;
}

void require_complete(const GeodesicTrajectory& traj, const char* who) {
  if (!traj.starts_on_boundary())
    throw InvalidArgument(std::string(who) + ": trajectory must start on the incoming boundary");
}

BoundaryCovector incoming_of(const GeodesicTrajectory& traj) {
  const BPhasePoint s = traj.start();
  return {s.y, s.eta, Side::incoming};
}

}  // namespace

RenormalizedLengthRecord renormalized_length(const GeodesicTrajectory& traj) {
  require_complete(traj, "renormalized_length");
  const double tp = traj.tau_plus();
  const double tm = traj.tau_peak();
  // 1/rho - 1/tau = A / (rho tau) with A = tau - rho.
  const QuadResult q1 = integrate_range(traj, [&](double t) {
    const double a = traj.head_gap(t);
    return a / ((t - a) * t);
  }, 0.0, tm);
  // 1/rho - 1/s = B / (rho s) with s = tau_plus - tau and B = s - rho.
  const QuadResult q2 = integrate_range(traj, [&](double t) {
    const double s = tp - t;
    const double b = traj.tail_gap(t);
    return b / ((s - b) * s);
  }, tm, tp);
  RenormalizedLengthRecord rec;
  rec.z = incoming_of(traj);
  rec.method = LengthMethod::regularized;
  rec.L = q1.value + q2.value + std::log(tp - tm) + std::log(tm);
  rec.estimated_error = q1.error + q2.error + kTraceErrorFloor;
  return rec;
}

std::vector<double> default_lambda_grid() {
  const int m = 12;
  const double a = 0.02, b = 0.5;
  std::vector<double> g(m);
  for (int i = 0; i < m; ++i)
    g[i] = 0.5 * (a + b) - 0.5 * (b - a) * std::cos(kPi * (i + 0.5) / m);
  return g;
}

double mellin_integral(const GeodesicTrajectory& traj, double lambda, double* error) {
  require_complete(traj, "mellin_integral");
  if (!(lambda > 0) || lambda > 1) throw InvalidArgument("mellin_integral: lambda must lie in (0, 1]");
  const double tp = traj.tau_plus();
  const double tm = traj.tau_peak();
  const double lm1 = lambda - 1.0;
  // int tau^{lambda-1} [(rho/tau)^{lambda-1} - 1] with rho/tau = 1 - A/tau.
  const QuadResult r1 = integrate_range(traj, [&](double t) {
    return std::pow(t, lm1) * std::expm1(lm1 * std::log1p(-traj.head_gap(t) / t));
  }, 0.0, tm);
  const QuadResult r2 = integrate_range(traj, [&](double t) {
    const double s = tp - t;
    return std::pow(s, lm1) * std::expm1(lm1 * std::log1p(-traj.tail_gap(t) / s));
  }, tm, tp);
  if (error) *error = r1.error + r2.error;
  return std::pow(tm, lambda) / lambda + std::pow(tp - tm, lambda) / lambda + r1.value + r2.value;
}

namespace {

// Least-squares Laurent fit; returns coefficients [c_{-1}, c_0, ..., c_degree].
Vec laurent_fit(const std::vector<double>& lam, const std::vector<double>& val, int degree) {
  const int m = static_cast<int>(lam.size());
  Mat A(m, degree + 2);
  Vec b(m);
  for (int i = 0; i < m; ++i) {
    A(i, 0) = 1.0 / lam[i];
    double p = 1.0;
    for (int k = 0; k <= degree; ++k) {
      A(i, k + 1) = p;
      p *= lam[i];
    }
    b[i] = val[i];
  }
  return A.colPivHouseholderQr().solve(b);
}

}  // namespace

RenormalizedLengthRecord renormalized_length_mellin(const GeodesicTrajectory& traj,
                                                    const std::vector<double>& lambda_grid,
                                                    int degree, double residue_tol) {
  require_complete(traj, "renormalized_length_mellin");
  if (lambda_grid.size() < 4) throw InvalidArgument("mellin: need at least 4 lambda values");
  for (double l : lambda_grid)
    if (!(l > 0 && l <= 0.5)) throw InvalidArgument("mellin: lambda values must lie in (0, 1/2]");
  if (degree < 2 || static_cast<int>(lambda_grid.size()) < degree + 2)
    throw InvalidArgument("mellin: degree must be >= 2 and below the grid size - 1");

  // Fit tau_plus^{-lambda} I(lambda) so the Taylor part does not carry the
  // growth of tau_plus^lambda; the constant term shifts back by c_{-1} log tau_plus.
  const double log_tp = std::log(traj.tau_plus());
  std::vector<double> vals(lambda_grid.size());
  double qerr = 0.0;
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    double e = 0.0;
    const double scale = std::exp(-lambda_grid[i] * log_tp);
    vals[i] = scale * mellin_integral(traj, lambda_grid[i], &e);
    qerr = std::max(qerr, scale * e);
  }
  const Vec c = laurent_fit(lambda_grid, vals, degree);
  const Vec c_lower = laurent_fit(lambda_grid, vals, degree - 1);

  RenormalizedLengthRecord rec;
  rec.z = incoming_of(traj);
  rec.method = LengthMethod::mellin;
  rec.L = c[1] + c[0] * log_tp;
  rec.residue = c[0];
  rec.residue_defect = std::abs(c[0] - 2.0);
  // Model error from the change between consecutive degrees, quadrature error
  // amplified by the pole column (1/lambda_min).
  const double lmin = *std::min_element(lambda_grid.begin(), lambda_grid.end());
  rec.estimated_error = std::abs(c[1] + c[0] * log_tp - c_lower[1] - c_lower[0] * log_tp) + qerr / lmin + kTraceErrorFloor;
  if (rec.residue_defect > residue_tol)
    throw ConvergenceFailure("mellin: residue " + std::to_string(c[0]) +
                             " deviates from 2 (endpoint quadrature failure?)");
  return rec;
}

// ---------------------------------------------------------------------------
// Boundary distance

DistanceRecord boundary_distance(const BoundaryMetricFamily& family, const Vec& y_minus,
                                 const Vec& y_plus, const DistanceOptions& opts,
                                 std::optional<Vec> eta_guess) {
  const int n = family.dim();
  if (y_minus.size() != n || y_plus.size() != n)
    throw InvalidArgument("boundary_distance: wrong dimension");
  const Vec dy = family.difference(y_plus, y_minus);
  if (dy.norm() == 0.0) throw InvalidArgument("boundary_distance: y_minus equals y_plus");

  Vec eta;
  if (eta_guess) {
    eta = *eta_guess;
  } else {
    // Frozen-metric short-geodesic formula; exact for the half-plane.
    const Mat h0 = family.h(0.0, y_minus);
    eta = 2.0 * (h0 * dy) / dy.dot(h0 * dy);
  }

  auto residual = [&](const Vec& e) {
    const BoundaryCovector out = scattering_map(family, {y_minus, e, Side::incoming}, opts.trace);
    return Vec(family.difference(out.y, y_plus));
  };

  DistanceRecord rec;
  rec.y_minus = y_minus;
  rec.y_plus = y_plus;
  Vec r = residual(eta);
  int it = 0;
  while (r.norm() > opts.tol) {
    if (++it > opts.max_iters)
      throw ConvergenceFailure("boundary_distance: Newton did not converge in " +
                               std::to_string(opts.max_iters) + " iterations");
    Mat J(n, n);
    for (int k = 0; k < n; ++k) {
      const double h = opts.fd_step * std::max(1.0, std::abs(eta[k]));
      Vec ep = eta, em = eta;
      ep[k] += h;
      em[k] -= h;
      J.col(k) = (residual(ep) - residual(em)) / (2 * h);
    }
    const Vec step = J.fullPivLu().solve(-r);
    double lam = 1.0;
    bool accepted = false;
    for (int halving = 0; halving < 30; ++halving, lam *= 0.5) {
      const Vec trial = eta + lam * step;
      Vec rt;
      try {
        rt = residual(trial);
      } catch (const ChartExit&) {
        continue;
      } catch (const TrappedOrSlow&) {
        continue;
      } catch (const ConvergenceFailure&) {
        continue;
      }
      if (rt.norm() < r.norm()) {
        eta = trial;
        r = rt;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      // Stalled at the noise level of the traces: accept if close enough.
      if (r.norm() <= 100.0 * opts.tol) break;
      throw ConvergenceFailure("boundary_distance: damped Newton stalled at residual " +
                               std::to_string(r.norm()));
    }
  }
  const GeodesicTrajectory traj = trace_geodesic(family, {y_minus, eta, Side::incoming}, opts.trace);
  const RenormalizedLengthRecord L = renormalized_length(traj);
  rec.dR = L.L;
  rec.length_error = L.estimated_error;
  rec.eta_star = eta;
  rec.newton_iters = it;
  rec.residual = r.norm();
  return rec;
}

ScatteringFromDistanceReport scattering_from_distance_check(const BoundaryMetricFamily& family,
                                                            const Vec& y_minus, const Vec& y_plus,
                                                            double fd_step,
                                                            const DistanceOptions& opts) {
  const int n = family.dim();
  if (!(fd_step > 0)) throw InvalidArgument("scattering_from_distance_check: fd_step must be positive");
  const DistanceRecord base = boundary_distance(family, y_minus, y_plus, opts);
  ScatteringFromDistanceReport rep;
  rep.eta_star = base.eta_star;
  rep.grad_p.resize(n);
  rep.grad_q.resize(n);
  for (int k = 0; k < n; ++k) {
    Vec pp = y_minus, pm = y_minus, qp = y_plus, qm = y_plus;
    pp[k] += fd_step;
    pm[k] -= fd_step;
    qp[k] += fd_step;
    qm[k] -= fd_step;
    rep.grad_p[k] = (boundary_distance(family, pp, y_plus, opts, base.eta_star).dR -
                     boundary_distance(family, pm, y_plus, opts, base.eta_star).dR) / (2 * fd_step);
    rep.grad_q[k] = (boundary_distance(family, y_minus, qp, opts, base.eta_star).dR -
                     boundary_distance(family, y_minus, qm, opts, base.eta_star).dR) / (2 * fd_step);
  }
  const BoundaryCovector out =
      scattering_map(family, {y_minus, Vec(-rep.grad_p), Side::incoming}, opts.trace);
  rep.y_out = out.y;
  rep.eta_out = out.eta;
  rep.residual_y = family.difference(out.y, y_plus).norm();
  rep.residual_eta = (out.eta - rep.grad_q).norm();
  rep.residual = std::max(rep.residual_y, rep.residual_eta);
  return rep;
}

// ---------------------------------------------------------------------------
// Conformal change

BoundaryFunction BoundaryFunction::constant(double c, int n) {
  return {[c](const Vec&) { return c; }, [n](const Vec&) { return Vec(Vec::Zero(n)); }};
}

BoundaryFunction BoundaryFunction::from_expression(const Expression& e, int n) {
  if (e.max_slot() > n) throw InvalidArgument("boundary function: uses y beyond y" + std::to_string(n));
  {
    // Probe for rho dependence at a generic point.
    std::vector<Dual> v(n + 1);
    v[0] = Dual::variable(0.37, 0);
    for (int k = 0; k < n; ++k) v[k + 1] = Dual(0.61 + 0.23 * k);
    if (e.eval(std::span<const Dual>(v)).d[0] != 0.0)
      throw InvalidArgument("boundary function: must not depend on rho");
  }
  auto value = [e, n](const Vec& y) {
    std::vector<double> v(n + 1, 0.0);
    for (int k = 0; k < n; ++k) v[k + 1] = y[k];
    return e.eval(std::span<const double>(v));
  };
  auto gradient = [e, n](const Vec& y) {
    std::vector<Dual> v(n + 1);
    for (int k = 0; k < n; ++k) v[k + 1] = Dual::variable(y[k], k + 1);
    const Dual r = e.eval(std::span<const Dual>(v));
    Vec g(n);
    for (int k = 0; k < n; ++k) g[k] = r.d[k + 1];
    return g;
  };
  return {value, gradient};
}

double renormalized_length_conformal(const BoundaryMetricFamily& family,
                                     const GeodesicTrajectory& traj, const BoundaryFunction& omega) {
  require_complete(traj, "renormalized_length_conformal");
  // With rhohat = rho e^{omega(y)} and d(log rhohat)/dt = xi_bar0 + rho d omega(dy/dtau):
  //   Lhat = int_0^{tm} [(1 - xi)/rho - d omega(dy/dtau)] dtau
  //        + int_{tm}^{tp} [(1 + xi)/rho + d omega(dy/dtau)] dtau + 2 log rhohat(tm).
  const double tp = traj.tau_plus();
  const double tm = traj.tau_peak();
  auto pieces = [&](double t, int side) {
    const BPhasePoint p = traj.at(t);
    const MetricEval m = eval_metric_unchecked(family, p.rho, p.y);
    const Vec sharp = m.h_inv * p.eta;
    const double q = p.eta.dot(sharp);
    const double bracket =
        side < 0 ? p.rho * q / (1.0 + std::max(p.xi_bar0, 0.0)) : p.rho * q / (1.0 - std::min(p.xi_bar0, 0.0));
    const double domega = omega.gradient(p.y).dot(p.rho * sharp);
    return side < 0 ? bracket - domega : bracket + domega;
  };
  const QuadResult a = integrate_range(traj, [&](double t) { return pieces(t, -1); }, 0.0, tm);
  const QuadResult b = integrate_range(traj, [&](double t) { return pieces(t, +1); }, tm, tp);
  const BPhasePoint top = traj.at(tm);
  return a.value + b.value + 2.0 * (std::log(top.rho) + omega.value(top.y));
}

double conformal_shift(const BoundaryMetricFamily& family, const GeodesicTrajectory& traj,
                       const BoundaryFunction& omega) {
  return renormalized_length_conformal(family, traj, omega) - renormalized_length(traj).L;
}

// ---------------------------------------------------------------------------
// Deformations

SymmetricTensorField metric_variation(const FamilyPath& path, double step, int weight) {
  const BoundaryMetricFamily plus = path(step), minus = path(-step);
  const int n = plus.dim();
  auto comp = [plus, minus, n, step](double rho, const Vec& y) {
    Mat g = Mat::Zero(n + 1, n + 1);
    g.bottomRightCorner(n, n) = (plus.h(rho, y) - minus.h(rho, y)) / (2.0 * step * rho * rho);
    return g;
  };
  return SymmetricTensorField(2, n, weight, comp);
}

DeformationResult deformation_derivative(const FamilyPath& path, const BoundaryCovector& z,
                                         double fd_step, int gdot_weight, const TraceOptions& opts) {
  if (!(fd_step > 0)) throw InvalidArgument("deformation_derivative: fd_step must be positive");
  DeformationResult out;
  const double lp = renormalized_length(trace_geodesic(path(fd_step), z, opts)).L;
  const double lm = renormalized_length(trace_geodesic(path(-fd_step), z, opts)).L;
  out.dL_ds = (lp - lm) / (2.0 * fd_step);
  const BoundaryMetricFamily base = path(0.0);
  out.I2 = xray_transform(base, metric_variation(path, fd_step, gdot_weight), z, opts);
  return out;
}

double distance_variation(const FamilyPath& path, const BoundaryCovector& z, double fd_step,
                          const DistanceOptions& opts) {
  if (!(fd_step > 0)) throw InvalidArgument("distance_variation: fd_step must be positive");
  const BoundaryMetricFamily base = path(0.0);
  const BoundaryCovector out = scattering_map(base, z, opts.trace);
  const Vec yp = out.y;
  const double dp = boundary_distance(path(fd_step), z.y, yp, opts, z.eta).dR;
  const double dm = boundary_distance(path(-fd_step), z.y, yp, opts, z.eta).dR;
  return (dp - dm) / (2.0 * fd_step);
}

}  // namespace ahx

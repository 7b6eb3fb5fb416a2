#include "ahx/flow.hpp"

#include "ahx/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace ahx {

double BPhasePoint::constraint_defect(const BoundaryMetricFamily& family) const {
  const MetricEval m = eval_metric_unchecked(family, rho, y);
  return xi_bar0 * xi_bar0 + rho * rho * m.eta_normsq(eta) - 1.0;
}

BPhasePoint BoundaryCovector::phase_point() const {
  BPhasePoint p;
  p.rho = 0.0;
  p.y = y;
  p.xi_bar0 = side == Side::incoming ? 1.0 : -1.0;
  p.eta = eta;
  return p;
}

BPhasePoint reversed(const BPhasePoint& p) {
  BPhasePoint r = p;
  r.xi_bar0 = -p.xi_bar0;
  r.eta = -p.eta;
  return r;
}

// ---------------------------------------------------------------------------
// Vector field

Tangent barX_eval(const BoundaryMetricFamily& family, const BPhasePoint& s) {
  if (s.y.size() != family.dim() || s.eta.size() != family.dim())
    throw InvalidArgument("barX_eval: state has wrong dimension");
  const MetricEval m = eval_metric(family, s.rho, s.y);
  const int n = family.dim();
  Tangent t;
  t.drho = s.xi_bar0;
  t.dy = s.rho * (m.h_inv * s.eta);
  t.dxi = -(s.rho * m.eta_normsq(s.eta) + 0.5 * s.rho * s.rho * m.eta_normsq_drho(s.eta));
  t.deta.resize(n);
  for (int k = 0; k < n; ++k) t.deta[k] = -0.5 * s.rho * m.eta_normsq_dy(s.eta, k);
  return t;
}

void augmented_rhs(const BoundaryMetricFamily& family, const Vec& x, Vec& dx) {
  const int n = family.dim();
  const StateLayout L{n};
  const double rho = x[L.rho()];
  const double xi = x[L.xi()];
  const Vec y = x.segment(L.y(0), n);
  const Vec eta = x.segment(L.eta(0), n);
  const MetricEval m = eval_metric_unchecked(family, rho, y);
  const Vec sharp = m.h_inv * eta;
  const double q = eta.dot(sharp);
  const double r2q = rho * rho * q;

  dx.resize(L.size());
  dx[L.rho()] = xi;
  dx.segment(L.y(0), n) = rho * sharp;
  dx[L.xi()] = -(rho * q + 0.5 * rho * rho * m.eta_normsq_drho(eta));
  for (int k = 0; k < n; ++k) dx[L.eta(k)] = -0.5 * rho * m.eta_normsq_dy(eta, k);
  // 1 - xi and 1 + xi in their cancellation-free forms on the unit cosphere.
  dx[L.a()] = xi > 0 ? r2q / (1.0 + xi) : 1.0 - xi;
  dx[L.b()] = xi < 0 ? r2q / (1.0 - xi) : 1.0 + xi;
}

// ---------------------------------------------------------------------------
// Trajectory

GeodesicTrajectory::GeodesicTrajectory(int n, bool starts_on_boundary,
                                       std::vector<Segment> segments,
                                       std::vector<double> b_increments)
    : n_(n), from_boundary_(starts_on_boundary), segments_(std::move(segments)) {
  if (segments_.empty()) throw InvalidArgument("trajectory: no segments");
  tau_plus_ = segments_.back().t1();
  // b_suffix_[k] = sum of the B increments of segments k, k+1, ..., last.
  b_suffix_.assign(segments_.size(), 0.0);
  double acc = 0.0;
  for (int k = static_cast<int>(segments_.size()) - 1; k >= 0; --k) {
    acc += b_increments[k];
    b_suffix_[k] = acc;
  }

  // Peak of rho: first sign change of xi_bar0 (= d rho / d tau).
  const StateLayout L{n_};
  tau_peak_ = 0.0;
  if (segments_.front().r1[L.xi()] > 0) {
    tau_peak_ = tau_plus_;
    for (const Segment& s : segments_) {
      const double x1 = s.component(s.t1(), L.xi());
      if (x1 <= 0) {
        double lo = s.t0, hi = s.t1();
        for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(hi)); ++it) {
          const double mid = 0.5 * (lo + hi);
          (s.component(mid, L.xi()) > 0 ? lo : hi) = mid;
        }
        tau_peak_ = 0.5 * (lo + hi);
        break;
      }
    }
  }
}

const GeodesicTrajectory::Segment& GeodesicTrajectory::segment_at(double tau) const {
  auto it = std::upper_bound(segments_.begin(), segments_.end(), tau,
                             [](double t, const Segment& s) { return t < s.t0; });
  if (it == segments_.begin()) return segments_.front();
  return *(it - 1);
}

Vec GeodesicTrajectory::raw(double tau) const {
  tau = std::clamp(tau, 0.0, tau_plus_);
  return segment_at(tau)(tau);
}

double GeodesicTrajectory::head_gap(double tau) const {
  const StateLayout L{n_};
  return segment_at(tau).component(tau, L.a());
}

double GeodesicTrajectory::tail_gap(double tau) const {
  const StateLayout L{n_};
  tau = std::clamp(tau, 0.0, tau_plus_);
  auto it = std::upper_bound(segments_.begin(), segments_.end(), tau,
                             [](double t, const Segment& s) { return t < s.t0; });
  const std::size_t k = it == segments_.begin() ? 0 : static_cast<std::size_t>(it - segments_.begin() - 1);
  // B_plus - B(tau) = (increments after this segment) + (segment end - local value).
  return b_suffix_[k] - segments_[k].component(tau, L.b());
}

double GeodesicTrajectory::rho(double tau) const {
  if (tau >= tau_peak_) return (tau_plus_ - tau) - tail_gap(tau);
  if (from_boundary_) return tau - head_gap(tau);
  return segment_at(tau).component(tau, 0);
}

double GeodesicTrajectory::tau_peak() const { return tau_peak_; }

BPhasePoint GeodesicTrajectory::unpack(const Vec& x) const {
  const StateLayout L{n_};
  BPhasePoint p;
  p.rho = x[L.rho()];
  p.y = x.segment(L.y(0), n_);
  p.xi_bar0 = x[L.xi()];
  p.eta = x.segment(L.eta(0), n_);
  return p;
}

BPhasePoint GeodesicTrajectory::at(double tau) const {
  if (tau >= tau_plus_) return end();
  tau = std::max(tau, 0.0);
  BPhasePoint p = unpack(segment_at(tau)(tau));
  p.rho = rho(tau);
  if (tau == 0.0 && from_boundary_) {
    p.rho = 0.0;
    p.xi_bar0 = 1.0;
  }
  return p;
}

BPhasePoint GeodesicTrajectory::end() const {
  const Segment& s = segments_.back();
  BPhasePoint p = unpack(s.r1 + s.r2);
  p.rho = 0.0;
  p.xi_bar0 = -1.0;
  return p;
}

double GeodesicTrajectory::arclength(double tau_a, double tau_b) const {
  if (tau_b < tau_a) std::swap(tau_a, tau_b);
  if (!(tau_a > 0) || !(tau_b < tau_plus_))
    throw InvalidArgument("arclength: interval must lie strictly inside (0, tau_plus)");
  double total = 0.0;
  for (const Segment& s : segments_) {
    const double lo = std::max(tau_a, s.t0), hi = std::min(tau_b, s.t1());
    if (hi <= lo) continue;
    total += integrate_gk15([this](double t) { return 1.0 / rho(t); }, lo, hi, 1e-14, 1e-12).value;
  }
  return total;
}

std::vector<std::pair<double, BPhasePoint>> GeodesicTrajectory::samples() const {
  std::vector<std::pair<double, BPhasePoint>> out;
  out.reserve(segments_.size() + 1);
  for (const Segment& s : segments_) out.emplace_back(s.t0, at(s.t0));
  out.emplace_back(tau_plus_, end());
  return out;
}

// ---------------------------------------------------------------------------
// Tracing

namespace {

GeodesicTrajectory run_trace(const BoundaryMetricFamily& family, Vec x0, bool from_boundary,
                             const TraceOptions& opts) {
  const int n = family.dim();
  const StateLayout L{n};
  OdeOptions<double> oo;
  oo.rtol = opts.rtol;
  oo.atol = opts.atol;
  DormandPrince<double> dp(oo);
  const DormandPrince<double>::Rhs f = [&family](double, const Vec& x, Vec& dx) {
    augmented_rhs(family, x, dx);
  };

  std::vector<GeodesicTrajectory::Segment> segments;
  std::vector<double> b_inc;
  double clock = 0.0;
  bool arrived = false;

  auto on_step = [&](const GeodesicTrajectory::Segment& seg, Vec& x) -> StepControl {
    StepControl ctl;
    const double rho1 = x[L.rho()];
    if (rho1 <= 0.0 && x[L.xi()] < 0.0 && seg.r1[L.rho()] > 0.0) {
      // Boundary event: bisection on the dense output, one Newton polish with
      // d rho / d tau = xi_bar0, then an exact step to the located time.
      double lo = seg.t0, hi = seg.t1();
      double ts = hi;
      for (int it = 0; it < 200; ++it) {
        ts = 0.5 * (lo + hi);
        const double r = seg.component(ts, L.rho());
        if (std::abs(r) < opts.event_tol) break;
        (r > 0 ? lo : hi) = ts;
        if (hi - lo < 1e-16 * (1.0 + std::abs(hi))) break;
      }
      const double xi_s = seg.component(ts, L.xi());
      if (xi_s < 0) ts = std::clamp(ts - seg.component(ts, L.rho()) / xi_s, seg.t0, seg.t1());
      Vec k1(L.size());
      f(seg.t0, seg.r1, k1);
      auto redo = dp.attempt(f, seg.t0, seg.r1, k1, ts - seg.t0);
      segments.push_back(redo.segment);
      b_inc.push_back(redo.x1[L.b()]);
      arrived = true;
      ctl.stop = true;
      return ctl;
    }
    if (rho1 > family.rho_max())
      throw ChartExit("trace: rho exceeded rho_max = " + std::to_string(family.rho_max()));
    if (!family.in_chart(x.segment(L.y(0), n)))
      throw ChartExit("trace: y left the affine chart bounds");

    // Hyperbolic time int dtau / rho over the step, using the logarithmic
    // mean of the end values (exact when rho is linear in tau). It is only
    // counted away from the boundary, where 1/rho is resolved.
    const double r0 = seg.r1[L.rho()];
    if (std::min(r0, rho1) >= 1e-6) {
      const double lr = std::log(r0 / rho1);
      const double inv_mean = std::abs(lr) < 1e-8 ? 2.0 / (r0 + rho1) : lr / (r0 - rho1);
      clock += std::abs(seg.h) * inv_mean;
      if (clock > opts.t_max)
        throw TrappedOrSlow("trace: hyperbolic arclength exceeded t_max = " +
                            std::to_string(opts.t_max) + " before reaching the boundary");
    }

    if (rho1 > 0.0) {
      const MetricEval m = eval_metric_unchecked(family, rho1, x.segment(L.y(0), n));
      const Vec eta = x.segment(L.eta(0), n);
      const double xi = x[L.xi()];
      const double N = std::sqrt(xi * xi + rho1 * rho1 * m.eta_normsq(eta));
      if (std::abs(N - 1.0) > 1e-14) {
        x[L.xi()] = xi / N;
        x.segment(L.eta(0), n) = eta / N;
        ctl.modified = true;
      }
    }
    segments.push_back(seg);
    b_inc.push_back(x[L.b()]);
    x[L.b()] = 0.0;  // B is tracked per step; the RHS does not depend on it
    return ctl;
  };

  // The clock bounds the work; the horizon in tau only has to be generous.
  dp.run(f, 0.0, std::move(x0), 1e12, on_step);
  if (!arrived)
    throw TrappedOrSlow("trace: integration ended before the boundary event");
  return GeodesicTrajectory(n, from_boundary, std::move(segments), std::move(b_inc));
}

}  // namespace

GeodesicTrajectory trace_geodesic(const BoundaryMetricFamily& family, const BoundaryCovector& z,
                                  const TraceOptions& opts) {
  const int n = family.dim();
  if (z.side != Side::incoming) throw InvalidArgument("trace_geodesic: z must be incoming");
  if (z.y.size() != n || z.eta.size() != n)
    throw InvalidArgument("trace_geodesic: covector has wrong dimension");
  if (!(opts.rtol > 0) || !(opts.atol > 0) || !(opts.event_tol > 0) || !(opts.t_max > 0))
    throw InvalidArgument("trace_geodesic: tolerances and t_max must be positive");
  if (!family.in_chart(z.y)) throw ChartExit("trace_geodesic: start outside the chart");
  if (z.eta.squaredNorm() == 0.0)
    throw InvalidArgument("trace_geodesic: eta = 0 is the normal geodesic, which does not return");
  const StateLayout L{n};
  Vec x = Vec::Zero(L.size());
  x.segment(L.y(0), n) = z.y;
  x[L.xi()] = 1.0;
  x.segment(L.eta(0), n) = z.eta;
  return run_trace(family, std::move(x), true, opts);
}

GeodesicTrajectory trace_from(const BoundaryMetricFamily& family, const BPhasePoint& start,
                              const TraceOptions& opts) {
  const int n = family.dim();
  if (start.y.size() != n || start.eta.size() != n)
    throw InvalidArgument("trace_from: state has wrong dimension");
  if (!(start.rho > 0)) throw InvalidArgument("trace_from: start must be interior (rho > 0)");
  const StateLayout L{n};
  Vec x = Vec::Zero(L.size());
  x[L.rho()] = start.rho;
  x.segment(L.y(0), n) = start.y;
  x[L.xi()] = start.xi_bar0;
  x.segment(L.eta(0), n) = start.eta;
  return run_trace(family, std::move(x), false, opts);
}

BoundaryCovector scattering_map(const BoundaryMetricFamily& family, const BoundaryCovector& z,
                                const TraceOptions& opts) {
  const BPhasePoint e = trace_geodesic(family, z, opts).end();
  return {family.reduce(e.y), e.eta, Side::outgoing};
}

// ---------------------------------------------------------------------------
// Short geodesics

namespace {

// Solves rho |omega|_{h_rho(y)} = target by Newton from rho = target.
double solve_rho(const BoundaryMetricFamily& family, const Vec& y, const Vec& omega,
                 double target) {
  double rho = target;
  for (int it = 0; it < 60; ++it) {
    const MetricEval m = eval_metric_unchecked(family, rho, y);
    const double q = m.eta_normsq(omega);
    const double sq = std::sqrt(q);
    const double g = rho * sq - target;
    const double dg = sq + rho * m.eta_normsq_drho(omega) / (2.0 * sq);
    if (!(dg > 0)) break;
    const double step = g / dg;
    rho -= step;
    if (std::abs(step) <= 1e-15 * (std::abs(rho) + 1e-300) || std::abs(step) < 1e-300) return rho;
  }
  throw ConvergenceFailure("short_geodesic: Newton for rho failed (delta too large?)");
}

}  // namespace

ShortGeodesicResult short_geodesic(const BoundaryMetricFamily& family, const Vec& y0,
                                   const Vec& omega0, double delta, double delta_max,
                                   double tol) {
  const int n = family.dim();
  if (y0.size() != n || omega0.size() != n)
    throw InvalidArgument("short_geodesic: wrong dimension");
  if (!(delta > 0) || !(delta < delta_max))
    throw InvalidArgument("short_geodesic: delta must lie in (0, delta_max)");
  const MetricEval m0 = eval_metric(family, 0.0, y0);
  if (std::abs(std::sqrt(m0.eta_normsq(omega0)) - 1.0) > 1e-10)
    throw InvalidArgument("short_geodesic: omega0 must be h0-unit");

  // State [theta, u (n), omega (n)].
  auto rhs = [&](double, const Vec& x, Vec& dx) {
    const double th = x[0];
    const Vec u = x.segment(1, n);
    const Vec om = x.segment(1 + n, n);
    const Vec y = y0 + delta * u;
    const double st = std::sin(th);
    const double rho = solve_rho(family, y, om, delta * st);
    const MetricEval m = eval_metric_unchecked(family, rho, y);
    const Vec sharp = m.h_inv * om;
    const double q = om.dot(sharp);
    const double qt = st / (2.0 * q * std::sqrt(q)) * m.eta_normsq_drho(om);
    dx.resize(1 + 2 * n);
    dx[0] = 1.0 + delta * qt;
    dx.segment(1, n) = st * sharp / q;
    for (int k = 0; k < n; ++k) dx[1 + n + k] = -delta * st * m.eta_normsq_dy(om, k) / (2.0 * q);
  };

  OdeOptions<double> oo;
  oo.rtol = tol;
  oo.atol = tol;
  DormandPrince<double> dp(oo);
  const DormandPrince<double>::Rhs f = rhs;

  ShortGeodesicResult res;
  res.delta = delta;
  res.omega0 = omega0;
  auto record = [&](double s, const Vec& x) {
    ShortGeodesicSample smp;
    smp.s = s;
    smp.theta = x[0];
    smp.u = x.segment(1, n);
    smp.omega = x.segment(1 + n, n);
    smp.rho = x[0] >= kPi ? 0.0 : solve_rho(family, y0 + delta * smp.u, smp.omega,
                                            delta * std::sin(x[0]));
    res.samples.push_back(std::move(smp));
  };

  Vec x0 = Vec::Zero(1 + 2 * n);
  x0.segment(1 + n, n) = omega0;
  record(0.0, x0);
  bool done = false;
  auto on_step = [&](const DenseSegment<double>& seg, Vec& x) -> StepControl {
    if (!(x[0] > seg.r1[0]))
      throw ConvergenceFailure("short_geodesic: theta is not monotone (delta beyond validity)");
    if (x[0] < kPi) {
      record(seg.t1(), x);
      return {};
    }
    double lo = seg.t0, hi = seg.t1();
    for (int it = 0; it < 200 && hi - lo > 1e-16 * (1.0 + hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      (seg.component(mid, 0) < kPi ? lo : hi) = mid;
    }
    double ss = 0.5 * (lo + hi);
    Vec k1(x.size());
    f(seg.t0, seg.r1, k1);
    auto a = dp.attempt(f, seg.t0, seg.r1, k1, ss - seg.t0);
    // One Newton correction on theta(s) = pi using d theta / ds.
    Vec d(x.size());
    f(ss, a.x1, d);
    const double corr = (kPi - a.x1[0]) / d[0];
    ss += corr;
    a = dp.attempt(f, seg.t0, seg.r1, k1, ss - seg.t0);
    x = a.x1;
    x[0] = kPi;
    res.s0 = ss;
    record(ss, x);
    done = true;
    return {true, false};
  };
  dp.run(f, 0.0, x0, 4.0 * kPi, on_step);
  if (!done) throw ConvergenceFailure("short_geodesic: theta did not reach pi");
  const ShortGeodesicSample& last = res.samples.back();
  res.u_end = last.u;
  res.omega_end = last.omega;
  res.y_end = family.reduce(y0 + delta * last.u);
  return res;
}

// ---------------------------------------------------------------------------
// Scattering Jacobian

ScatteringJacobian scattering_jacobian(const BoundaryMetricFamily& family,
                                       const BoundaryCovector& z, double step,
                                       const TraceOptions& opts) {
  const int n = family.dim();
  if (!(step > 0)) throw InvalidArgument("scattering_jacobian: step must be positive");
  ScatteringJacobian out;
  out.dS.resize(2 * n, 2 * n);
  for (int c = 0; c < 2 * n; ++c) {
    BoundaryCovector zp = z, zm = z;
    double hstep;
    if (c < n) {
      hstep = step;
      zp.y[c] += hstep;
      zm.y[c] -= hstep;
    } else {
      hstep = step * std::max(1.0, std::abs(z.eta[c - n]));
      zp.eta[c - n] += hstep;
      zm.eta[c - n] -= hstep;
    }
    const BoundaryCovector sp = scattering_map(family, zp, opts);
    const BoundaryCovector sm = scattering_map(family, zm, opts);
    out.dS.col(c).head(n) = family.difference(sp.y, sm.y) / (2 * hstep);
    out.dS.col(c).tail(n) = (sp.eta - sm.eta) / (2 * hstep);
  }
  Mat J = Mat::Zero(2 * n, 2 * n);
  J.topRightCorner(n, n) = Mat::Identity(n, n);
  J.bottomLeftCorner(n, n) = -Mat::Identity(n, n);
  out.symplectic_residual = (out.dS.transpose() * J * out.dS - J).norm();
  out.det = out.dS.determinant();
  return out;
}

}  // namespace ahx

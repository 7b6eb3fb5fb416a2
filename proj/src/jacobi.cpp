#include "ahx/jacobi.hpp"

#include "ahx/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace ahx {

namespace {

// Geodesic spray X = rho Xbar on the phase coordinates (rho, y, xi_bar0, eta).
void phase_field(const BoundaryMetricFamily& family, const Vec& x, Vec& dx) {
  const int n = family.dim();
  const double rho = x[0];
  const Vec y = x.segment(1, n);
  const double xi = x[1 + n];
  const Vec eta = x.segment(2 + n, n);
  const MetricEval m = eval_metric_unchecked(family, rho, y);
  const Vec v = m.h_inv * eta;
  dx.resize(2 * n + 2);
  dx[0] = rho * xi;
  dx.segment(1, n) = rho * rho * v;
  dx[1 + n] = -rho * (rho * eta.dot(v) + 0.5 * rho * rho * m.eta_normsq_drho(eta));
  for (int k = 0; k < n; ++k) dx[2 + n + k] = -0.5 * rho * rho * m.eta_normsq_dy(eta, k);
}

// The base geodesic is integrated with log rho in slot 0, so that rho keeps
// full relative accuracy down to 1e-17 and never changes sign.
void log_field(const BoundaryMetricFamily& family, const Vec& x, Vec& dx) {
  Vec r = x;
  r[0] = std::exp(x[0]);
  phase_field(family, r, dx);
  dx[0] = x[1 + family.dim()];
}

Vec pack(const BPhasePoint& p) {
  const int n = static_cast<int>(p.y.size());
  Vec x(2 * n + 2);
  x[0] = p.rho;
  x.segment(1, n) = p.y;
  x[1 + n] = p.xi_bar0;
  x.segment(2 + n, n) = p.eta;
  return x;
}

BPhasePoint unpack(const Vec& x, int n) {
  BPhasePoint p;
  p.rho = x[0];
  p.y = x.segment(1, n);
  p.xi_bar0 = x[1 + n];
  p.eta = x.segment(2 + n, n);
  return p;
}

const DenseSegment<double>& find_segment(const std::vector<DenseSegment<double>>& segs, double t) {
  // Segments are ordered along the direction of integration; |t - t0| grows.
  std::size_t lo = 0, hi = segs.size();
  const double dir = segs.front().h > 0 ? 1.0 : -1.0;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if ((t - segs[mid].t0) * dir >= 0)
      lo = mid;
    else
      hi = mid;
  }
  return segs[lo];
}

// Integrates the base geodesic from x0 at t = 0 to t_end, renormalizing the
// fiber variables after every step.
std::vector<DenseSegment<double>> integrate_base(const BoundaryMetricFamily& family, const Vec& x0,
                                                 double t_end, double tol) {
  const int n = family.dim();
  OdeOptions<double> o;
  o.rtol = tol;
  o.atol = tol * 1e-3;
  DormandPrince<double> dp(o);
  std::vector<DenseSegment<double>> segs;
  auto rhs = [&](double, const Vec& x, Vec& dx) { log_field(family, x, dx); };
  Vec l0 = x0;
  l0[0] = std::log(x0[0]);
  dp.run(rhs, 0.0, l0, t_end, [&](const DenseSegment<double>& seg, Vec& x) {
    segs.push_back(seg);
    const double rho = std::exp(x[0]);
    if (rho > family.rho_max())
      throw ChartExit("jacobi: base geodesic leaves the collar (rho = " + std::to_string(rho) + ")");
    if (!family.in_chart(x.segment(1, n))) throw ChartExit("jacobi: base geodesic leaves the chart");
    const MetricEval m = eval_metric_unchecked(family, rho, x.segment(1, n));
    const Vec eta = x.segment(2 + n, n);
    const double N = std::sqrt(x[1 + n] * x[1 + n] + rho * rho * m.eta_normsq(eta));
    StepControl ctl;
    if (std::abs(N - 1.0) > 1e-14) {
      x.segment(1 + n, n + 1) /= N;
      ctl.modified = true;
    }
    return ctl;
  });
  return segs;
}

Eigen::Vector2d jacobi_rhs(const JacobiSystem& s, double t, const Eigen::Vector2d& x) {
  return {x[1], -s.curvature(t) * x[0]};
}

}  // namespace

// ---------------------------------------------------------------------------

JacobiSystem::JacobiSystem(BoundaryMetricFamily family, const BPhasePoint& p, double t_range,
                           double tol)
    : family_(std::move(family)) {
  if (!(p.rho > 0)) throw InvalidArgument("JacobiSystem: reference point must be interior");
  if (!(t_range > 0)) throw InvalidArgument("JacobiSystem: t_range must be positive");
  const Vec x0 = pack(p);
  forward_ = integrate_base(family_, x0, t_range, tol);
  backward_ = integrate_base(family_, x0, -t_range, tol);
  t_max_ = forward_.back().t1();
  t_min_ = backward_.back().t1();
}

JacobiSystem JacobiSystem::from_boundary(const BoundaryMetricFamily& family,
                                         const BoundaryCovector& z, double t_range, double tol) {
  const GeodesicTrajectory traj = trace_geodesic(family, z);
  return JacobiSystem(family, traj.at(traj.tau_peak()), t_range, tol);
}

Vec JacobiSystem::state(double t) const {
  if (t < t_min_ || t > t_max_)
    throw InvalidArgument("JacobiSystem: t = " + std::to_string(t) + " outside the traced range");
  Vec x = t >= 0 ? find_segment(forward_, t)(t) : find_segment(backward_, t)(t);
  x[0] = std::exp(x[0]);
  return x;
}

BPhasePoint JacobiSystem::base(double t) const { return unpack(state(t), dim()); }

Vec JacobiSystem::velocity(double t) const {
  Vec dx;
  phase_field(family_, state(t), dx);
  return dx.head(dim() + 1);
}

double JacobiSystem::curvature(double t) const {
  if (dim() != 1) throw InvalidArgument("JacobiSystem::curvature: n = 1 only");
  const Vec x = state(t);
  return gauss_curvature(family_, x[0], x.segment(1, 1));
}

void JacobiSystem::require_range(double a, double b) const {
  if (std::min(a, b) < t_min_ || std::max(a, b) > t_max_)
    throw InvalidArgument("jacobi: span [" + std::to_string(std::min(a, b)) + ", " +
                          std::to_string(std::max(a, b)) + "] exceeds the traced range [" +
                          std::to_string(t_min_) + ", " + std::to_string(t_max_) + "]");
}

// ---------------------------------------------------------------------------

Eigen::Vector2d JacobiSolution::at(double t) const {
  const double lo = std::min(t0, t1), hi = std::max(t0, t1);
  if (t < lo - 1e-12 || t > hi + 1e-12)
    throw InvalidArgument("JacobiSolution: t outside the solved span");
  const Vec x = find_segment(segments, t)(t);
  return {x[0], x[1]};
}

std::vector<double> JacobiSolution::knots() const {
  std::vector<double> k{t0};
  for (const auto& s : segments) k.push_back(s.t1());
  return k;
}

JacobiSolution jacobi_solve(const JacobiSystem& system, double y0, double ydot0,
                            std::pair<double, double> t_span, double tol) {
  if (system.dim() != 1) throw InvalidArgument("jacobi_solve: scalar Jacobi equation needs n = 1");
  system.require_range(t_span.first, t_span.second);
  JacobiSolution sol;
  sol.t0 = t_span.first;
  sol.t1 = t_span.second;
  if (t_span.first == t_span.second) {
    DenseSegment<double> s;
    s.t0 = t_span.first;
    s.h = 1.0;
    s.r1 = Vec(2);
    s.r1 << y0, ydot0;
    s.r2 = s.r3 = s.r4 = s.r5 = Vec::Zero(2);
    sol.segments.push_back(s);
    return sol;
  }
  OdeOptions<double> o;
  o.rtol = tol;
  o.atol = tol * 1e-3 * std::max(1e-300, std::hypot(y0, ydot0));
  DormandPrince<double> dp(o);
  Vec x0(2);
  x0 << y0, ydot0;
  auto rhs = [&](double t, const Vec& x, Vec& dx) {
    dx = jacobi_rhs(system, t, Eigen::Vector2d(x[0], x[1]));
  };
  dp.run(rhs, t_span.first, x0, t_span.second, [&](const DenseSegment<double>& seg, Vec&) {
    sol.segments.push_back(seg);
    return StepControl{};
  });
  return sol;
}

Mat linearized_flow(const JacobiSystem& system, const Mat& V0, std::pair<double, double> t_span,
                    double tol) {
  const int d = 2 * system.dim() + 2;
  if (V0.rows() != d) throw InvalidArgument("linearized_flow: V0 must have 2n + 2 rows");
  system.require_range(t_span.first, t_span.second);
  if (t_span.first == t_span.second) return V0;
  const int k = static_cast<int>(V0.cols());
  const BoundaryMetricFamily& fam = system.family();

  auto rhs = [&](double t, const Vec& v, Vec& dv) {
    const BPhasePoint p = system.base(t);
    const Vec x = pack(p);
    Mat DF(d, d);
    Vec fp, fm;
    for (int j = 0; j < d; ++j) {
      const double h = 1e-7 * std::max(1.0, std::abs(x[j]));
      Vec xp = x, xm = x;
      xp[j] += h;
      xm[j] -= h;
      phase_field(fam, xp, fp);
      phase_field(fam, xm, fm);
      DF.col(j) = (fp - fm) / (2 * h);
    }
    dv.resize(v.size());
    for (int c = 0; c < k; ++c) dv.segment(c * d, d) = DF * v.segment(c * d, d);
  };
  OdeOptions<double> o;
  o.rtol = tol;
  o.atol = tol * 1e-3 * std::max(1e-300, V0.norm());
  DormandPrince<double> dp(o);
  Vec v(d * k);
  for (int c = 0; c < k; ++c) v.segment(c * d, d) = V0.col(c);
  Vec last = v;
  dp.run(rhs, t_span.first, v, t_span.second, [&](const DenseSegment<double>&, Vec& x) {
    last = x;
    return StepControl{};
  });
  Mat out(d, k);
  for (int c = 0; c < k; ++c) out.col(c) = last.segment(c * d, d);
  return out;
}

Mat vertical_basis(const BoundaryMetricFamily& family, const BPhasePoint& p) {
  const int n = family.dim();
  const MetricEval m = eval_metric_unchecked(family, p.rho, p.y);
  // Constraint gradient in (xi_bar0, eta).
  Vec c(n + 1);
  c[0] = p.xi_bar0;
  c.tail(n) = p.rho * p.rho * (m.h_inv * p.eta);
  // Orthonormal complement of c in R^{n+1}.
  Eigen::HouseholderQR<Mat> qr(c);
  const Mat Q = qr.householderQ() * Mat::Identity(n + 1, n + 1);
  Mat V = Mat::Zero(2 * n + 2, n);
  V.bottomRows(n + 1) = Q.rightCols(n);
  return V;
}

// ---------------------------------------------------------------------------

std::vector<double> conjugate_points(const JacobiSystem& system, double t_max) {
  if (system.dim() != 1) return conjugate_points_linearized(system, t_max);
  if (!(t_max > 0)) throw InvalidArgument("conjugate_points: t_max must be positive");
  const JacobiSolution sol = jacobi_solve(system, 0.0, 1.0, {0.0, t_max});
  std::vector<double> out;
  for (const auto& seg : sol.segments) {
    // Skip the start, where y vanishes by construction.
    const double a = std::max(seg.t0, 1e-9), b = seg.t1();
    if (b <= a) continue;
    double ya = seg.component(a, 0), yb = seg.component(b, 0);
    if (ya == 0.0 || (ya > 0) == (yb > 0)) continue;
    double lo = a, hi = b;
    for (int it = 0; it < 100 && hi - lo > 1e-14 * std::max(1.0, hi); ++it) {
      const double mid = 0.5 * (lo + hi);
      const double ym = seg.component(mid, 0);
      if ((ym > 0) == (ya > 0)) {
        lo = mid;
        ya = ym;
      } else {
        hi = mid;
      }
    }
    out.push_back(0.5 * (lo + hi));
  }
  return out;
}

std::vector<double> conjugate_points_linearized(const JacobiSystem& system, double t_max,
                                                int samples_per_unit) {
  if (!(t_max > 0)) throw InvalidArgument("conjugate_points: t_max must be positive");
  system.require_range(0.0, t_max);
  const int n = system.dim();
  auto det_at = [&](double t, const Mat& V) {
    Mat M(n + 1, n + 1);
    M.leftCols(n) = V.topRows(n + 1);
    M.col(n) = system.velocity(t);
    return M.determinant();
  };
  const int steps = std::max(1, static_cast<int>(std::ceil(t_max * samples_per_unit)));
  const double dt = t_max / steps;
  std::vector<double> out;
  Mat V = vertical_basis(system.family(), system.base(0.0));
  // Start slightly off t = 0, where the determinant vanishes to order n.
  double t = 0.25 * dt;
  V = linearized_flow(system, V, {0.0, t});
  double d = det_at(t, V);
  while (t < t_max) {
    const double tn = std::min(t_max, t + dt);
    const Mat Vn = linearized_flow(system, V, {t, tn});
    const double dn = det_at(tn, Vn);
    if (d != 0.0 && (d > 0) != (dn > 0)) {
      double lo = t, hi = tn;
      Mat Vlo = V;
      double dlo = d;
      for (int it = 0; it < 60 && hi - lo > 1e-12; ++it) {
        const double mid = 0.5 * (lo + hi);
        const Mat Vm = linearized_flow(system, Vlo, {lo, mid});
        const double dm = det_at(mid, Vm);
        if ((dm > 0) == (dlo > 0)) {
          lo = mid;
          Vlo = Vm;
          dlo = dm;
        } else {
          hi = mid;
        }
      }
      out.push_back(0.5 * (lo + hi));
    }
    t = tn;
    V = Vn;
    d = dn;
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double smallest_principal_angle_deg(const Mat& A, const Mat& B) {
  const Mat Qa = Eigen::HouseholderQR<Mat>(A).householderQ() * Mat::Identity(A.rows(), A.cols());
  const Mat Qb = Eigen::HouseholderQR<Mat>(B).householderQ() * Mat::Identity(B.rows(), B.cols());
  const Vec s = Eigen::JacobiSVD<Mat>(Qa.transpose() * Qb).singularValues();
  const double c = std::min(1.0, s.maxCoeff());
  return std::acos(c) * 180.0 / kPi;
}

void check_asymptotic(const JacobiSystem& system, double T, double tol) {
  for (double t : {T, -T}) {
    const double r = std::abs(system.curvature(t) + 1.0);
    if (r > tol)
      throw InvalidArgument("stable_unstable: |R(" + std::to_string(t) + ") + 1| = " +
                            std::to_string(r) + " exceeds the asymptotic tolerance; increase T_asym");
  }
}

}  // namespace

BundleFrame stable_unstable(const JacobiSystem& system, double T_asym, double curvature_tol) {
  if (!(T_asym > 0)) throw InvalidArgument("stable_unstable: T_asym must be positive");
  system.require_range(-T_asym, T_asym);
  BundleFrame f;
  f.z = system.base(0.0);
  const int n = system.dim();
  if (n == 1) {
    check_asymptotic(system, T_asym, curvature_tol);
    // The e^{-T} prefactor of the asymptotic data cancels in the normalization.
    const Eigen::Vector2d s = jacobi_solve(system, 1.0, -1.0, {T_asym, 0.0}).at(0.0);
    const Eigen::Vector2d u = jacobi_solve(system, 1.0, 1.0, {-T_asym, 0.0}).at(0.0);
    f.stable = s.normalized();
    f.unstable = u.normalized();
    Eigen::Matrix2d M;
    M << f.stable.col(0), f.unstable.col(0);
    f.det = std::abs(M.determinant());
    f.transversality_deg = smallest_principal_angle_deg(f.stable, f.unstable);
    return f;
  }
  const Mat Vs = linearized_flow(system, vertical_basis(system.family(), system.base(T_asym)),
                                 {T_asym, 0.0});
  const Mat Vu = linearized_flow(system, vertical_basis(system.family(), system.base(-T_asym)),
                                 {-T_asym, 0.0});
  auto orth = [](const Mat& V) {
    return Mat(Eigen::HouseholderQR<Mat>(V).householderQ() * Mat::Identity(V.rows(), V.cols()));
  };
  f.stable = orth(Vs);
  f.unstable = orth(Vu);
  const Vec s = Eigen::JacobiSVD<Mat>(f.stable.transpose() * f.unstable).singularValues();
  f.det = 1.0;
  for (int i = 0; i < s.size(); ++i) f.det *= std::sqrt(std::max(0.0, 1.0 - s[i] * s[i]));
  f.transversality_deg = smallest_principal_angle_deg(f.stable, f.unstable);
  return f;
}

DecayReport stable_decay(const JacobiSystem& system, double nu, double t_fit_lo, double t_end,
                         double T_asym) {
  if (system.dim() != 1) throw InvalidArgument("stable_decay: n = 1 only");
  if (!(t_end > t_fit_lo && t_fit_lo >= 0 && T_asym >= t_end))
    throw InvalidArgument("stable_decay: need 0 <= t_fit_lo < t_end <= T_asym");
  system.require_range(-T_asym, T_asym);
  const JacobiSolution sol = jacobi_solve(system, 1.0, -1.0, {T_asym, 0.0});
  const int m = 200;
  std::vector<double> ts(m + 1), norms(m + 1);
  for (int i = 0; i <= m; ++i) {
    ts[i] = t_end * i / m;
    const Eigen::Vector2d x = sol.at(ts[i]);
    norms[i] = std::abs(x[0]) + std::abs(x[1]);
  }
  DecayReport r;
  r.nu = nu;
  // Least-squares slope of log |x| on [t_fit_lo, t_end].
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (int i = 0; i <= m; ++i) {
    if (ts[i] < t_fit_lo) continue;
    const double lx = std::log(norms[i]);
    sx += ts[i];
    sy += lx;
    sxx += ts[i] * ts[i];
    sxy += ts[i] * lx;
    ++cnt;
  }
  r.nu_fit = -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  // Certificate constant: the worst growth relative to e^{-nu (t - s)}.
  for (int i = 0; i <= m; ++i)
    for (int j = i; j <= m; ++j)
      r.C_cert = std::max(r.C_cert, norms[j] / norms[i] * std::exp(nu * (ts[j] - ts[i])));
  const int mk = 400;
  for (int i = 0; i <= mk; ++i) {
    const double t = system.t_min() + (system.t_max() - system.t_min()) * i / mk;
    r.curvature_C = std::max(r.curvature_C, std::abs(system.curvature(t) + 1.0) * std::exp(std::abs(t)));
  }
  return r;
}

ApproachReport boundary_approach(const JacobiSystem& system, double epsilon, int samples) {
  if (!(epsilon > 0) || samples < 2) throw InvalidArgument("boundary_approach: bad parameters");
  ApproachReport r;
  // Locate the entry into the outgoing collar on a fine scan.
  const double dt = 1e-2;
  double t = 0.0;
  for (;; t += dt) {
    if (t > system.t_max()) throw InvalidArgument("boundary_approach: collar not reached");
    const BPhasePoint p = system.base(t);
    if (p.xi_bar0 <= 0 && p.rho <= epsilon) break;
  }
  r.t_collar = t;
  // f(t) = rho(t) e^{t} is nondecreasing exactly when rho'/rho + 1 >= 0.
  double f_min = kInf, worst_drop = 1.0;
  for (int i = 0; i <= samples; ++i) {
    const double ti = r.t_collar + (system.t_max() - r.t_collar) * i / samples;
    const double f = system.base(ti).rho * std::exp(ti - r.t_collar);
    if (i > 0) {
      r.C = std::max(r.C, f / f_min);
      worst_drop = std::min(worst_drop, f / f_min);
    }
    f_min = std::min(f_min, f);
  }
  r.lower_ok = worst_drop >= 1.0 - 1e-9;
  return r;
}

SimplicityReport simplicity_check(const BoundaryMetricFamily& family,
                                  const std::vector<BoundaryCovector>& grid, double T_asym,
                                  double t_conj, int jobs) {
  struct Row {
    double angle = 90.0, det = 1.0;
    int conj = 0;
    bool ok = false;
  };
  std::vector<Row> rows(grid.size());
  parallel_for(static_cast<long>(grid.size()), [&](long i) {
    try {
      const JacobiSystem sys = JacobiSystem::from_boundary(family, grid[i],
                                                           std::max(40.0, T_asym + 5.0));
      const BundleFrame f = stable_unstable(sys, T_asym);
      rows[i].angle = f.transversality_deg;
      rows[i].det = f.det;
      rows[i].conj = static_cast<int>(conjugate_points(sys, t_conj).size());
      rows[i].ok = true;
    } catch (const Error&) {
      rows[i].ok = false;
    }
  }, jobs);
  SimplicityReport rep;
  for (const Row& r : rows) {
    if (!r.ok) {
      ++rep.failures;
      continue;
    }
    ++rep.geodesics;
    rep.min_angle_deg = std::min(rep.min_angle_deg, r.angle);
    rep.min_det = std::min(rep.min_det, r.det);
    rep.conjugate_count += r.conj;
  }
  return rep;
}

}  // namespace ahx

#include "ahx/xray.hpp"

#include "ahx/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace ahx {

QuadResult integrate_along(const GeodesicTrajectory& traj, const std::function<double(double)>& g,
                           double abs_tol, double rel_tol) {
  QuadResult total;
  for (const auto& seg : traj.segments()) {
    const QuadResult r = integrate_gk15(g, seg.t0, seg.t1(), abs_tol, rel_tol);
    total.value += r.value;
    total.error += r.error;
    total.evaluations += r.evaluations;
  }
  return total;
}

double xray_transform(const BoundaryMetricFamily& family, const SymmetricTensorField& f,
                      const GeodesicTrajectory& traj) {
  if (!f.admissible())
    throw InvalidArgument("xray_transform: weight " + std::to_string(f.weight()) +
                          " is not admissible for rank " + std::to_string(f.rank()));
  return integrate_along(traj, [&](double tau) {
           const BPhasePoint p = traj.at(tau);
           return lift_tensor(family, f, p) / p.rho;
         }).value;
}

double xray_transform(const BoundaryMetricFamily& family, const SymmetricTensorField& f,
                      const BoundaryCovector& z, const TraceOptions& opts) {
  if (!f.admissible())
    throw InvalidArgument("xray_transform: weight " + std::to_string(f.weight()) +
                          " is not admissible for rank " + std::to_string(f.rank()));
  return xray_transform(family, f, trace_geodesic(family, z, opts));
}

double xray_phase(const GeodesicTrajectory& traj, const PhaseFunction& F) {
  return integrate_along(traj, [&](double tau) {
           const BPhasePoint p = traj.at(tau);
           return F(p) / p.rho;
         }).value;
}

BoundaryCovector incoming_endpoint(const BoundaryMetricFamily& family, const BPhasePoint& p,
                                   const TraceOptions& opts) {
  // The backward orbit of p is the forward orbit of its time reversal.
  const BPhasePoint e = trace_from(family, reversed(p), opts).end();
  return {family.reduce(e.y), -e.eta, Side::incoming};
}

double resolvent_zero(const BoundaryMetricFamily& family, const PhaseFunction& F,
                      const BPhasePoint& z, int sign, const TraceOptions& opts) {
  if (sign != 1 && sign != -1) throw InvalidArgument("resolvent_zero: sign must be +1 or -1");
  if (sign == 1) {
    const GeodesicTrajectory traj = trace_from(family, z, opts);
    const double f_end = F(traj.end());
    return integrate_along(traj, [&](double tau) {
             const BPhasePoint p = traj.at(tau);
             return (F(p) - f_end) / p.rho;
           }).value;
  }
  const GeodesicTrajectory back = trace_from(family, reversed(z), opts);
  const double f_start = F(reversed(back.end()));
  return integrate_along(back, [&](double tau) {
           const BPhasePoint p = back.at(tau);
           return (f_start - F(reversed(p))) / p.rho;
         }).value;
}

// ---------------------------------------------------------------------------
// Quadrature measures

namespace {

struct Rule1D {
  std::vector<double> x, w;
  std::vector<bool> edge;
};

Rule1D rule_1d(Box b, int panels, int p) {
  const GaussRule r = composite_gauss(b.lo, b.hi, panels, p);
  Rule1D out{r.nodes, r.weights, std::vector<bool>(r.nodes.size(), false)};
  // Only the outermost nodes: they sit within a few percent of a panel
  // width of the window boundary.
  (void)p;
  const auto [lo, hi] = std::minmax_element(out.x.begin(), out.x.end());
  out.edge[lo - out.x.begin()] = true;
  out.edge[hi - out.x.begin()] = true;
  return out;
}

}  // namespace

QuadratureMeasure boundary_measure(Box y, Box eta, int panels_y, int panels_eta, int p) {
  const Rule1D ry = rule_1d(y, panels_y, p), re = rule_1d(eta, panels_eta, p);
  QuadratureMeasure m;
  for (std::size_t i = 0; i < ry.x.size(); ++i)
    for (std::size_t j = 0; j < re.x.size(); ++j) {
      Vec v(2);
      v << ry.x[i], re.x[j];
      m.nodes.push_back(v);
      m.weights.push_back(ry.w[i] * re.w[j]);
      m.edge.push_back(ry.edge[i] || re.edge[j]);
    }
  return m;
}

QuadratureMeasure phase_window_measure(const BoundaryMetricFamily& family, Box rho, Box y,
                                       Box angle, int panels, int p) {
  if (family.dim() != 1) throw InvalidArgument("phase_window_measure: n = 1 only");
  if (!(rho.lo > 0)) throw InvalidArgument("phase_window_measure: window must avoid rho = 0");
  const Rule1D rr = rule_1d(rho, panels, p), ry = rule_1d(y, panels, p),
               ra = rule_1d(angle, panels, p);
  QuadratureMeasure m;
  for (std::size_t i = 0; i < rr.x.size(); ++i)
    for (std::size_t j = 0; j < ry.x.size(); ++j) {
      const double r = rr.x[i];
      const double dens = std::sqrt(family.h(r, Vec::Constant(1, ry.x[j]))(0, 0)) / (r * r);
      for (std::size_t k = 0; k < ra.x.size(); ++k) {
        Vec v(3);
        v << r, ry.x[j], ra.x[k];
        m.nodes.push_back(v);
        m.weights.push_back(rr.w[i] * ry.w[j] * ra.w[k] * dens);
        m.edge.push_back(rr.edge[i] || ry.edge[j] || ra.edge[k]);
      }
    }
  return m;
}

BPhasePoint phase_point_from_angle(const BoundaryMetricFamily& family, double rho, double y,
                                   double angle) {
  BPhasePoint p;
  p.rho = rho;
  p.y = Vec::Constant(1, y);
  p.xi_bar0 = std::cos(angle);
  p.eta = Vec::Constant(1, std::sin(angle) * std::sqrt(family.h(rho, p.y)(0, 0)) / rho);
  return p;
}

double fiber_angle(const BoundaryMetricFamily& family, const BPhasePoint& p) {
  const double s = p.rho * p.eta[0] / std::sqrt(family.h(p.rho, p.y)(0, 0));
  return std::atan2(s, p.xi_bar0);
}

// ---------------------------------------------------------------------------
// Santalo and adjointness

namespace {

BPhasePoint node_point(const BoundaryMetricFamily& family, const Vec& node) {
  return phase_point_from_angle(family, node[0], node[1], node[2]);
}

double edge_leakage(const std::vector<double>& contrib, const std::vector<bool>& edge,
                    double total) {
  double worst = 0.0;
  for (std::size_t i = 0; i < contrib.size(); ++i)
    if (edge[i]) worst = std::max(worst, std::abs(contrib[i]));
  return worst / std::max(std::abs(total), 1e-300);
}

double ordered_sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

SantaloResult santalo_check(const BoundaryMetricFamily& family, const PhaseFunction& F,
                            const QuadratureMeasure& interior, const QuadratureMeasure& boundary,
                            const TraceOptions& opts, double leak_tol) {
  SantaloResult res;
  std::vector<double> lhs_c(interior.nodes.size());
  for (std::size_t i = 0; i < interior.nodes.size(); ++i)
    lhs_c[i] = interior.weights[i] * F(node_point(family, interior.nodes[i]));
  res.lhs = ordered_sum(lhs_c);

  std::vector<double> rhs_c(boundary.nodes.size(), 0.0);
  parallel_for(static_cast<long>(boundary.nodes.size()), [&](long i) {
    const Vec& nd = boundary.nodes[i];
    const BoundaryCovector z{nd.head(1), nd.tail(1), Side::incoming};
    rhs_c[i] = boundary.weights[i] * xray_phase(trace_geodesic(family, z, opts), F);
  });
  res.traced = static_cast<int>(boundary.nodes.size());
  res.rhs = ordered_sum(rhs_c);
  res.leakage = std::max(edge_leakage(lhs_c, interior.edge, res.lhs),
                         edge_leakage(rhs_c, boundary.edge, res.rhs));
  if (res.leakage > leak_tol)
    throw InvalidArgument("santalo_check: support leaks to the quadrature window edge (" +
                          std::to_string(res.leakage) + ")");
  return res;
}

AdjointResult adjointness_check(const BoundaryMetricFamily& family, const PhaseFunction& F,
                                const std::function<double(const Vec&, const Vec&)>& omega,
                                const QuadratureMeasure& interior,
                                const QuadratureMeasure& boundary, const TraceOptions& opts,
                                double leak_tol) {
  AdjointResult res;
  // Boundary side: only nodes where omega is not negligible need a trace.
  std::vector<double> om(boundary.nodes.size());
  double om_max = 0.0;
  for (std::size_t i = 0; i < boundary.nodes.size(); ++i) {
    om[i] = omega(boundary.nodes[i].head(1), boundary.nodes[i].tail(1));
    om_max = std::max(om_max, std::abs(om[i]));
  }
  std::vector<double> b_c(boundary.nodes.size(), 0.0);
  std::atomic<int> traced{0};
  parallel_for(static_cast<long>(boundary.nodes.size()), [&](long i) {
    if (std::abs(om[i]) <= 1e-16 * om_max) return;
    const Vec& nd = boundary.nodes[i];
    const BoundaryCovector z{nd.head(1), nd.tail(1), Side::incoming};
    b_c[i] = boundary.weights[i] * om[i] * xray_phase(trace_geodesic(family, z, opts), F);
    ++traced;
  });
  res.boundary_side = ordered_sum(b_c);

  // Interior side: omega o B_- needs a backward trace where F is not negligible.
  std::vector<double> fv(interior.nodes.size());
  double f_max = 0.0;
  for (std::size_t i = 0; i < interior.nodes.size(); ++i) {
    fv[i] = F(node_point(family, interior.nodes[i]));
    f_max = std::max(f_max, std::abs(fv[i]));
  }
  std::vector<double> i_c(interior.nodes.size(), 0.0);
  parallel_for(static_cast<long>(interior.nodes.size()), [&](long i) {
    if (std::abs(fv[i]) <= 1e-16 * f_max) return;
    const BoundaryCovector zin = incoming_endpoint(family, node_point(family, interior.nodes[i]), opts);
    // Express the incoming y in the same branch as the boundary window.
    Vec y = zin.y;
    if (family.all_periodic()) y[0] = boundary.nodes[0][0] + reduce_angle(y[0] - boundary.nodes[0][0]);
    i_c[i] = interior.weights[i] * fv[i] * omega(y, zin.eta);
    ++traced;
  });
  res.interior_side = ordered_sum(i_c);
  res.traced = traced.load();
  res.leakage = std::max(edge_leakage(b_c, boundary.edge, res.boundary_side),
                         edge_leakage(i_c, interior.edge, res.interior_side));
  if (res.leakage > leak_tol)
    throw InvalidArgument("adjointness_check: support leaks to the quadrature window edge (" +
                          std::to_string(res.leakage) + ")");
  return res;
}

std::pair<Box, Box> incoming_window(const BoundaryMetricFamily& family,
                                    const std::vector<BPhasePoint>& points, double y_ref,
                                    double margin, const TraceOptions& opts) {
  Box by{kInf, -kInf}, be{kInf, -kInf};
  for (const BPhasePoint& p : points) {
    const BoundaryCovector z = incoming_endpoint(family, p, opts);
    const double dy = family.all_periodic() ? wrap_angle(z.y[0] - y_ref) : z.y[0] - y_ref;
    by = {std::min(by.lo, dy), std::max(by.hi, dy)};
    be = {std::min(be.lo, z.eta[0]), std::max(be.hi, z.eta[0])};
  }
  const double wy = (by.hi - by.lo) * margin, we = (be.hi - be.lo) * margin;
  return {Box{y_ref + by.lo - wy, y_ref + by.hi + wy}, Box{be.lo - we, be.hi + we}};
}

}  // namespace ahx

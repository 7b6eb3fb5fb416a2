#include "ahx/jacobi.hpp"
#include "ahx/xray.hpp"

#include <doctest.h>

#include <cmath>

using namespace ahx;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

BoundaryMetricFamily pert() { return perturbed(TrigPoly{{0.0, 0.1}, {}}, TrigPoly{{0.05}, {}}); }

// Signed normal component of a coordinate displacement d at a point with
// velocity v, in the metric (d rho^2 + h dy^2) / rho^2 (any positive scale).
double normal_component(const Vec& d, const Vec& v, double h) {
  return std::sqrt(h) * (d[1] * v[0] - d[0] * v[1]);
}

}  // namespace

TEST_CASE("constant curvature Jacobi fields") {
  const JacobiSystem s = JacobiSystem::from_boundary(half_plane(), {v1(0.0), v1(1.0)});
  const JacobiSolution a = jacobi_solve(s, 0.0, 1.0, {0.0, 5.0});
  CHECK(std::abs(a.at(5.0)[0] / std::sinh(5.0) - 1.0) < 1e-9);
  CHECK(std::abs(a.at(2.5)[1] / std::cosh(2.5) - 1.0) < 1e-9);
  const JacobiSolution b = jacobi_solve(s, 1.0, -1.0, {0.0, 10.0});
  CHECK(std::abs(b.at(10.0)[0] / std::exp(-10.0) - 1.0) < 1e-8);
  // Backward direction.
  const JacobiSolution c = jacobi_solve(s, 1.0, 1.0, {0.0, -8.0});
  CHECK(std::abs(c.at(-8.0)[0] / std::exp(-8.0) - 1.0) < 1e-8);
  CHECK_THROWS_AS(jacobi_solve(s, 0.0, 1.0, {0.0, 100.0}), InvalidArgument);
  CHECK(std::abs(s.curvature(3.0) + 1.0) < 1e-9);
}

TEST_CASE("Wronskian is conserved") {
  const JacobiSystem s = JacobiSystem::from_boundary(pert(), {v1(0.3), v1(0.9)});
  const JacobiSolution a = jacobi_solve(s, 0.0, 1.0, {-6.0, 6.0});
  const JacobiSolution b = jacobi_solve(s, 1.0, 0.3, {-6.0, 6.0});
  auto W = [&](double t) {
    const auto x = a.at(t), y = b.at(t);
    return x[0] * y[1] - x[1] * y[0];
  };
  // Relative to the size of the fields, which grow like e^{|t|}.
  auto scale = [&](double t) { return a.at(t).norm() * b.at(t).norm(); };
  const double w0 = W(-6.0);
  for (double t : {-3.0, 0.0, 2.0, 6.0}) CHECK(std::abs(W(t) - w0) < 1e-9 * std::max(scale(t), scale(-6.0)));
}

TEST_CASE("variational consistency with neighbouring geodesics") {
  const auto p = pert();
  const JacobiSystem s = JacobiSystem::from_boundary(p, {v1(0.3), v1(0.7)});
  const BPhasePoint p0 = s.base(0.0);
  const double ang = fiber_angle(p, p0), eps = 1e-6;
  const JacobiSystem a(p, phase_point_from_angle(p, p0.rho, p0.y[0], ang + eps), 10.0);
  const JacobiSystem b(p, phase_point_from_angle(p, p0.rho, p0.y[0], ang - eps), 10.0);
  const JacobiSolution j = jacobi_solve(s, 0.0, 1.0, {0.0, 3.0});
  for (double t : {1.0, 2.0, 3.0}) {
    const BPhasePoint pa = a.base(t), pb = b.base(t), pm = s.base(t);
    Vec d(2);
    d << pa.rho - pb.rho, pa.y[0] - pb.y[0];
    const double h = p.h(pm.rho, pm.y)(0, 0);
    const double brute = std::sqrt(d[0] * d[0] + h * d[1] * d[1]) / pm.rho / (2 * eps);
    CHECK(std::abs(brute - std::abs(j.at(t)[0])) < 1e-5 * std::max(1.0, brute));
  }
}

TEST_CASE("stable and unstable bundles on the half-plane") {
  const JacobiSystem s = JacobiSystem::from_boundary(half_plane(), {v1(0.0), v1(1.0)});
  const BundleFrame f = stable_unstable(s);
  const double r = 1.0 / std::sqrt(2.0);
  CHECK(std::abs(std::abs(f.stable(0, 0)) - r) < 1e-9);
  CHECK(std::abs(f.stable(0, 0) + f.stable(1, 0)) < 1e-9);
  CHECK(std::abs(f.unstable(0, 0) - f.unstable(1, 0)) < 1e-9);
  CHECK(std::abs(f.transversality_deg - 90.0) < 1e-6);
  CHECK(std::abs(f.det - 1.0) < 1e-9);
  const BundleFrame g = stable_unstable(s, 30.0);
  CHECK((f.stable - g.stable).norm() < 1e-8);
}

TEST_CASE("asymptotic data needs a large enough T") {
  const JacobiSystem s = JacobiSystem::from_boundary(pert(), {v1(0.3), v1(1.4)});
  CHECK_THROWS_AS(stable_unstable(s, 3.0), InvalidArgument);
  const BundleFrame a = stable_unstable(s, 25.0), b = stable_unstable(s, 30.0);
  CHECK((a.stable - b.stable).norm() < 1e-8);
  CHECK((a.unstable - b.unstable).norm() < 1e-8);
  CHECK(a.transversality_deg > 45.0);
}

TEST_CASE("hyperbolicity constants") {
  const JacobiSystem h = JacobiSystem::from_boundary(half_plane(), {v1(0.0), v1(1.0)});
  const DecayReport d = stable_decay(h);
  CHECK(std::abs(d.nu_fit - 1.0) < 1e-3);
  CHECK(d.C_cert <= 2.0);

  const JacobiSystem p = JacobiSystem::from_boundary(pert(), {v1(0.3), v1(0.7)});
  const DecayReport q = stable_decay(p);
  CHECK(std::abs(q.nu_fit - 1.0) < 1e-2);
  CHECK(q.C_cert <= 2.0);
  CHECK(std::isfinite(q.curvature_C));

  for (const JacobiSystem* s : {&h, &p}) {
    const ApproachReport a = boundary_approach(*s);
    CHECK(a.lower_ok);
    CHECK(a.C <= 1.5);
  }
}

TEST_CASE("conjugate points") {
  const JacobiSystem h = JacobiSystem::from_boundary(half_plane(), {v1(0.0), v1(1.0)});
  CHECK(conjugate_points(h, 30.0).empty());
  CHECK(conjugate_points_linearized(h, 30.0).empty());
  const JacobiSystem d = JacobiSystem::from_boundary(disc_normal(), {v1(0.3), v1(0.7)});
  CHECK(conjugate_points(d, 30.0).empty());

  // A band of positive curvature focuses geodesics. Start half a unit before
  // the geodesic enters the region K > 0.
  const auto pos = perturbed(TrigPoly{{6.0}, {}}, TrigPoly{{-6.0}, {}});
  const JacobiSystem base = JacobiSystem::from_boundary(pos, {v1(0.0), v1(6.0)});
  double t_in = base.t_min() + 1.0;
  while (base.curvature(t_in) <= 0.0 && t_in < 0.0) t_in += 0.01;
  REQUIRE(base.curvature(t_in) > 0.0);
  const BPhasePoint p0 = base.base(t_in - 0.5);
  const JacobiSystem s(pos, p0, 20.0);
  const std::vector<double> c = conjugate_points(s, 10.0);
  REQUIRE_FALSE(c.empty());
  const std::vector<double> cl = conjugate_points_linearized(s, 10.0);
  REQUIRE_FALSE(cl.empty());
  CHECK(std::abs(c[0] - cl[0]) < 1e-4);

  // Brute force: two geodesics through p0 with nearby directions cross again
  // at the conjugate time.
  const double ang = fiber_angle(pos, p0), eps = 1e-6;
  const JacobiSystem a(pos, phase_point_from_angle(pos, p0.rho, p0.y[0], ang + eps), 20.0);
  const JacobiSystem b(pos, phase_point_from_angle(pos, p0.rho, p0.y[0], ang - eps), 20.0);
  auto sep = [&](double t) {
    const BPhasePoint pa = a.base(t), pb = b.base(t), pm = s.base(t);
    Vec dd(2);
    dd << pa.rho - pb.rho, pa.y[0] - pb.y[0];
    return normal_component(dd, s.velocity(t), pos.h(pm.rho, pm.y)(0, 0));
  };
  double lo = c[0] - 0.2, hi = c[0] + 0.2;
  REQUIRE(sep(lo) * sep(hi) < 0.0);
  for (int i = 0; i < 60; ++i) {
    const double m = 0.5 * (lo + hi);
    (sep(lo) * sep(m) <= 0.0 ? hi : lo) = m;
  }
  CHECK(std::abs(0.5 * (lo + hi) - c[0]) < 1e-4);
}

TEST_CASE("simplicity diagnostic") {
  std::vector<BoundaryCovector> grid;
  for (double y : {0.0, 1.0})
    for (double e : {0.8, 2.0}) grid.push_back({v1(y), v1(e)});
  const SimplicityReport h = simplicity_check(half_plane(), grid);
  CHECK(h.conjugate_count == 0);
  CHECK(std::abs(h.min_angle_deg - 90.0) < 1e-6);
  CHECK(h.geodesics == 4);
  CHECK(h.failures == 0);

  const SimplicityReport d = simplicity_check(disc_normal(), grid);
  CHECK(d.conjugate_count == 0);
  CHECK(std::abs(d.min_angle_deg - 90.0) < 1e-4);

  const SimplicityReport p = simplicity_check(pert(), grid);
  CHECK(p.conjugate_count == 0);
  CHECK(p.min_angle_deg > 0.0);
  CHECK(p.min_det > 0.0);
}

TEST_CASE("higher dimension uses the linearized flow") {
  const auto hs = product(half_plane(), half_plane());
  const BoundaryCovector z{Vec::Zero(2), Vec::Constant(2, 0.7)};
  const JacobiSystem s = JacobiSystem::from_boundary(hs, z);
  CHECK(conjugate_points(s, 20.0).empty());
  const BundleFrame f = stable_unstable(s);
  CHECK(f.transversality_deg > 10.0);
  CHECK(f.det > 0.1);
  const Mat V = vertical_basis(hs, s.base(0.0));
  CHECK(V.cols() == 2);
  CHECK_THROWS_AS(s.curvature(0.0), InvalidArgument);
}

#include "ahx/tensor.hpp"
#include "ahx/xray.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ahx;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

BoundaryMetricFamily pert() { return perturbed(TrigPoly{{0.0, 0.1}, {}}, TrigPoly{{0.05}, {}}); }

// Top of the unit semicircle centred at y = 1.
BPhasePoint semicircle_top() {
  BPhasePoint z;
  z.rho = 1.0;
  z.y = v1(1.0);
  z.xi_bar0 = 0.0;
  z.eta = v1(1.0);
  return z;
}

}  // namespace

TEST_CASE("X-ray of rho on half-plane semicircles") {
  const auto hp = half_plane();
  const auto rho = SymmetricTensorField::from_expressions(0, 1, 1, {{"rho"}});
  // int rho dt over a semicircle of radius r is pi r.
  CHECK(std::abs(xray_transform(hp, rho, BoundaryCovector{v1(0.0), v1(1.0)}) - kPi) < 1e-9);
  CHECK(std::abs(xray_transform(hp, rho, BoundaryCovector{v1(0.0), v1(2.0)}) - kPi / 2) < 1e-9);
}

TEST_CASE("lifts") {
  const auto p = pert();
  const SymmetricTensorField g = SymmetricTensorField::metric(p);
  BPhasePoint z;
  z.rho = 0.4;
  z.y = v1(0.3);
  z.xi_bar0 = 0.6;
  z.eta = v1(0.8 * std::sqrt(p.h(0.4, z.y)(0, 0)) / 0.4);
  CHECK(std::abs(lift_tensor(p, g, z) - 1.0) < 1e-13);

  // A one-form dy lifts to the y-velocity rho^2 h^{-1} eta.
  const auto dy = SymmetricTensorField::from_expressions(1, 1, 0, {{"0", "1"}});
  CHECK(std::abs(lift_tensor(p, dy, z) - 0.4 * 0.4 * z.eta[0] / p.h(0.4, z.y)(0, 0)) < 1e-14);

  BPhasePoint b = z;
  b.rho = 0.0;
  CHECK(lift_tensor(p, SymmetricTensorField::from_expressions(0, 1, 1, {{"rho"}}), b) == 0.0);
  CHECK_THROWS_AS(lift_tensor(p, SymmetricTensorField::from_expressions(0, 1, 0, {{"1"}}), b),
                  InvalidArgument);
}

TEST_CASE("admissibility and weight validation") {
  const auto f = SymmetricTensorField::from_expressions(0, 1, 0, {{"1"}});
  CHECK_FALSE(f.admissible());
  CHECK_THROWS_AS(xray_transform(half_plane(), f, BoundaryCovector{v1(0.0), v1(1.0)}), InvalidArgument);
  const auto lying = SymmetricTensorField::from_expressions(0, 1, 3, {{"rho"}});
  CHECK_THROWS_AS(lying.validate_weight(v1(0.0)), InvalidArgument);
  SymmetricTensorField::from_expressions(0, 1, 2, {{"rho^2*cos(y1)"}}).validate_weight(v1(0.0));
}

TEST_CASE("potential tensors lie in the kernel") {
  const auto hp = half_plane();
  // D of a scalar is its differential.
  const auto q = SymmetricTensorField::from_expressions(0, 1, 2, {{"rho^2*exp(-y1^2)"}});
  const SymmetricTensorField dq = sym_derivative(hp, q);
  const Mat c = dq.components(0.5, v1(0.3));
  CHECK(std::abs(c(0, 0) - 2 * 0.5 * std::exp(-0.09)) < 1e-9);
  CHECK(std::abs(c(1, 0) - 0.25 * (-0.6) * std::exp(-0.09)) < 1e-9);
  for (double eta : {0.5, 1.0, 3.0})
    CHECK(std::abs(xray_transform(hp, dq, BoundaryCovector{v1(-0.5), v1(eta)})) < 1e-8);

  const auto p = pert();
  const auto q1 = SymmetricTensorField::from_expressions(1, 1, 1, {{"rho^2*cos(y1)", "rho*sin(y1)"}});
  const SymmetricTensorField dq1 = sym_derivative(p, q1);
  CHECK(dq1.rank() == 2);
  CHECK(dq1.admissible());
  for (double eta : {1.0, 2.0, 5.0})
    CHECK(std::abs(xray_transform(p, dq1, BoundaryCovector{v1(2.0), v1(eta)})) < 1e-8);

  const SymmetricTensorField zero = sym_derivative(p, SymmetricTensorField::zero(1, 1, 2));
  CHECK(zero.components(0.7, v1(1.0)).norm() == 0.0);
}

TEST_CASE("lift and D are compatible: lift(Dq) = X lift(q)") {
  const auto p = pert();
  const auto q = SymmetricTensorField::from_expressions(1, 1, 1, {{"rho^2*cos(y1)", "rho*sin(y1)"}});
  const SymmetricTensorField dq = sym_derivative(p, q);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (int i = 0; i < 20; ++i) {
    const GeodesicTrajectory t = trace_geodesic(p, {v1(2 * kPi * U(rng)), v1(0.8 + 4 * U(rng))});
    const double tau = t.tau_plus() * (0.2 + 0.6 * U(rng)), h = 1e-5;
    const BPhasePoint z = t.at(tau);
    // X = rho d/dtau.
    const double X = z.rho * (lift_tensor(p, q, t.at(tau + h)) - lift_tensor(p, q, t.at(tau - h))) / (2 * h);
    CHECK(std::abs(lift_tensor(p, dq, z) - X) < 1e-6);
  }
}

TEST_CASE("nonnegative functions have positive X-ray somewhere") {
  const auto bump = SymmetricTensorField::from_expressions(0, 1, 2, {{"rho^2*exp(-4*(rho-0.5)^2)"}});
  double best = 0.0;
  for (double eta : {1.2, 2.0, 3.0}) best = std::max(best, xray_transform(pert(), bump, BoundaryCovector{v1(0.0), v1(eta)}));
  CHECK(best > 0.01);
}

TEST_CASE("gauge normalization") {
  const auto p = pert();
  // Already tangential: nothing to remove.
  const auto t = SymmetricTensorField::from_expressions(2, 1, 0, {{"0", "0"}, {"0", "rho^2*cos(y1)"}});
  const GaugeResult g = gauge_normalize(p, t);
  CHECK(g.q.components(0.2, v1(1.0)).norm() < 1e-14);

  const auto f = SymmetricTensorField::from_expressions(2, 1, 0,
                                                        {{"rho*cos(y1)", "rho^2"}, {"rho^2", "rho^3"}});
  const GaugeResult r = gauge_normalize(p, f);
  CHECK(r.residual < 1e-8);
  const Mat rem = f.components(0.15, v1(0.4)) - sym_derivative(p, r.q).components(0.15, v1(0.4));
  CHECK(std::abs(rem(0, 0)) < 1e-8);
  CHECK(std::abs(rem(0, 1)) < 1e-8);
}

TEST_CASE("zero-energy resolvents") {
  const auto hp = half_plane();
  const PhaseFunction rho = [](const BPhasePoint& z) { return z.rho; };
  const PhaseFunction one = [](const BPhasePoint&) { return 1.0; };
  const BPhasePoint z = semicircle_top();
  // Quarter of the unit semicircle: int_{pi/2}^{pi} r dtheta.
  CHECK(std::abs(resolvent_zero(hp, rho, z, +1) - kPi / 2) < 1e-9);
  CHECK(std::abs(resolvent_zero(hp, rho, z, -1) + kPi / 2) < 1e-9);
  CHECK(std::abs(resolvent_zero(hp, one, z, +1)) < 1e-14);
  CHECK_THROWS_AS(resolvent_zero(hp, one, z, 0), InvalidArgument);
}

TEST_CASE("flow derivative of the resolvents") {
  const auto p = pert();
  const PhaseFunction F = [](const BPhasePoint& z) { return std::cos(z.y[0]) * (1 + z.rho) + z.xi_bar0; };
  const BPhasePoint z = phase_point_from_angle(p, 0.6, 1.0, 1.1);
  const GeodesicTrajectory fwd = trace_from(p, z);
  const GeodesicTrajectory back = trace_from(p, reversed(z));
  const double h = 1e-3;
  auto at = [&](double tau) { return tau >= 0 ? fwd.at(tau) : reversed(back.at(-tau)); };
  auto XR = [&](int sign) {
    auto R = [&](double tau) { return resolvent_zero(p, F, at(tau), sign); };
    return z.rho * (8 * (R(h) - R(-h)) - (R(2 * h) - R(-2 * h))) / (12 * h);
  };
  // -X R_+ = Id - P_+ and, from the integral definition, -X R_- = Id - P_- too.
  CHECK(std::abs(-XR(+1) - (F(z) - F(fwd.end()))) < 1e-6);
  const BPhasePoint minus = reversed(back.end());
  CHECK(std::abs(-XR(-1) - (F(z) - F(minus))) < 1e-6);
}

TEST_CASE("phase angle parametrization") {
  const auto p = pert();
  const BPhasePoint z = phase_point_from_angle(p, 0.5, 2.0, -0.7);
  CHECK(std::abs(z.constraint_defect(p)) < 1e-14);
  CHECK(std::abs(fiber_angle(p, z) + 0.7) < 1e-14);
  const BoundaryCovector b = incoming_endpoint(p, z);
  const BPhasePoint through = trace_geodesic(p, b).end();
  CHECK(std::abs(through.eta[0] - trace_from(p, z).end().eta[0]) < 1e-8);
}

TEST_CASE("Santalo and adjointness on a coarse mesh") {
  const auto disc = disc_normal();
  const PhaseFunction zero = [](const BPhasePoint&) { return 0.0; };
  const QuadratureMeasure in = phase_window_measure(disc, {0.3, 0.7}, {2.8, 3.5}, {1.0, 2.1}, 1, 3);
  const QuadratureMeasure bd = boundary_measure({2.0, 4.0}, {1.0, 3.0}, 1, 1, 3);
  const SantaloResult s = santalo_check(disc, zero, in, bd);
  CHECK(s.lhs == 0.0);
  CHECK(s.rhs == 0.0);

  // A bump that reaches the window edge is rejected.
  const PhaseFunction wide = [](const BPhasePoint& z) { return z.rho; };
  CHECK_THROWS_AS(santalo_check(disc, wide, in, bd), InvalidArgument);
}

TEST_CASE("Santalo identity converges under refinement") {
  const auto disc = disc_normal();
  const double r0 = 0.5, y0 = kPi, s = 0.05, a0 = kPi / 2, w = 0.6;
  const PhaseFunction F = [&](const BPhasePoint& z) {
    const double u = (fiber_angle(disc, z) - a0) / w;
    if (std::abs(u) >= 1) return 0.0;
    const double dy = wrap_angle(z.y[0] - y0);
    return std::exp(-((z.rho - r0) * (z.rho - r0) + dy * dy) / (2 * s * s) + 1 - 1 / (1 - u * u));
  };
  const Box rb{r0 - 7 * s, r0 + 7 * s}, yb{y0 - 7 * s, y0 + 7 * s}, ab{a0 - w, a0 + w};
  std::vector<BPhasePoint> pts;
  for (double r : {rb.lo, r0, rb.hi})
    for (double y : {yb.lo, y0, yb.hi})
      for (double a : {ab.lo, a0, ab.hi}) pts.push_back(phase_point_from_angle(disc, r, y, a));
  auto [wy, we] = incoming_window(disc, pts, y0, 0.15);
  we.lo = std::max(we.lo, 0.3);
  double prev = 1.0;
  for (int panels : {3, 4}) {
    const SantaloResult r = santalo_check(disc, F, phase_window_measure(disc, rb, yb, ab, panels, 4),
                                          boundary_measure(wy, we, 2 * panels, 2 * panels, 4), {}, 1e-4);
    const double rel = std::abs(r.lhs - r.rhs) / r.lhs;
    CHECK(rel < prev);
    prev = rel;
  }
  CHECK(prev < 2e-3);
}

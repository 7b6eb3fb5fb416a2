#include "ahx/renorm.hpp"

#include <doctest.h>

#include <cmath>

using namespace ahx;

namespace {
Vec v1(double x) { return Vec::Constant(1, x); }

double disc_dR(double theta) { return 2.0 * std::log(2.0 * std::sin(theta / 2.0)); }
}  // namespace

TEST_CASE("renormalized length of half-plane semicircles") {
  const auto hp = half_plane();
  // Radius 1/|eta|: L = 2 log(2 r).
  for (double eta : {0.5, 1.0, 2.0, 4.0, -1.0}) {
    const GeodesicTrajectory t = trace_geodesic(hp, {v1(0.3), v1(eta)});
    const double exact = 2.0 * std::log(2.0 / std::abs(eta));
    const RenormalizedLengthRecord r = renormalized_length(t);
    CHECK(std::abs(r.L - exact) < 1e-8);
    CHECK(r.method == LengthMethod::regularized);

    const RenormalizedLengthRecord m = renormalized_length_mellin(t);
    CHECK(std::abs(m.L - exact) < 1e-6);
    CHECK(std::abs(m.residue - 2.0) < 1e-4);
    CHECK(m.method == LengthMethod::mellin);
  }
  const GeodesicTrajectory unit = trace_geodesic(hp, {v1(0.0), v1(2.0)});
  CHECK(std::abs(renormalized_length(unit).L) < 1e-8);
}

TEST_CASE("Mellin integral has a simple pole with residue 2") {
  const GeodesicTrajectory t = trace_geodesic(disc_normal(), {v1(0.5), v1(1.1)});
  // lambda I(lambda) -> 2 as lambda -> 0.
  const double a = 0.02 * mellin_integral(t, 0.02), b = 0.01 * mellin_integral(t, 0.01);
  CHECK(std::abs(b - 2.0) < std::abs(a - 2.0));
  CHECK(std::abs(renormalized_length_mellin(t).residue - 2.0) < 1e-4);
  CHECK(std::abs(renormalized_length_mellin(t).L - renormalized_length(t).L) < 1e-6);
  CHECK_THROWS_AS(mellin_integral(t, 0.0), InvalidArgument);
}

TEST_CASE("renormalized boundary distance") {
  // Half-plane: points at distance 2 are joined by the unit semicircle.
  const DistanceRecord h = boundary_distance(half_plane(), v1(-1.0), v1(1.0));
  CHECK(std::abs(h.dR - 2.0 * std::log(2.0)) < 1e-8);
  CHECK(std::abs(h.eta_star[0] - 1.0) < 1e-8);

  const auto disc = disc_normal();
  for (double th : {0.5, 1.0, kPi / 2, 2.2, 2.8}) {
    const DistanceRecord r = boundary_distance(disc, v1(0.0), v1(th));
    CHECK(std::abs(r.dR - disc_dR(th)) < 1e-7);
  }
  // Approaching the diameter the distance tends to 2 log 2.
  CHECK(std::abs(boundary_distance(disc, v1(0.0), v1(3.0)).dR - 2 * std::log(2.0)) < 0.01);
}

TEST_CASE("scattering from the distance gradient") {
  const auto disc = disc_normal();
  const double th = 1.5;
  const ScatteringFromDistanceReport r = scattering_from_distance_check(disc, v1(0.0), v1(th));
  // d/dTheta of 2 log(2 sin(Theta/2)) is cot(Theta/2).
  CHECK(std::abs(r.grad_q[0] - 1.0 / std::tan(th / 2)) < 1e-5);
  CHECK(std::abs(r.grad_p[0] + 1.0 / std::tan(th / 2)) < 1e-5);
  CHECK(r.residual < 1e-4);

  const auto hp = half_plane();
  const ScatteringFromDistanceReport h = scattering_from_distance_check(hp, v1(0.0), v1(2.0));
  CHECK(h.residual < 1e-5);
}

TEST_CASE("conformal change of the representative") {
  const auto disc = disc_normal();
  const GeodesicTrajectory t = trace_geodesic(disc, {v1(0.4), v1(0.9)});
  CHECK(std::abs(conformal_shift(disc, t, BoundaryFunction::constant(0.0, 1))) < 1e-7);
  CHECK(std::abs(conformal_shift(disc, t, BoundaryFunction::constant(0.3, 1)) - 0.6) < 1e-8);

  const BoundaryFunction omega =
      BoundaryFunction::from_expression(Expression::parse("0.1*sin(y1)"), 1);
  const double expect = 0.1 * (std::sin(t.start().y[0]) + std::sin(t.end().y[0]));
  CHECK(std::abs(conformal_shift(disc, t, omega) - expect) < 1e-6);
  CHECK_THROWS_AS(BoundaryFunction::from_expression(Expression::parse("rho*y1"), 1), InvalidArgument);
}

TEST_CASE("deformations") {
  const BoundaryCovector z{v1(0.0), v1(1.0)};
  const FamilyPath constant = [](double) { return half_plane(); };
  const DeformationResult c = deformation_derivative(constant, z);
  CHECK(std::abs(c.dL_ds) < 1e-9);
  CHECK(std::abs(c.I2) < 1e-12);

  // rho^4 c conformal path on the half-plane. I_2(gdot) has the closed form
  // c * int_0^pi sin^3 = 4c/3 weighted by the unit-speed factor, i.e. 16c/15
  // for c = 0.1 on the unit semicircle. The fixed-endpoint variation of the
  // renormalized distance is half of it.
  const FamilyPath path = [](double s) {
    return deformed(half_plane(), s, [](const Vec&) { return 0.1; },
                    [](const Vec&) { return Vec(Vec::Zero(1)); });
  };
  const DeformationResult d = deformation_derivative(path, z);
  CHECK(std::abs(d.I2 - 0.1 * 16.0 / 15.0) < 1e-8);
  CHECK(std::abs(distance_variation(path, z) - 0.5 * d.I2) < 1e-6);
}

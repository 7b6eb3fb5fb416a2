#include "ahx/flow.hpp"
#include "ahx/quadrature.hpp"

#include <doctest.h>

#include <cmath>

using namespace ahx;

namespace {
Vec v1(double x) { return Vec::Constant(1, x); }
}  // namespace

TEST_CASE("Dormand-Prince on y' = -y with dense output") {
  OdeOptions<double> o;
  o.rtol = o.atol = 1e-12;
  DormandPrince<double> dp(o);
  const DormandPrince<double>::Rhs f = [](double, const Vec& x, Vec& dx) { dx = -x; };
  double worst = 0.0;
  const double t_end = dp.run(f, 0.0, v1(1.0), 3.0, [&](const DenseSegment<double>& s, Vec&) {
    const double tm = s.t0 + 0.37 * s.h;
    worst = std::max(worst, std::abs(s(tm)[0] - std::exp(-tm)));
    return StepControl{};
  });
  CHECK(t_end == doctest::Approx(3.0));
  CHECK(worst < 1e-10);
}

TEST_CASE("quadrature rules") {
  const GaussRule g = composite_gauss(0.0, 2.0, 3, 5);
  double s = 0.0;
  for (std::size_t i = 0; i < g.nodes.size(); ++i) s += g.weights[i] * std::pow(g.nodes[i], 9);
  CHECK(std::abs(s - std::pow(2.0, 10) / 10) < 1e-11);
  const QuadResult r = integrate_gk15([](double x) { return std::log(x); }, 0.0, 1.0);
  CHECK(std::abs(r.value + 1.0) < 1e-11);
}

TEST_CASE("barX at the incoming boundary and in the interior") {
  const auto hp = half_plane();
  BPhasePoint b;
  b.rho = 0.0;
  b.y = v1(0.4);
  b.xi_bar0 = 1.0;
  b.eta = v1(2.5);
  const Tangent t0 = barX_eval(hp, b);
  CHECK(t0.drho == 1.0);
  CHECK(t0.dy[0] == 0.0);
  CHECK(t0.dxi == 0.0);
  CHECK(t0.deta[0] == 0.0);

  BPhasePoint p;
  p.rho = 0.5;
  p.y = v1(0.0);
  p.xi_bar0 = std::sqrt(0.75);
  p.eta = v1(1.0);
  const Tangent t = barX_eval(hp, p);
  CHECK(std::abs(t.dy[0] - 0.5) < 1e-15);
  CHECK(std::abs(t.dxi + 0.5) < 1e-15);
  CHECK(t.deta[0] == 0.0);
}

TEST_CASE("half-plane semicircles") {
  const auto hp = half_plane();
  const GeodesicTrajectory t = trace_geodesic(hp, {v1(0.0), v1(1.0)});
  const BPhasePoint e = t.end();
  CHECK(std::abs(e.y[0] - 2.0) < 1e-9);
  CHECK(std::abs(e.xi_bar0 + 1.0) < 1e-12);
  CHECK(std::abs(e.eta[0] - 1.0) < 1e-9);
  CHECK(std::isfinite(t.tau_plus()));
  // Peak of the unit semicircle.
  CHECK(std::abs(t.rho(t.tau_peak()) - 1.0) < 1e-9);
  for (const auto& [tau, p] : t.samples()) CHECK(std::abs(p.constraint_defect(hp)) < 1e-10);

  const BoundaryCovector s = scattering_map(hp, {v1(0.0), v1(-3.0)});
  CHECK(std::abs(s.y[0] + 2.0 / 3.0) < 1e-9);
  CHECK(std::abs(s.eta[0] + 3.0) < 1e-8);
  CHECK(s.side == Side::outgoing);

  for (double eta : {-5.0, -2.0, -1.0, 1.0, 2.0, 5.0})
    for (double y : {-1.5, 0.25}) {
      const BoundaryCovector o = scattering_map(hp, {v1(y), v1(eta)});
      CHECK(std::abs(o.y[0] - (y + 2.0 / eta)) < 1e-8);
      CHECK(std::abs(o.eta[0] - eta) < 1e-8);
    }
}

TEST_CASE("disc rotational symmetry") {
  const auto disc = disc_normal();
  const GeodesicTrajectory a = trace_geodesic(disc, {v1(0.0), v1(1.3)});
  const GeodesicTrajectory b = trace_geodesic(disc, {v1(kPi / 2), v1(1.3)});
  CHECK(std::abs(a.tau_plus() - b.tau_plus()) < 1e-9);
  for (double f : {0.2, 0.5, 0.9}) {
    const BPhasePoint pa = a.at(f * a.tau_plus()), pb = b.at(f * b.tau_plus());
    CHECK(std::abs(pa.rho - pb.rho) < 1e-9);
    CHECK(std::abs(wrap_angle(pb.y[0] - pa.y[0] - kPi / 2)) < 1e-9);
    CHECK(std::abs(pa.eta[0] - pb.eta[0]) < 1e-9);
  }
}

TEST_CASE("time reversal retraces the geodesic") {
  const auto pert = perturbed(TrigPoly{{0.0, 0.1}, {}}, TrigPoly{{0.05}, {}});
  const GeodesicTrajectory t = trace_geodesic(pert, {v1(0.7), v1(1.8)});
  const BPhasePoint mid = t.at(0.4 * t.tau_plus());
  const BPhasePoint back = trace_from(pert, reversed(mid)).end();
  CHECK(std::abs(wrap_angle(back.y[0] - 0.7)) < 1e-8);
  CHECK(std::abs(back.eta[0] + 1.8) < 1e-8);
}

TEST_CASE("trace failures") {
  TraceOptions o;
  o.t_max = 5.0;
  CHECK_THROWS_AS(trace_geodesic(half_plane(), {v1(0.0), v1(1.0)}, o), TrappedOrSlow);
  // A near-diameter of the disc runs into the chart centre.
  CHECK_THROWS_AS(trace_geodesic(disc_normal(), {v1(0.0), v1(0.01)}), ChartExit);
  o.t_max = -1.0;
  CHECK_THROWS_AS(trace_geodesic(half_plane(), {v1(0.0), v1(1.0)}, o), InvalidArgument);
}

TEST_CASE("short geodesics") {
  // Exact on the half-plane: theta = s, omega = omega0, u = (1 - cos s) omega0.
  const ShortGeodesicResult r = short_geodesic(half_plane(), v1(0.0), v1(1.0), 0.1);
  CHECK(std::abs(r.u_end[0] - 2.0) < 1e-10);
  CHECK(std::abs(r.omega_end[0] - 1.0) < 1e-12);
  CHECK(std::abs(r.s0 - kPi) < 1e-10);

  // |s0 - pi| <= C delta on the perturbed fixture, and u(pi) -> 2.
  const auto pert = perturbed(TrigPoly{{0.0, 0.1}, {}}, TrigPoly{});
  double prev = 0.0;
  for (double delta : {4e-3, 2e-3, 1e-3}) {
    const ShortGeodesicResult s = short_geodesic(pert, v1(0.3), v1(1.0), delta);
    const double dev = std::abs(s.s0 - kPi);
    CHECK(dev / delta < 5.0);
    CHECK(std::abs(s.u_end[0] - 2.0) < 50 * delta);
    if (prev > 0) CHECK(dev < 0.7 * prev);
    prev = dev;
  }
  CHECK_THROWS_AS(short_geodesic(half_plane(), v1(0.0), v1(1.0), 0.5), InvalidArgument);
}

TEST_CASE("scattering Jacobian is symplectic") {
  // Half-plane: dS = [[1, -2/eta^2], [0, 1]].
  const ScatteringJacobian j = scattering_jacobian(half_plane(), {v1(0.0), v1(2.0)});
  CHECK(std::abs(j.dS(0, 0) - 1.0) < 1e-7);
  CHECK(std::abs(j.dS(0, 1) + 0.5) < 1e-7);
  CHECK(std::abs(j.dS(1, 0)) < 1e-7);
  CHECK(std::abs(j.dS(1, 1) - 1.0) < 1e-7);

  const auto pert = perturbed(TrigPoly{{0.0, 0.1}, {}}, TrigPoly{{0.05}, {}});
  const ScatteringJacobian k = scattering_jacobian(pert, {v1(1.0), v1(1.5)});
  CHECK(std::abs(k.det - 1.0) < 1e-6);
  CHECK(k.symplectic_residual < 1e-6);

  const auto hs = product(half_plane(), half_plane());
  Vec y(2), eta(2);
  y << 0.0, 0.5;
  eta << 1.0, 0.7;
  const ScatteringJacobian m = scattering_jacobian(hs, {y, eta});
  CHECK(m.dS.rows() == 4);
  CHECK(m.symplectic_residual < 1e-6);
}

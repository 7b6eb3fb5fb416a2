#include "ahx/recover.hpp"
#include "ahx/renorm.hpp"

#include <doctest.h>

#include <cmath>

using namespace ahx;

namespace {

Vec v1(double x) { return Vec::Constant(1, x); }

BoundaryMetricFamily pert() { return perturbed(TrigPoly{{0.0, 0.1}, {}}, TrigPoly{{0.05}, {}}); }

std::vector<double> short_grid() { return {0.1, 0.05, 0.025, 0.0125, 0.00625}; }

std::vector<LengthSampleSet> ring(const BoundaryMetricFamily& f, int m, double noise = 0.0) {
  std::vector<LengthSampleSet> out;
  for (int k = 0; k < m; ++k)
    out.push_back(synthesize_samples(f, v1(2 * kPi * k / m), {v1(1.0)}, short_grid(), noise, 11 + k));
  return out;
}

}  // namespace

TEST_CASE("half-plane samples are exact") {
  const LengthSampleSet s = synthesize_samples(half_plane(), v1(0.0), {v1(1.0), v1(2.0)}, short_grid());
  // eta = omega / delta is a semicircle of radius delta / omega.
  for (std::size_t k = 0; k < s.deltas.size(); ++k) {
    CHECK(std::abs(s.L(0, k) - 2 * std::log(2 * s.deltas[k])) < 1e-8);
    CHECK(std::abs(s.L(1, k) - 2 * std::log(s.deltas[k])) < 1e-8);
  }
  const H0Estimate h = recover_h0(s);
  CHECK(std::abs(h.norms[0] - 1.0) < 1e-8);
  CHECK(std::abs(h.norms[1] - 2.0) < 1e-8);  // homogeneous of degree one
  CHECK(std::abs(h.h0(0, 0) - 1.0) < 1e-8);
}

TEST_CASE("default delta grid") {
  const auto g = default_delta_grid();
  CHECK(g.front() == 0.2);
  CHECK(std::abs(g.back() - 0.003125) < 1e-15);
  for (std::size_t i = 1; i < g.size(); ++i) CHECK(g[i] < g[i - 1]);
}

TEST_CASE("disc: the length expansion has an O(delta^2) remainder") {
  const LengthSampleSet s = synthesize_samples(disc_normal(), v1(0.5), {v1(1.0)}, short_grid());
  // h = (1 - rho^2/4)^2 has no linear term, so F(delta) = O(delta^2).
  for (std::size_t k = 0; k < s.deltas.size(); ++k) {
    const double F = s.L(0, k) - 2 * std::log(2 * s.deltas[k]);
    CHECK(std::abs(F) < 2 * s.deltas[k] * s.deltas[k]);
  }
}

TEST_CASE("perturbed: h0 and the first jet from the asymptotics") {
  const auto p = pert();
  const auto sets = ring(p, 8);
  std::vector<H0Estimate> h0s;
  for (std::size_t k = 0; k < sets.size(); ++k) {
    h0s.push_back(recover_h0(sets[k]));
    CHECK(std::abs(h0s.back().h0(0, 0) - p.h(0.0, sets[k].y0)(0, 0)) < 1e-4);
  }
  const auto jets = recover_first_jet(sets, h0s);
  REQUIRE(jets.size() == 8);
  // d_rho h at rho = 0 is 2 a(y) = 0.2 cos y.
  for (int k : {0, 2, 4}) CHECK(std::abs(jets[k].drho_h(0, 0) - 0.2 * std::cos(jets[k].y0[0])) < 5e-3);
}

TEST_CASE("first jet on the closed-form fixtures") {
  // The disc tolerance is set by the quartic term the cubic slope fit omits.
  const std::pair<BoundaryMetricFamily, double> cases[] = {{half_plane(), 1e-6}, {disc_normal(), 1e-4}};
  for (const auto& [f, tol] : cases) {
    const auto sets = ring(f, 8);
    std::vector<H0Estimate> h0s;
    for (const auto& s : sets) h0s.push_back(recover_h0(s));
    for (const auto& j : recover_first_jet(sets, h0s)) CHECK(std::abs(j.drho_h(0, 0)) < tol);
  }
}

TEST_CASE("jet fit") {
  // Fewer than 8 points: constant coefficients; the half-plane is fitted exactly.
  std::vector<LengthSampleSet> few;
  for (double y : {0.0, 2.0, 4.0}) few.push_back(synthesize_samples(half_plane(), v1(y), {v1(1.0)}, short_grid()));
  JetFitOptions o;
  o.k_max = 1;
  const JetFitReport r = recover_jet_fit(few, o);
  CHECK(r.converged);
  CHECK(r.parameters == 2);
  CHECK(r.residual_rms < 1e-7);
  CHECK(std::abs(r.jets[0].h0(0, 0) - 1.0) < 1e-6);
  CHECK(std::abs(r.jets[0].drho_h(0, 0)) < 1e-5);

  // Noisy perturbed samples on the 8-point ring, quadratic model.
  o.k_max = 2;
  const JetFitReport n = recover_jet_fit(ring(pert(), 8, 1e-6), o);
  CHECK(n.converged);
  for (const JetEstimate& j : n.jets) CHECK(std::abs(j.drho_h(0, 0) - 0.2 * std::cos(j.y0[0])) < 1e-2);
}

TEST_CASE("short geodesics do not see the interior of the metric") {
  // Multiply h by a smooth bump supported in rho > 0.3. Geodesics with
  // delta <= 0.02 stay below rho = 0.05, so their lengths must not change.
  const auto p = pert();
  auto bump = [](double r) { return r <= 0.3 ? 0.0 : std::exp(-1.0 / (r - 0.3)); };
  auto dbump = [&](double r) { return r <= 0.3 ? 0.0 : bump(r) / ((r - 0.3) * (r - 0.3)); };
  const BoundaryMetricFamily b(
      "bumped", 1, {ChartKind::periodic}, p.rho_max(), [p, bump, dbump](double rho, const Vec& y) {
        MetricJet j = p.jet(rho, y);
        const double s = 1.0 + bump(rho);
        j.dh_drho = s * j.dh_drho + dbump(rho) * j.h;
        for (Mat& d : j.dh_dy) d *= s;
        j.h *= s;
        return j;
      });
  const auto x = synthesize_samples(p, v1(1.0), {v1(1.0)}, {0.02, 0.01, 0.005});
  const auto y = synthesize_samples(b, v1(1.0), {v1(1.0)}, {0.02, 0.01, 0.005});
  CHECK((x.L - y.L).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sample sets round trip through JSON") {
  const LengthSampleSet s = synthesize_samples(pert(), v1(0.3), {v1(1.0), v1(-0.5)}, {0.1, 0.05, 0.025}, 1e-6, 5);
  const LengthSampleSet t = sample_set_from_json(to_json(s));
  CHECK(t.y0 == s.y0);
  CHECK(t.deltas == s.deltas);
  CHECK(t.directions.size() == 2);
  CHECK(t.noise == s.noise);
  CHECK((t.L - s.L).norm() == 0.0);
}

TEST_CASE("input validation") {
  CHECK_THROWS_AS(synthesize_samples(half_plane(), v1(0.0), {v1(1.0)}, {0.01, 0.02, 0.005}), InvalidArgument);
  LengthSampleSet s = synthesize_samples(half_plane(), v1(0.0), {v1(1.0)}, {0.1, 0.05});
  CHECK_THROWS_AS(recover_h0(s), InvalidArgument);
  s = synthesize_samples(half_plane(), v1(0.0), {v1(1.0)}, short_grid());
  const std::vector<LengthSampleSet> one{s};
  CHECK_THROWS_AS(recover_first_jet(one, {recover_h0(s)}), InvalidArgument);
}

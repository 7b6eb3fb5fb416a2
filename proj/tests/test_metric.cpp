#include "ahx/expr.hpp"
#include "ahx/metric.hpp"

#include <doctest.h>

#include <cmath>

using namespace ahx;

namespace {
Vec v1(double x) { return Vec::Constant(1, x); }
}  // namespace

TEST_CASE("make_family: closed-form fixture values") {
  const auto hp = make_family(nlohmann::json{{"family", "half-plane"}});
  const MetricJet j = hp.jet(0.7, v1(3.0));
  CHECK(j.h(0, 0) == 1.0);
  CHECK(j.dh_drho(0, 0) == 0.0);

  // (1 - rho^2/4)^2 at rho = 0.2
  const auto disc = make_family(nlohmann::json{{"family", "disc-normal"}});
  CHECK(std::abs(disc.h(0.2, v1(1.3))(0, 0) - 0.9801) < 1e-15);

  // d/drho e^{2 rho a} at rho = 0 is 2 a(0) = 0.2
  const auto pert = make_family(nlohmann::json::parse(
      R"({"family": "perturbed", "params": {"a": {"cos": [0, 0.1]}}})"));
  CHECK(std::abs(pert.jet(0.0, v1(0.0)).dh_drho(0, 0) - 0.2) < 1e-15);
}

TEST_CASE("eval_metric") {
  const MetricEval hp = eval_metric(half_plane(), 0.4, v1(-2.0));
  CHECK(hp.h_mat(0, 0) == 1.0);
  CHECK(hp.h_inv(0, 0) == 1.0);

  CHECK(std::abs(eval_metric(disc_normal(), 0.0, v1(2.0)).h_mat(0, 0) - 1.0) < 1e-15);

  const auto pert = perturbed(TrigPoly{{0.0, 0.1}, {}}, TrigPoly{});
  const MetricEval m = eval_metric(pert, 0.1, v1(0.0));
  CHECK(std::abs(m.h_mat(0, 0) - std::exp(0.02)) < 1e-14);
  CHECK(std::abs(m.h_inv(0, 0) * m.h_mat(0, 0) - 1.0) < 1e-14);

  CHECK_THROWS_AS(eval_metric(pert, -0.1, v1(0.0)), InvalidArgument);
  CHECK_THROWS_AS(eval_metric(pert, 5.0, v1(0.0)), InvalidArgument);
  CHECK_THROWS_AS(eval_metric(half_plane(1e3, 10.0), 0.1, v1(20.0)), InvalidArgument);
}

TEST_CASE("eta norm derivatives agree with finite differences") {
  const auto pert = perturbed(TrigPoly{{0.02, 0.1}, {0.0, 0.05}}, TrigPoly{{0.05}, {}});
  const Vec eta = v1(1.7);
  const double rho = 0.3, y = 0.8, h = 1e-6;
  const MetricEval m = eval_metric(pert, rho, v1(y));
  const double dr = (eval_metric(pert, rho + h, v1(y)).eta_normsq(eta) -
                     eval_metric(pert, rho - h, v1(y)).eta_normsq(eta)) / (2 * h);
  const double dy = (eval_metric(pert, rho, v1(y + h)).eta_normsq(eta) -
                     eval_metric(pert, rho, v1(y - h)).eta_normsq(eta)) / (2 * h);
  CHECK(std::abs(m.eta_normsq_drho(eta) - dr) < 1e-8);
  CHECK(std::abs(m.eta_normsq_dy(eta, 0) - dy) < 1e-8);
}

TEST_CASE("gauss_curvature") {
  CHECK(std::abs(gauss_curvature(half_plane(), 0.5, v1(0.0)) + 1.0) < 1e-9);
  CHECK(std::abs(gauss_curvature(disc_normal(), 0.3, v1(1.0)) + 1.0) < 1e-6);

  // K -> -1 like O(rho) on the perturbed fixture: |K + 1| / rho stays bounded
  // along a refinement sequence.
  const auto pert = perturbed(TrigPoly{{0.0, 0.1}, {}}, TrigPoly{});
  double prev_ratio = 0.0;
  for (double rho : {0.2, 0.1, 0.05, 0.025}) {
    const double ratio = std::abs(gauss_curvature(pert, rho, v1(0.0)) + 1.0) / rho;
    CHECK(ratio < 1.0);
    if (prev_ratio > 0) CHECK(std::abs(ratio - prev_ratio) < 0.1);
    prev_ratio = ratio;
  }
  CHECK_THROWS_AS(gauss_curvature(product(half_plane(), half_plane()), 0.5, Vec::Zero(2)),
                  InvalidArgument);
}

TEST_CASE("make_family rejects bad documents") {
  CHECK_THROWS_AS(make_family(nlohmann::json{{"family", "sphere"}}), InvalidArgument);
  CHECK_THROWS_AS(make_family(nlohmann::json::object()), InvalidArgument);
  CHECK_THROWS_AS(make_family(nlohmann::json{{"family", "half-plane"}, {"rho_max", -1.0}}),
                  InvalidArgument);
  // Not positive definite.
  CHECK_THROWS_AS(make_family(nlohmann::json::parse(
                      R"({"family": "expression", "params": {"h": "rho - 0.1"}})")),
                  InvalidFamily);
}

TEST_CASE("expression families match the built-in fixture") {
  const auto e = make_family(nlohmann::json::parse(
      R"j({"family": "expression", "params": {"h": "exp(2*rho*0.1*cos(y1))"}, "rho_max": 1.0})j"));
  const auto p = perturbed(TrigPoly{{0.0, 0.1}, {}}, TrigPoly{});
  for (double rho : {0.0, 0.3, 0.9})
    for (double y : {0.0, 1.0, 4.0}) {
      const MetricJet a = e.jet(rho, v1(y)), b = p.jet(rho, v1(y));
      CHECK(std::abs(a.h(0, 0) - b.h(0, 0)) < 1e-14);
      CHECK(std::abs(a.dh_drho(0, 0) - b.dh_drho(0, 0)) < 1e-13);
      CHECK(std::abs(a.dh_dy[0](0, 0) - b.dh_dy[0](0, 0)) < 1e-13);
    }
}

TEST_CASE("product family is block diagonal") {
  const auto f = make_family(nlohmann::json{{"family", "half-space"}});
  REQUIRE(f.dim() == 2);
  const Mat h = f.h(0.3, Vec::Zero(2));
  CHECK(h.isApprox(Mat::Identity(2, 2)));
}

TEST_CASE("deformed family scales h by 1 + s rho^4 c") {
  const auto d = deformed(half_plane(), 0.5, [](const Vec&) { return 0.1; },
                          [](const Vec&) { return Vec(Vec::Zero(1)); });
  const double rho = 0.6;
  CHECK(std::abs(d.h(rho, v1(0.0))(0, 0) - (1.0 + 0.5 * std::pow(rho, 4) * 0.1)) < 1e-15);
  CHECK(std::abs(d.jet(rho, v1(0.0)).dh_drho(0, 0) - 4 * 0.5 * 0.1 * std::pow(rho, 3)) < 1e-14);
}

TEST_CASE("expression parser") {
  const Expression e = Expression::parse("2*rho^2 + sin(y1) - pi/2");
  const double vars[] = {0.5, 1.0};
  CHECK(std::abs(e.eval(vars) - (0.5 + std::sin(1.0) - kPi / 2)) < 1e-15);
  CHECK(e.max_slot() == 1);

  Dual dv[2] = {Dual(0.5), Dual(1.0)};
  dv[0].d[0] = 1.0;
  dv[1].d[1] = 1.0;
  const Dual r = e.eval(dv);
  CHECK(std::abs(r.d[0] - 2.0) < 1e-15);
  CHECK(std::abs(r.d[1] - std::cos(1.0)) < 1e-15);

  CHECK_THROWS_AS(Expression::parse("rho +* 2"), InvalidArgument);
  CHECK_THROWS_AS(Expression::parse("foo(rho)"), InvalidArgument);
}

TEST_CASE("periodic chart reduction") {
  const auto disc = disc_normal();
  CHECK(std::abs(disc.reduce(v1(-0.5))[0] - (2 * kPi - 0.5)) < 1e-15);
  CHECK(std::abs(disc.difference(v1(0.1), v1(2 * kPi - 0.1))[0] - 0.2) < 1e-14);
}

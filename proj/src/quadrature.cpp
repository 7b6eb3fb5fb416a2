#include "ahx/quadrature.hpp"

#include <array>
#include <cmath>
#include <map>

namespace ahx {

namespace {

GaussRule compute_gauss(int p) {
  GaussRule r;
  r.nodes.resize(p);
  r.weights.resize(p);
  for (int i = 0; i < p; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (p + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= p; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      if (p == 1) {
        p1 = x;
        p0 = 1.0;
      }
      dp = p * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    r.nodes[i] = x;
    r.weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  return r;
}

// Kronrod 15-point nodes/weights and the embedded 7-point Gauss weights.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Gk {
  double k15, g7;
};

Gk gk15(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double k = fc * kWgk[7];
  double g = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double s = f(c - dx) + f(c + dx);
    k += kWgk[j] * s;
    if (j % 2 == 1) g += kWg[j / 2] * s;
  }
  return {k * h, g * h};
}

void adapt(const std::function<double(double)>& f, double a, double b, double tol, int depth,
           QuadResult& acc) {
  const Gk r = gk15(f, a, b);
  acc.evaluations += 15;
  const double err = std::abs(r.k15 - r.g7);
  if (err <= tol || depth <= 0 || std::abs(b - a) < 1e-15 * (1.0 + std::abs(a))) {
    acc.value += r.k15;
    acc.error += err;
    return;
  }
  const double m = 0.5 * (a + b);
  adapt(f, a, m, 0.5 * tol, depth - 1, acc);
  adapt(f, m, b, 0.5 * tol, depth - 1, acc);
}

}  // namespace

const GaussRule& gauss_legendre(int p) {
  if (p < 1) throw InvalidArgument("gauss_legendre: p must be >= 1");
  thread_local std::map<int, GaussRule> cache;
  auto it = cache.find(p);
  if (it == cache.end()) it = cache.emplace(p, compute_gauss(p)).first;
  return it->second;
}

GaussRule composite_gauss(double a, double b, int panels, int p) {
  if (panels < 1) throw InvalidArgument("composite_gauss: panels must be >= 1");
  const GaussRule& g = gauss_legendre(p);
  GaussRule r;
  const double w = (b - a) / panels;
  for (int k = 0; k < panels; ++k) {
    const double c = a + (k + 0.5) * w;
    for (int i = 0; i < p; ++i) {
      r.nodes.push_back(c + 0.5 * w * g.nodes[i]);
      r.weights.push_back(0.5 * w * g.weights[i]);
    }
  }
  return r;
}

QuadResult integrate_gk15(const std::function<double(double)>& f, double a, double b,
                          double abs_tol, double rel_tol, int max_depth) {
  QuadResult acc;
  if (a == b) return acc;
  // Coarse pass sets the relative scale.
  const Gk first = gk15(f, a, b);
  const double tol = std::max(abs_tol, rel_tol * std::abs(first.k15));
  adapt(f, a, b, tol, max_depth, acc);
  acc.evaluations += 15;
  return acc;
}

}  // namespace ahx

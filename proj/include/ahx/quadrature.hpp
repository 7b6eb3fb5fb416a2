#pragma once

#include "ahx/types.hpp"

#include <functional>
#include <vector>

namespace ahx {

/// Gauss-Legendre rule on [-1, 1].
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// p-point Gauss-Legendre rule (cached per thread).
const GaussRule& gauss_legendre(int p);

/// Composite Gauss-Legendre rule on [a, b] with `panels` equal panels of
/// `p` points each; exact for polynomials of degree 2p-1 per panel.
GaussRule composite_gauss(double a, double b, int panels, int p);

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
};

/// Adaptive Gauss-Kronrod (7/15) integration with bisection. Nodes never touch
/// the interval endpoints, so integrands with removable singularities there
/// are safe.
QuadResult integrate_gk15(const std::function<double(double)>& f, double a, double b,
                          double abs_tol = 1e-13, double rel_tol = 1e-12, int max_depth = 30);

}  // namespace ahx

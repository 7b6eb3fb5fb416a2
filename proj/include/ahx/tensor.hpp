#pragma once

// Symmetric tensor fields of rank 0, 1, 2 in the coordinate coframe
// {d rho, dy^1, ..., dy^n}, their lifts to the cosphere bundle, the
// symmetrized covariant derivative of g and the boundary gauge reduction.

#include "ahx/expr.hpp"
#include "ahx/flow.hpp"
#include "ahx/metric.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace ahx {

/// Component array: rank 0 -> 1x1, rank 1 -> (n+1)x1, rank 2 -> (n+1)x(n+1)
/// symmetric. Index 0 is rho, index k is y^k.
class SymmetricTensorField {
 public:
  using ComponentFn = std::function<Mat(double rho, const Vec& y)>;
  /// Returns {d_rho C, d_{y^1} C, ..., d_{y^n} C}.
  using DerivativeFn = std::function<std::vector<Mat>(double rho, const Vec& y)>;

  SymmetricTensorField(int rank, int dim_boundary, int weight, ComponentFn components,
                       DerivativeFn derivatives = {});

  int rank() const { return rank_; }
  int dim() const { return n_; }
  int weight() const { return weight_; }
  bool has_analytic_derivatives() const { return static_cast<bool>(deriv_); }

  Mat components(double rho, const Vec& y) const;
  /// Analytic derivatives if supplied, otherwise central differences with
  /// step 1e-6 (scaled by the coordinate magnitude).
  std::vector<Mat> derivatives(double rho, const Vec& y) const;

  /// Admissible for the X-ray transform I_m iff weight >= 1 - m.
  bool admissible() const { return weight_ >= 1 - rank_; }

  /// Samples rho^{-weight} C on a small grid and checks it stays bounded as
  /// rho decreases; throws InvalidArgument when the declared weight is too high.
  void validate_weight(const Vec& y_sample) const;

  static SymmetricTensorField zero(int rank, int dim_boundary, int weight = 2);
  /// The metric g itself (weight -2): its lift is identically 1 on S*M.
  static SymmetricTensorField metric(const BoundaryMetricFamily& family);
  /// Components given by expressions in rho, y1..yn. For rank 1 supply n+1
  /// entries, for rank 2 an (n+1)x(n+1) table (upper triangle used).
  static SymmetricTensorField from_expressions(int rank, int dim_boundary, int weight,
                                               const std::vector<std::vector<std::string>>& entries);
  /// {"rank": m, "weight": w, "components": ...}; components is a string for
  /// rank 0, a list for rank 1 and a nested list for rank 2.
  static SymmetricTensorField from_json(const nlohmann::json& spec, int dim_boundary);

 private:
  int rank_;
  int n_;
  int weight_;
  ComponentFn comp_;
  DerivativeFn deriv_;
};

/// xi^sharp = xi_bar0 rho d_rho + rho^2 h^{ij} eta_i d_{y^j} (components).
Vec lift_vector(const BoundaryMetricFamily& family, const BPhasePoint& p);

/// f(x)(xi^sharp, ..., xi^sharp). At rho = 0 the boundary limit is returned
/// (zero when weight + rank > 0); otherwise rho = 0 is an error.
double lift_tensor(const BoundaryMetricFamily& family, const SymmetricTensorField& f,
                   const BPhasePoint& p);

/// Christoffel symbols Gamma^k_{ij} of g, as (n+1) matrices indexed [k](i, j).
std::vector<Mat> christoffel(const BoundaryMetricFamily& family, double rho, const Vec& y);

/// Symmetrized covariant derivative D: rank m-1 -> rank m, m in {1, 2}.
SymmetricTensorField sym_derivative(const BoundaryMetricFamily& family,
                                    const SymmetricTensorField& q);

/// Smooth cutoff equal to 1 on [0, inner] and 0 on [outer, inf).
double collar_cutoff(double rho, double inner, double outer);

struct GaugeResult {
  SymmetricTensorField q;
  double residual;  // max |iota_{d_rho}(f - Dq)| over the collar grid
};

/// Solves for q of rank m-1 with iota_{d_rho}(f - Dq) = 0 on rho <= cut_inner
/// (n = 1). The result is multiplied by collar_cutoff(rho, cut_inner, cut_outer).
GaugeResult gauge_normalize(const BoundaryMetricFamily& family, const SymmetricTensorField& f,
                            double cut_inner = 0.3, double cut_outer = 0.6,
                            double residual_tol = 1e-8);

}  // namespace ahx

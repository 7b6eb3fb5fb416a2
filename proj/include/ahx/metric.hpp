#pragma once

// Asymptotically hyperbolic metrics in normal form
//
//     g = (d rho^2 + h_rho) / rho^2   on (0, rho_max] x boundary,
//
// described by the one-parameter family h_rho of boundary metrics together
// with its analytic first derivatives.

#include "ahx/expr.hpp"
#include "ahx/types.hpp"

#include <json.hpp>

#include <functional>
#include <string>
#include <vector>

namespace ahx {

enum class ChartKind { periodic, affine };

/// Values of h, d_rho h and d_{y^k} h at one point.
struct MetricJet {
  Mat h;
  Mat dh_drho;
  std::vector<Mat> dh_dy;
};

/// Trigonometric polynomial a(y) = sum_k cos_k cos(k y) + sin_k sin(k y).
struct TrigPoly {
  std::vector<double> cos_coeffs;
  std::vector<double> sin_coeffs;

  double operator()(double y) const;
  double derivative(double y) const;
  bool is_zero() const;
};

class BoundaryMetricFamily {
 public:
  using JetFn = std::function<MetricJet(double rho, const Vec& y)>;

  BoundaryMetricFamily(std::string name, int dim_boundary, std::vector<ChartKind> chart,
                       double rho_max, JetFn jet, Vec lower = {}, Vec upper = {});

  const std::string& name() const { return name_; }
  int dim() const { return n_; }
  double rho_max() const { return rho_max_; }
  ChartKind chart(int k) const { return chart_[k]; }
  const std::vector<ChartKind>& chart() const { return chart_; }
  bool all_periodic() const;
  double lower(int k) const { return lower_[k]; }
  double upper(int k) const { return upper_[k]; }

  /// Unchecked evaluation; valid for any rho where the defining formulas make
  /// sense (fixtures extend smoothly to small negative rho).
  MetricJet jet(double rho, const Vec& y) const { return jet_(rho, y); }
  Mat h(double rho, const Vec& y) const { return jet_(rho, y).h; }

  /// Periodic coordinates reduced to [0, 2pi).
  Vec reduce(const Vec& y) const;
  /// a - b, with periodic coordinates wrapped to (-pi, pi].
  Vec difference(const Vec& a, const Vec& b) const;
  /// True if y is inside the affine bounds (periodic coordinates always are).
  bool in_chart(const Vec& y) const;

  /// Sampled validation: symmetry, positive definiteness and consistency of
  /// the analytic derivatives with central differences. Throws InvalidFamily.
  void validate() const;

 private:
  std::string name_;
  int n_;
  std::vector<ChartKind> chart_;
  double rho_max_;
  JetFn jet_;
  Vec lower_, upper_;
};

/// Pointwise metric data consumed by the flow and transport equations.
struct MetricEval {
  Mat h_mat;
  Mat h_inv;
  Mat dh_drho_mat;
  std::vector<Mat> dh_dy_mats;

  /// |eta|^2_{h_rho} = h^{ij} eta_i eta_j.
  double eta_normsq(const Vec& eta) const { return eta.dot(h_inv * eta); }
  /// d_rho |eta|^2 = -eta^T h^{-1} (d_rho h) h^{-1} eta.
  double eta_normsq_drho(const Vec& eta) const;
  /// d_{y^k} |eta|^2.
  double eta_normsq_dy(const Vec& eta, int k) const;
};

/// Builds the MetricEval at an arbitrary point without range checks.
MetricEval eval_metric_unchecked(const BoundaryMetricFamily& family, double rho, const Vec& y);

/// Range-checked evaluation: 0 <= rho <= rho_max, y inside the chart.
MetricEval eval_metric(const BoundaryMetricFamily& family, double rho, const Vec& y);

/// Second rho-derivative of h by central differences of d_rho h.
inline constexpr double kCurvatureStep = 1e-5;
Mat d2h_drho2(const BoundaryMetricFamily& family, double rho, const Vec& y);

/// Gauss curvature of g at an interior point (n = 1 only).
double gauss_curvature(const BoundaryMetricFamily& family, double rho, const Vec& y);

// Built-in families.
BoundaryMetricFamily half_plane(double rho_max = 1e3, double y_bound = 1e6);
BoundaryMetricFamily disc_normal(double rho_max = 1.9);
BoundaryMetricFamily perturbed(TrigPoly a, TrigPoly b, double rho_max = 2.0);
BoundaryMetricFamily product(const BoundaryMetricFamily& first, const BoundaryMetricFamily& second);
/// h given entrywise by expressions in rho, y1..yn (symmetric; upper triangle used).
BoundaryMetricFamily from_expressions(int n, const std::vector<std::vector<std::string>>& entries,
                                      bool periodic, double rho_max);

/// Builds and validates a family from a metric-spec document
///   {"family": name, "params": {...}, "rho_max": real}.
BoundaryMetricFamily make_family(const nlohmann::json& spec);
BoundaryMetricFamily make_family(const std::string& json_text);

/// Scales h_rho by (1 + s rho^4 c(y)): a deformation that vanishes to fourth
/// order at the boundary.
BoundaryMetricFamily deformed(const BoundaryMetricFamily& base, double s,
                              std::function<double(const Vec&)> c, std::function<Vec(const Vec&)> dc);

}  // namespace ahx

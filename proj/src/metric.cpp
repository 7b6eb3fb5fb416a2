#include "ahx/metric.hpp"

#include <algorithm>
#include <cmath>

namespace ahx {

double TrigPoly::operator()(double y) const {
  double s = 0.0;
  for (std::size_t k = 0; k < cos_coeffs.size(); ++k) s += cos_coeffs[k] * std::cos(k * y);
  for (std::size_t k = 1; k < sin_coeffs.size(); ++k) s += sin_coeffs[k] * std::sin(k * y);
  return s;
}

double TrigPoly::derivative(double y) const {
  double s = 0.0;
  for (std::size_t k = 1; k < cos_coeffs.size(); ++k) s -= k * cos_coeffs[k] * std::sin(k * y);
  for (std::size_t k = 1; k < sin_coeffs.size(); ++k) s += k * sin_coeffs[k] * std::cos(k * y);
  return s;
}

bool TrigPoly::is_zero() const {
  auto zero = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double c) { return c == 0.0; });
  };
  return zero(cos_coeffs) && zero(sin_coeffs);
}

BoundaryMetricFamily::BoundaryMetricFamily(std::string name, int dim_boundary,
                                           std::vector<ChartKind> chart, double rho_max, JetFn jet,
                                           Vec lower, Vec upper)
    : name_(std::move(name)),
      n_(dim_boundary),
      chart_(std::move(chart)),
      rho_max_(rho_max),
      jet_(std::move(jet)),
      lower_(std::move(lower)),
      upper_(std::move(upper)) {
  if (n_ < 1) throw InvalidArgument("metric family: boundary dimension must be >= 1");
  if (!(rho_max_ > 0)) throw InvalidArgument("metric family: rho_max must be positive");
  if (static_cast<int>(chart_.size()) != n_)
    throw InvalidArgument("metric family: chart kinds must match the boundary dimension");
  if (lower_.size() == 0) lower_ = Vec::Constant(n_, -kInf);
  if (upper_.size() == 0) upper_ = Vec::Constant(n_, kInf);
}

bool BoundaryMetricFamily::all_periodic() const {
  return std::all_of(chart_.begin(), chart_.end(),
                     [](ChartKind k) { return k == ChartKind::periodic; });
}

Vec BoundaryMetricFamily::reduce(const Vec& y) const {
  Vec r = y;
  for (int k = 0; k < n_; ++k)
    if (chart_[k] == ChartKind::periodic) r[k] = reduce_angle(y[k]);
  return r;
}

Vec BoundaryMetricFamily::difference(const Vec& a, const Vec& b) const {
  Vec d = a - b;
  for (int k = 0; k < n_; ++k)
    if (chart_[k] == ChartKind::periodic) d[k] = wrap_angle(d[k]);
  return d;
}

bool BoundaryMetricFamily::in_chart(const Vec& y) const {
  for (int k = 0; k < n_; ++k) {
    if (chart_[k] == ChartKind::affine && (y[k] < lower_[k] || y[k] > upper_[k])) return false;
  }
  return true;
}

void BoundaryMetricFamily::validate() const {
  std::vector<double> rhos;
  const double top = std::min(rho_max_, 4.0);
  for (int i = 0; i <= 4; ++i) rhos.push_back(top * i / 4.0);
  std::vector<Vec> ys;
  const int ny = 5;
  for (int j = 0; j < ny; ++j) {
    Vec y(n_);
    for (int k = 0; k < n_; ++k) {
      const double t = (j + 0.37 * (k + 1)) / ny;
      if (chart_[k] == ChartKind::periodic) {
        y[k] = 2.0 * kPi * t;
      } else {
        const double lo = std::isfinite(lower_[k]) ? lower_[k] : -2.0;
        const double hi = std::isfinite(upper_[k]) ? upper_[k] : 2.0;
        y[k] = lo + (hi - lo) * std::fmod(t, 1.0);
      }
    }
    ys.push_back(y);
  }
  const double step = 1e-6;
  for (double rho : rhos) {
    for (const Vec& y : ys) {
      const MetricJet j = jet_(rho, y);
      if (j.h.rows() != n_ || j.h.cols() != n_)
        throw InvalidFamily(name_ + ": h has wrong shape");
      if ((j.h - j.h.transpose()).norm() > 1e-14 * (1.0 + j.h.norm()))
        throw InvalidFamily(name_ + ": h is not symmetric");
      Eigen::LLT<Mat> llt(j.h);
      if (llt.info() != Eigen::Success)
        throw InvalidFamily(name_ + ": h is not positive definite at rho=" + std::to_string(rho));
      const double sc = step * std::max(1.0, std::abs(rho));
      const Mat fd_rho = (jet_(rho + sc, y).h - jet_(rho - sc, y).h) / (2 * sc);
      const double scale = j.h.norm() + j.dh_drho.norm();
      if ((fd_rho - j.dh_drho).norm() > 1e-6 * scale)
        throw InvalidFamily(name_ + ": d_rho h inconsistent with h");
      for (int k = 0; k < n_; ++k) {
        const double sy = step * std::max(1.0, std::abs(y[k]));
        Vec yp = y, ym = y;
        yp[k] += sy;
        ym[k] -= sy;
        const Mat fd_y = (jet_(rho, yp).h - jet_(rho, ym).h) / (2 * sy);
        if ((fd_y - j.dh_dy[k]).norm() > 1e-6 * (j.h.norm() + j.dh_dy[k].norm()))
          throw InvalidFamily(name_ + ": d_y h inconsistent with h");
      }
    }
  }
}

double MetricEval::eta_normsq_drho(const Vec& eta) const {
  const Vec v = h_inv * eta;
  return -v.dot(dh_drho_mat * v);
}

double MetricEval::eta_normsq_dy(const Vec& eta, int k) const {
  const Vec v = h_inv * eta;
  return -v.dot(dh_dy_mats[k] * v);
}

MetricEval eval_metric_unchecked(const BoundaryMetricFamily& family, double rho, const Vec& y) {
  MetricJet j = family.jet(rho, y);
  MetricEval e;
  if (family.dim() == 1) {
    const double h = j.h(0, 0);
    if (!(h > 0)) throw InvalidFamily(family.name() + ": h is singular");
    e.h_inv = Mat::Constant(1, 1, 1.0 / h);
  } else {
    Eigen::FullPivLU<Mat> lu(j.h);
    if (!lu.isInvertible()) throw InvalidFamily(family.name() + ": h is singular");
    e.h_inv = lu.inverse();
  }
  e.h_mat = std::move(j.h);
  e.dh_drho_mat = std::move(j.dh_drho);
  e.dh_dy_mats = std::move(j.dh_dy);
  return e;
}

MetricEval eval_metric(const BoundaryMetricFamily& family, double rho, const Vec& y) {
  if (y.size() != family.dim()) throw InvalidArgument("eval_metric: y has wrong dimension");
  if (!(rho >= 0.0) || rho > family.rho_max())
    throw InvalidArgument("eval_metric: rho=" + std::to_string(rho) + " outside [0, rho_max]");
  if (!family.in_chart(y)) throw InvalidArgument("eval_metric: y outside the chart");
  return eval_metric_unchecked(family, rho, y);
}

Mat d2h_drho2(const BoundaryMetricFamily& family, double rho, const Vec& y) {
  const double s = kCurvatureStep;
  return (family.jet(rho + s, y).dh_drho - family.jet(rho - s, y).dh_drho) / (2 * s);
}

double gauss_curvature(const BoundaryMetricFamily& family, double rho, const Vec& y) {
  if (family.dim() != 1) throw InvalidArgument("gauss_curvature: only defined for n = 1");
  if (!(rho > 0)) throw InvalidArgument("gauss_curvature: rho must be positive");
  // Orthogonal metric E drho^2 + G dy^2 with E = 1/rho^2, G = h/rho^2; E is
  // independent of y so only rho-derivatives of h enter.
  const MetricJet j = family.jet(rho, y);
  const double h = j.h(0, 0);
  const double hr = j.dh_drho(0, 0);
  const double hrr = d2h_drho2(family, rho, y)(0, 0);
  return -rho * rho * hrr / (2 * h) + rho * rho * hr * hr / (4 * h * h) + rho * hr / (2 * h) - 1.0;
}

BoundaryMetricFamily half_plane(double rho_max, double y_bound) {
  auto jet = [](double, const Vec&) {
    MetricJet j;
    j.h = Mat::Identity(1, 1);
    j.dh_drho = Mat::Zero(1, 1);
    j.dh_dy = {Mat::Zero(1, 1)};
    return j;
  };
  return BoundaryMetricFamily("half-plane", 1, {ChartKind::affine}, rho_max, jet,
                              Vec::Constant(1, -y_bound), Vec::Constant(1, y_bound));
}

BoundaryMetricFamily disc_normal(double rho_max) {
  if (rho_max >= 2.0)
    throw InvalidArgument("disc-normal: rho_max must be below 2 (the centre of the disc)");
  auto jet = [](double rho, const Vec&) {
    const double s = 1.0 - rho * rho / 4.0;
    MetricJet j;
    j.h = Mat::Constant(1, 1, s * s);
    j.dh_drho = Mat::Constant(1, 1, -rho * s);
    j.dh_dy = {Mat::Zero(1, 1)};
    return j;
  };
  return BoundaryMetricFamily("disc-normal", 1, {ChartKind::periodic}, rho_max, jet);
}

BoundaryMetricFamily perturbed(TrigPoly a, TrigPoly b, double rho_max) {
  auto jet = [a = std::move(a), b = std::move(b)](double rho, const Vec& y) {
    const double av = a(y[0]), bv = b(y[0]);
    const double h = std::exp(2.0 * (rho * av + rho * rho * bv));
    MetricJet j;
    j.h = Mat::Constant(1, 1, h);
    j.dh_drho = Mat::Constant(1, 1, 2.0 * h * (av + 2.0 * rho * bv));
    j.dh_dy = {Mat::Constant(1, 1, 2.0 * h * (rho * a.derivative(y[0]) + rho * rho * b.derivative(y[0])))};
    return j;
  };
  return BoundaryMetricFamily("perturbed", 1, {ChartKind::periodic}, rho_max, jet);
}

BoundaryMetricFamily product(const BoundaryMetricFamily& first, const BoundaryMetricFamily& second) {
  if (first.dim() != 1 || second.dim() != 1)
    throw InvalidArgument("product: factors must have one-dimensional boundary");
  auto jet = [first, second](double rho, const Vec& y) {
    const MetricJet a = first.jet(rho, y.segment(0, 1));
    const MetricJet b = second.jet(rho, y.segment(1, 1));
    MetricJet j;
    j.h = Mat::Zero(2, 2);
    j.h(0, 0) = a.h(0, 0);
    j.h(1, 1) = b.h(0, 0);
    j.dh_drho = Mat::Zero(2, 2);
    j.dh_drho(0, 0) = a.dh_drho(0, 0);
    j.dh_drho(1, 1) = b.dh_drho(0, 0);
    j.dh_dy = {Mat::Zero(2, 2), Mat::Zero(2, 2)};
    j.dh_dy[0](0, 0) = a.dh_dy[0](0, 0);
    j.dh_dy[1](1, 1) = b.dh_dy[0](0, 0);
    return j;
  };
  Vec lo(2), hi(2);
  lo << first.lower(0), second.lower(0);
  hi << first.upper(0), second.upper(0);
  return BoundaryMetricFamily(first.name() + "*" + second.name(), 2,
                              {first.chart(0), second.chart(0)},
                              std::min(first.rho_max(), second.rho_max()), jet, lo, hi);
}

BoundaryMetricFamily from_expressions(int n, const std::vector<std::vector<std::string>>& entries,
                                      bool periodic, double rho_max) {
  if (n < 1 || n + 1 > Dual::kMaxVars) throw InvalidArgument("expression family: bad dimension");
  if (static_cast<int>(entries.size()) != n)
    throw InvalidArgument("expression family: need an n x n table of entries");
  std::vector<std::vector<Expression>> ex(n, std::vector<Expression>(n, Expression::constant(0)));
  for (int i = 0; i < n; ++i) {
    if (static_cast<int>(entries[i].size()) != n)
      throw InvalidArgument("expression family: need an n x n table of entries");
    for (int k = i; k < n; ++k) {
      ex[i][k] = Expression::parse(entries[i][k]);
      if (ex[i][k].max_slot() > n)
        throw InvalidArgument("expression family: '" + entries[i][k] + "' uses y beyond y" +
                              std::to_string(n));
    }
  }
  auto jet = [n, ex](double rho, const Vec& y) {
    std::vector<Dual> vars(n + 1);
    vars[0] = Dual::variable(rho, 0);
    for (int k = 0; k < n; ++k) vars[k + 1] = Dual::variable(y[k], k + 1);
    MetricJet j;
    j.h = Mat::Zero(n, n);
    j.dh_drho = Mat::Zero(n, n);
    j.dh_dy.assign(n, Mat::Zero(n, n));
    for (int i = 0; i < n; ++i) {
      for (int k = i; k < n; ++k) {
        const Dual v = ex[i][k].eval(std::span<const Dual>(vars));
        j.h(i, k) = j.h(k, i) = v.v;
        j.dh_drho(i, k) = j.dh_drho(k, i) = v.d[0];
        for (int m = 0; m < n; ++m) j.dh_dy[m](i, k) = j.dh_dy[m](k, i) = v.d[m + 1];
      }
    }
    return j;
  };
  return BoundaryMetricFamily("expression", n,
                              std::vector<ChartKind>(n, periodic ? ChartKind::periodic
                                                                 : ChartKind::affine),
                              rho_max, jet);
}

namespace {

TrigPoly trig_from_json(const nlohmann::json& j) {
  TrigPoly p;
  if (j.is_null()) return p;
  if (j.is_number()) {
    p.cos_coeffs = {j.get<double>()};
    return p;
  }
  if (j.contains("cos")) p.cos_coeffs = j.at("cos").get<std::vector<double>>();
  if (j.contains("sin")) p.sin_coeffs = j.at("sin").get<std::vector<double>>();
  return p;
}

}  // namespace

BoundaryMetricFamily make_family(const nlohmann::json& spec) {
  if (!spec.is_object() || !spec.contains("family"))
    throw InvalidArgument("metric spec: missing \"family\"");
  const std::string name = spec.at("family").get<std::string>();
  const nlohmann::json params = spec.value("params", nlohmann::json::object());
  const bool has_rho_max = spec.contains("rho_max");
  const double rho_max = has_rho_max ? spec.at("rho_max").get<double>() : 0.0;
  if (has_rho_max && !(rho_max > 0)) throw InvalidArgument("metric spec: rho_max must be positive");

  BoundaryMetricFamily fam = [&]() -> BoundaryMetricFamily {
    if (name == "half-plane")
      return half_plane(has_rho_max ? rho_max : 1e3, params.value("y_bound", 1e6));
    if (name == "disc-normal") return disc_normal(has_rho_max ? rho_max : 1.9);
    if (name == "perturbed")
      return perturbed(trig_from_json(params.value("a", nlohmann::json())),
                       trig_from_json(params.value("b", nlohmann::json())),
                       has_rho_max ? rho_max : 2.0);
    if (name == "half-space") {
      const double rm = has_rho_max ? rho_max : 1e3;
      return product(half_plane(rm), half_plane(rm));
    }
    if (name == "product") {
      const auto& f = params.at("factors");
      if (!f.is_array() || f.size() != 2)
        throw InvalidArgument("metric spec: product needs two factors");
      auto fam2 = product(make_family(f[0]), make_family(f[1]));
      if (!has_rho_max) return fam2;
      return BoundaryMetricFamily(fam2.name(), 2, fam2.chart(), rho_max,
                                  [fam2](double r, const Vec& y) { return fam2.jet(r, y); },
                                  Vec::Constant(2, std::max(fam2.lower(0), fam2.lower(1))),
                                  Vec::Constant(2, std::min(fam2.upper(0), fam2.upper(1))));
    }
    if (name == "expression") {
      const int n = params.value("n", 1);
      std::vector<std::vector<std::string>> entries;
      const auto& h = params.at("h");
      if (h.is_string())
        entries = {{h.get<std::string>()}};
      else
        entries = h.get<std::vector<std::vector<std::string>>>();
      return from_expressions(n, entries, params.value("periodic", true),
                              has_rho_max ? rho_max : 0.5);
    }
    throw InvalidArgument("metric spec: unknown family '" + name + "'");
  }();
  fam.validate();
  return fam;
}

BoundaryMetricFamily make_family(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(std::string("metric spec: ") + e.what());
  }
  return make_family(j);
}

BoundaryMetricFamily deformed(const BoundaryMetricFamily& base, double s,
                              std::function<double(const Vec&)> c,
                              std::function<Vec(const Vec&)> dc) {
  auto jet = [base, s, c = std::move(c), dc = std::move(dc)](double rho, const Vec& y) {
    MetricJet j = base.jet(rho, y);
    const double cv = c(y);
    const double r4 = rho * rho * rho * rho;
    const double f = 1.0 + s * r4 * cv;
    const Vec g = dc(y);
    for (std::size_t k = 0; k < j.dh_dy.size(); ++k)
      j.dh_dy[k] = j.dh_dy[k] * f + j.h * (s * r4 * g[k]);
    j.dh_drho = j.dh_drho * f + j.h * (4.0 * s * rho * rho * rho * cv);
    j.h *= f;
    return j;
  };
  return BoundaryMetricFamily(base.name() + "+deformation", base.dim(), base.chart(),
                              base.rho_max(), jet,
                              Vec::Constant(base.dim(), base.lower(0)),
                              Vec::Constant(base.dim(), base.upper(0)));
}

}  // namespace ahx

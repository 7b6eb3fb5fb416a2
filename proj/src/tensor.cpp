#include "ahx/tensor.hpp"

#include "ahx/quadrature.hpp"

#include <algorithm>
#include <cmath>

namespace ahx {

namespace {

int array_rows(int rank, int n) { return rank == 0 ? 1 : n + 1; }
int array_cols(int rank, int n) { return rank == 2 ? n + 1 : 1; }

}  // namespace

SymmetricTensorField::SymmetricTensorField(int rank, int dim_boundary, int weight,
                                           ComponentFn components, DerivativeFn derivatives)
    : rank_(rank), n_(dim_boundary), weight_(weight), comp_(std::move(components)),
      deriv_(std::move(derivatives)) {
  if (rank_ < 0 || rank_ > 2) throw InvalidArgument("tensor: rank must be 0, 1 or 2");
  if (n_ < 1) throw InvalidArgument("tensor: boundary dimension must be >= 1");
  if (!comp_) throw InvalidArgument("tensor: missing component function");
}

Mat SymmetricTensorField::components(double rho, const Vec& y) const {
  Mat c = comp_(rho, y);
  if (c.rows() != array_rows(rank_, n_) || c.cols() != array_cols(rank_, n_))
    throw InvalidArgument("tensor: component array has the wrong shape");
  return c;
}

std::vector<Mat> SymmetricTensorField::derivatives(double rho, const Vec& y) const {
  if (deriv_) return deriv_(rho, y);
  std::vector<Mat> d(n_ + 1);
  const double hr = 1e-6 * std::max(1.0, std::abs(rho));
  d[0] = (comp_(rho + hr, y) - comp_(rho - hr, y)) / (2 * hr);
  for (int k = 0; k < n_; ++k) {
    const double hy = 1e-6 * std::max(1.0, std::abs(y[k]));
    Vec yp = y, ym = y;
    yp[k] += hy;
    ym[k] -= hy;
    d[k + 1] = (comp_(rho, yp) - comp_(rho, ym)) / (2 * hy);
  }
  return d;
}

void SymmetricTensorField::validate_weight(const Vec& y) const {
  double prev = -1.0;
  for (double rho : {1e-2, 1e-3, 1e-4}) {
    const double v = std::pow(rho, -weight_) * components(rho, y).cwiseAbs().maxCoeff();
    if (!std::isfinite(v)) throw InvalidArgument("tensor: components not finite near the boundary");
    if (prev > 1e-300 && v > 5.0 * prev)
      throw InvalidArgument("tensor: components decay slower than the declared weight rho^" +
                            std::to_string(weight_));
    prev = v;
  }
}

SymmetricTensorField SymmetricTensorField::zero(int rank, int n, int weight) {
  const int r = array_rows(rank, n), c = array_cols(rank, n);
  return SymmetricTensorField(
      rank, n, weight, [r, c](double, const Vec&) { return Mat(Mat::Zero(r, c)); },
      [r, c, n](double, const Vec&) { return std::vector<Mat>(n + 1, Mat::Zero(r, c)); });
}

SymmetricTensorField SymmetricTensorField::metric(const BoundaryMetricFamily& family) {
  const int n = family.dim();
  auto comp = [family, n](double rho, const Vec& y) {
    Mat g = Mat::Zero(n + 1, n + 1);
    const double r2 = rho * rho;
    g(0, 0) = 1.0 / r2;
    g.bottomRightCorner(n, n) = family.h(rho, y) / r2;
    return g;
  };
  auto deriv = [family, n](double rho, const Vec& y) {
    const MetricJet j = family.jet(rho, y);
    const double r2 = rho * rho, r3 = r2 * rho;
    std::vector<Mat> d(n + 1, Mat::Zero(n + 1, n + 1));
    d[0](0, 0) = -2.0 / r3;
    d[0].bottomRightCorner(n, n) = j.dh_drho / r2 - 2.0 * j.h / r3;
    for (int k = 0; k < n; ++k) d[k + 1].bottomRightCorner(n, n) = j.dh_dy[k] / r2;
    return d;
  };
  return SymmetricTensorField(2, n, -2, comp, deriv);
}

SymmetricTensorField SymmetricTensorField::from_expressions(
    int rank, int n, int weight, const std::vector<std::vector<std::string>>& entries) {
  const int r = array_rows(rank, n), c = array_cols(rank, n);
  // Table of expressions laid out like the component array.
  std::vector<std::vector<Expression>> ex(r, std::vector<Expression>(c, Expression::constant(0)));
  auto parse = [n](const std::string& s) {
    Expression e = Expression::parse(s);
    if (e.max_slot() > n)
      throw InvalidArgument("tensor: '" + s + "' uses y beyond y" + std::to_string(n));
    return e;
  };
  if (rank == 0) {
    if (entries.size() != 1 || entries[0].size() != 1)
      throw InvalidArgument("tensor: rank 0 needs one expression");
    ex[0][0] = parse(entries[0][0]);
  } else if (rank == 1) {
    if (entries.size() != 1 || static_cast<int>(entries[0].size()) != n + 1)
      throw InvalidArgument("tensor: rank 1 needs n+1 expressions");
    for (int i = 0; i <= n; ++i) ex[i][0] = parse(entries[0][i]);
  } else {
    if (static_cast<int>(entries.size()) != n + 1)
      throw InvalidArgument("tensor: rank 2 needs an (n+1)x(n+1) table");
    for (int i = 0; i <= n; ++i) {
      if (static_cast<int>(entries[i].size()) != n + 1)
        throw InvalidArgument("tensor: rank 2 needs an (n+1)x(n+1) table");
      for (int k = i; k <= n; ++k) ex[i][k] = ex[k][i] = parse(entries[i][k]);
    }
  }
  auto comp = [ex, r, c, n](double rho, const Vec& y) {
    std::vector<double> vars(n + 1);
    vars[0] = rho;
    for (int k = 0; k < n; ++k) vars[k + 1] = y[k];
    Mat m(r, c);
    for (int i = 0; i < r; ++i)
      for (int k = 0; k < c; ++k) m(i, k) = ex[i][k].eval(std::span<const double>(vars));
    return m;
  };
  auto deriv = [ex, r, c, n](double rho, const Vec& y) {
    std::vector<Dual> vars(n + 1);
    vars[0] = Dual::variable(rho, 0);
    for (int k = 0; k < n; ++k) vars[k + 1] = Dual::variable(y[k], k + 1);
    std::vector<Mat> d(n + 1, Mat(r, c));
    for (int i = 0; i < r; ++i)
      for (int k = 0; k < c; ++k) {
        const Dual v = ex[i][k].eval(std::span<const Dual>(vars));
        for (int s = 0; s <= n; ++s) d[s](i, k) = v.d[s];
      }
    return d;
  };
  return SymmetricTensorField(rank, n, weight, comp, deriv);
}

SymmetricTensorField SymmetricTensorField::from_json(const nlohmann::json& spec, int n) {
  const int rank = spec.at("rank").get<int>();
  const int weight = spec.at("weight").get<int>();
  const auto& c = spec.at("components");
  std::vector<std::vector<std::string>> entries;
  if (rank == 0)
    entries = {{c.get<std::string>()}};
  else if (rank == 1)
    entries = {c.get<std::vector<std::string>>()};
  else
    entries = c.get<std::vector<std::vector<std::string>>>();
  return from_expressions(rank, n, weight, entries);
}

Vec lift_vector(const BoundaryMetricFamily& family, const BPhasePoint& p) {
  const int n = family.dim();
  const MetricEval m = eval_metric_unchecked(family, p.rho, p.y);
  Vec v(n + 1);
  v[0] = p.xi_bar0 * p.rho;
  v.tail(n) = p.rho * p.rho * (m.h_inv * p.eta);
  return v;
}

double lift_tensor(const BoundaryMetricFamily& family, const SymmetricTensorField& f,
                   const BPhasePoint& p) {
  if (!(p.rho > 0)) {
    if (f.weight() + f.rank() > 0) return 0.0;
    throw InvalidArgument("lift_tensor: boundary value undefined for weight " +
                          std::to_string(f.weight()) + " and rank " + std::to_string(f.rank()));
  }
  const Mat c = f.components(p.rho, p.y);
  if (f.rank() == 0) return c(0, 0);
  const Vec v = lift_vector(family, p);
  if (f.rank() == 1) return c.col(0).dot(v);
  return v.dot(c * v);
}

std::vector<Mat> christoffel(const BoundaryMetricFamily& family, double rho, const Vec& y) {
  const int n = family.dim();
  const int N = n + 1;
  const MetricJet j = family.jet(rho, y);
  const double r2 = rho * rho, r3 = r2 * rho;
  // dg[c](a, b) = d_c g_ab.
  std::vector<Mat> dg(N, Mat::Zero(N, N));
  dg[0](0, 0) = -2.0 / r3;
  dg[0].bottomRightCorner(n, n) = j.dh_drho / r2 - 2.0 * j.h / r3;
  for (int k = 0; k < n; ++k) dg[k + 1].bottomRightCorner(n, n) = j.dh_dy[k] / r2;
  Mat ginv = Mat::Zero(N, N);
  ginv(0, 0) = r2;
  ginv.bottomRightCorner(n, n) = r2 * j.h.inverse();

  std::vector<Mat> gamma(N, Mat::Zero(N, N));
  for (int a = 0; a < N; ++a)
    for (int b = a; b < N; ++b) {
      Vec lower(N);  // Gamma_{d,ab}
      for (int d = 0; d < N; ++d) lower[d] = 0.5 * (dg[a](b, d) + dg[b](a, d) - dg[d](a, b));
      const Vec upper = ginv * lower;
      for (int c = 0; c < N; ++c) gamma[c](a, b) = gamma[c](b, a) = upper[c];
    }
  return gamma;
}

SymmetricTensorField sym_derivative(const BoundaryMetricFamily& family,
                                    const SymmetricTensorField& q) {
  const int n = q.dim();
  if (n != family.dim()) throw InvalidArgument("sym_derivative: dimension mismatch");
  if (q.rank() > 1) throw InvalidArgument("sym_derivative: q must have rank 0 or 1");
  if (q.rank() == 0) {
    auto comp = [q, n](double rho, const Vec& y) {
      const std::vector<Mat> d = q.derivatives(rho, y);
      Mat v(n + 1, 1);
      for (int a = 0; a <= n; ++a) v(a, 0) = d[a](0, 0);
      return v;
    };
    return SymmetricTensorField(1, n, q.weight() - 1, comp);
  }
  auto comp = [q, n, family](double rho, const Vec& y) {
    const std::vector<Mat> d = q.derivatives(rho, y);
    const Vec qv = q.components(rho, y).col(0);
    const std::vector<Mat> gamma = christoffel(family, rho, y);
    Mat out(n + 1, n + 1);
    for (int a = 0; a <= n; ++a)
      for (int b = a; b <= n; ++b) {
        double v = 0.5 * (d[a](b, 0) + d[b](a, 0));
        for (int c = 0; c <= n; ++c) v -= gamma[c](a, b) * qv[c];
        out(a, b) = out(b, a) = v;
      }
    return out;
  };
  return SymmetricTensorField(2, n, q.weight() - 1, comp);
}

double collar_cutoff(double rho, double inner, double outer) {
  if (rho <= inner) return 1.0;
  if (rho >= outer) return 0.0;
  const double t = (rho - inner) / (outer - inner);
  const double a = std::exp(-1.0 / (1.0 - t)), b = std::exp(-1.0 / t);
  return a / (a + b);
}

namespace {

// int_0^rho g(s) ds by a fixed high-order Gauss-Legendre rule.
template <class G>
double integrate_from_zero(double rho, G&& g) {
  const GaussRule& r = gauss_legendre(24);
  double acc = 0.0;
  for (std::size_t i = 0; i < r.nodes.size(); ++i) {
    const double s = 0.5 * rho * (1.0 + r.nodes[i]);
    acc += r.weights[i] * g(s);
  }
  return 0.5 * rho * acc;
}

}  // namespace

GaugeResult gauge_normalize(const BoundaryMetricFamily& family, const SymmetricTensorField& f,
                            double cut_inner, double cut_outer, double residual_tol) {
  if (family.dim() != 1 || f.dim() != 1)
    throw InvalidArgument("gauge_normalize: only implemented for n = 1");
  if (f.rank() < 1) throw InvalidArgument("gauge_normalize: f must have rank 1 or 2");
  if (!f.admissible()) throw InvalidArgument("gauge_normalize: f is not admissible");
  if (!(0 < cut_inner && cut_inner < cut_outer))
    throw InvalidArgument("gauge_normalize: need 0 < cut_inner < cut_outer");

  std::function<Mat(double, const Vec&)> comp;
  if (f.rank() == 1) {
    comp = [f, cut_inner, cut_outer](double rho, const Vec& y) {
      const double v = integrate_from_zero(rho, [&](double s) { return f.components(s, y)(0, 0); });
      return Mat(Mat::Constant(1, 1, collar_cutoff(rho, cut_inner, cut_outer) * v));
    };
  } else {
    // q_rho = rho^{-1} int_0^rho s f_{rho rho} ds,
    // q_y   = (h / rho^2) int_0^rho (s^2 / h) (2 f_{rho y} - d_y q_rho) ds.
    auto dy_qrho = [f](double rho, const Vec& y) {
      return integrate_from_zero(rho, [&](double s) { return s * f.derivatives(s, y)[1](0, 0); }) / rho;
    };
    comp = [f, family, dy_qrho, cut_inner, cut_outer](double rho, const Vec& y) {
      const double chi = collar_cutoff(rho, cut_inner, cut_outer);
      Mat q = Mat::Zero(2, 1);
      if (chi == 0.0 || rho == 0.0) return q;
      q(0, 0) = integrate_from_zero(rho, [&](double s) { return s * f.components(s, y)(0, 0); }) / rho;
      const double h = family.h(rho, y)(0, 0);
      const double integral = integrate_from_zero(rho, [&](double s) {
        const double hs = family.h(s, y)(0, 0);
        return s * s / hs * (2.0 * f.components(s, y)(0, 1) - dy_qrho(s, y));
      });
      q(1, 0) = h / (rho * rho) * integral;
      return Mat(chi * q);
    };
  }
  SymmetricTensorField q(f.rank() - 1, 1, f.weight() + 1, comp);

  // Residual of the normal components on the collar.
  const SymmetricTensorField dq = sym_derivative(family, q);
  double residual = 0.0;
  for (int i = 1; i <= 10; ++i) {
    const double rho = cut_inner * i / 10.0 * 0.98;
    for (int k = 0; k < 8; ++k) {
      const Vec y = Vec::Constant(1, -kPi + 2.0 * kPi * (k + 0.5) / 8.0);
      const Mat fc = f.components(rho, y);
      const Mat dc = dq.components(rho, y);
      if (f.rank() == 1) {
        residual = std::max(residual, std::abs(fc(0, 0) - dc(0, 0)));
      } else {
        for (int a = 0; a < fc.cols(); ++a)
          residual = std::max(residual, std::abs(fc(0, a) - dc(0, a)));
      }
    }
  }
  if (!(residual <= residual_tol))
    throw ConvergenceFailure("gauge_normalize: residual " + std::to_string(residual) +
                             " above tolerance");
  return {q, residual};
}

}  // namespace ahx

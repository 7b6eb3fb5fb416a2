#include "ahx/recover.hpp"

#include "ahx/flow.hpp"
#include "ahx/parallel.hpp"
#include "ahx/renorm.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>

namespace ahx {

namespace {

// Unknowns of a symmetric n x n matrix in the order (0,0), (0,1), ..., (1,1), ...
int sym_size(int n) { return n * (n + 1) / 2; }

Vec quadratic_row(const Vec& w) {
  const int n = static_cast<int>(w.size());
  Vec row(sym_size(n));
  int c = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) row[c++] = (i == j ? 1.0 : 2.0) * w[i] * w[j];
  return row;
}

Mat sym_from(const Vec& v, int n) {
  Mat m(n, n);
  int c = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m(i, j) = m(j, i) = v[c++];
  return m;
}

// Solves for the symmetric matrix Q with w_d^T Q w_d = values[d].
Mat polarize(const std::vector<Vec>& dirs, const Vec& values, const char* who) {
  const int n = static_cast<int>(dirs.front().size());
  const int m = static_cast<int>(dirs.size());
  if (m < sym_size(n))
    throw InvalidArgument(std::string(who) + ": need at least n(n+1)/2 directions");
  Mat A(m, sym_size(n));
  for (int d = 0; d < m; ++d) A.row(d) = quadratic_row(dirs[d]).transpose();
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec s = svd.singularValues();
  if (s.minCoeff() <= 1e-8 * s.maxCoeff())
    throw InvalidArgument(std::string(who) + ": ill-conditioned polarization (directions too clustered)");
  return sym_from(svd.solve(values), n);
}

// Least squares in powers of x (degree `deg`).
Vec poly_fit(const std::vector<double>& x, const std::vector<double>& y, int deg) {
  const int m = static_cast<int>(x.size());
  Mat A(m, deg + 1);
  Vec b(m);
  for (int i = 0; i < m; ++i) {
    double p = 1.0;
    for (int k = 0; k <= deg; ++k, p *= x[i]) A(i, k) = p;
    b[i] = y[i];
  }
  return A.colPivHouseholderQr().solve(b);
}

double poly_rms(const std::vector<double>& x, const std::vector<double>& y, const Vec& c) {
  double acc = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    double v = 0.0, p = 1.0;
    for (int k = 0; k < c.size(); ++k, p *= x[i]) v += c[k] * p;
    acc += (v - y[i]) * (v - y[i]);
  }
  return std::sqrt(acc / x.size());
}

void check_samples(const LengthSampleSet& s, const char* who) {
  if (s.directions.empty() || s.deltas.size() < 3)
    throw InvalidArgument(std::string(who) + ": need directions and at least 3 deltas");
  if (s.L.rows() != static_cast<int>(s.directions.size()) ||
      s.L.cols() != static_cast<int>(s.deltas.size()))
    throw InvalidArgument(std::string(who) + ": sample table is incomplete");
}

}  // namespace

std::vector<double> default_delta_grid() {
  std::vector<double> d;
  for (double x = 0.2; x > 0.003; x *= 0.5) d.push_back(x);
  return d;
}

LengthSampleSet synthesize_samples(const BoundaryMetricFamily& family, const Vec& y0,
                                   const std::vector<Vec>& directions,
                                   const std::vector<double>& deltas, double noise,
                                   std::uint64_t seed, int jobs) {
  if (y0.size() != family.dim()) throw InvalidArgument("synthesize_samples: wrong y0 dimension");
  if (directions.empty() || deltas.empty())
    throw InvalidArgument("synthesize_samples: empty direction or delta list");
  for (std::size_t i = 0; i < deltas.size(); ++i) {
    if (!(deltas[i] > 0) || deltas[i] > kDefaultDeltaMax)
      throw InvalidArgument("synthesize_samples: deltas must lie in (0, delta_max]");
    if (i > 0 && !(deltas[i] < deltas[i - 1]))
      throw InvalidArgument("synthesize_samples: deltas must be decreasing");
  }
  if (noise < 0) throw InvalidArgument("synthesize_samples: noise must be nonnegative");
  for (const Vec& w : directions)
    if (w.size() != family.dim() || w.norm() == 0.0)
      throw InvalidArgument("synthesize_samples: directions must be nonzero covectors");

  LengthSampleSet s;
  s.y0 = y0;
  s.directions = directions;
  s.deltas = deltas;
  s.noise = noise;
  s.periodic = family.all_periodic();
  const long nd = static_cast<long>(directions.size()), nk = static_cast<long>(deltas.size());
  s.L.resize(nd, nk);
  parallel_for(nd * nk, [&](long idx) {
    const long d = idx / nk, k = idx % nk;
    const BoundaryCovector z{y0, directions[d] / deltas[k], Side::incoming};
    // The orbit has coordinate size about delta, so the absolute tolerance
    // shrinks with it; otherwise the error in L grows like 1/delta.
    TraceOptions o;
    o.atol *= deltas[k];
    s.L(d, k) = renormalized_length(trace_geodesic(family, z, o)).L;
  }, jobs);
  if (noise > 0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-noise, noise);
    for (long d = 0; d < nd; ++d)
      for (long k = 0; k < nk; ++k) s.L(d, k) += u(rng);
  }
  return s;
}

H0Estimate recover_h0(const LengthSampleSet& samples) {
  check_samples(samples, "recover_h0");
  H0Estimate e;
  const int nd = static_cast<int>(samples.directions.size());
  e.norms.resize(nd);
  Vec q(nd);
  for (int d = 0; d < nd; ++d) {
    std::vector<double> y(samples.deltas.size());
    for (std::size_t k = 0; k < y.size(); ++k)
      y[k] = samples.L(d, k) - 2.0 * std::log(2.0 * samples.deltas[k]);
    const Vec c = poly_fit(samples.deltas, y, 2);
    e.coeffs.push_back(c);
    e.fit_residual = std::max(e.fit_residual, poly_rms(samples.deltas, y, c));
    e.norms[d] = std::exp(-0.5 * c[0]);
    q[d] = e.norms[d] * e.norms[d];
  }
  const Mat g = polarize(samples.directions, q, "recover_h0");
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success)
    throw InvalidArgument("recover_h0: recovered quadratic form is not positive definite");
  e.h0 = g.inverse();
  return e;
}

// ---------------------------------------------------------------------------

std::vector<FirstJetEstimate> recover_first_jet(const std::vector<LengthSampleSet>& sets,
                                                const std::vector<H0Estimate>& h0s, int fit_order) {
  if (sets.size() != h0s.size()) throw InvalidArgument("recover_first_jet: sizes differ");
  if (sets.empty()) throw InvalidArgument("recover_first_jet: no sample sets");
  if (fit_order < 2) throw InvalidArgument("recover_first_jet: fit order must be at least 2");
  const int n = static_cast<int>(sets.front().y0.size());
  const int m = static_cast<int>(sets.size());
  for (const auto& s : sets) {
    check_samples(s, "recover_first_jet");
    if (static_cast<int>(s.deltas.size()) < fit_order + 2)
      throw InvalidArgument("recover_first_jet: not enough deltas for the fit order");
  }
  if (m < n + 1)
    throw InvalidArgument("recover_first_jet: insufficient neighbouring y0 samples for tangential derivatives");

  // Inverse metrics G = h0^{-1} at every sample point.
  std::vector<Mat> G(m);
  for (int i = 0; i < m; ++i) G[i] = h0s[i].h0.inverse();

  auto offset = [&](const Vec& a, const Vec& b, bool periodic) {
    Vec d = a - b;
    if (periodic)
      for (int k = 0; k < n; ++k) d[k] = wrap_angle(d[k]);
    return d;
  };

  std::vector<FirstJetEstimate> out(m);
  for (int i = 0; i < m; ++i) {
    const LengthSampleSet& s = sets[i];
    // Nearest neighbours for a local fit G(y) ~ G_i + sum_k dG_k (y - y_i)_k
    // (+ quadratic terms when enough points are available).
    std::vector<std::pair<double, int>> by_dist;
    for (int j = 0; j < m; ++j)
      if (j != i) by_dist.push_back({offset(sets[j].y0, s.y0, s.periodic).norm(), j});
    std::sort(by_dist.begin(), by_dist.end());
    const int quad = sym_size(n);
    const bool use_quad = static_cast<int>(by_dist.size()) >= n + quad + 1;
    const int cols = n + (use_quad ? quad : 0);
    const int take = std::min<int>(by_dist.size(), use_quad ? cols + 1 : std::max(n, 2));
    Mat A(take, cols);
    for (int r = 0; r < take; ++r) {
      const Vec d = offset(sets[by_dist[r].second].y0, s.y0, s.periodic);
      A.row(r).head(n) = d.transpose();
      if (use_quad) A.row(r).tail(quad) = 0.5 * quadratic_row(d).transpose();
    }
    const auto qr = A.colPivHouseholderQr();
    if (qr.rank() < cols)
      throw InvalidArgument("recover_first_jet: neighbouring y0 samples do not span the boundary");
    std::vector<Mat> dG(n, Mat::Zero(n, n));
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) {
        Vec rhs(take);
        for (int r = 0; r < take; ++r) rhs[r] = G[by_dist[r].second](a, b) - G[i](a, b);
        const Vec c = qr.solve(rhs);
        for (int k = 0; k < n; ++k) dG[k](a, b) = dG[k](b, a) = c[k];
      }

    FirstJetEstimate& e = out[i];
    e.y0 = s.y0;
    const int nd = static_cast<int>(s.directions.size());
    e.slopes.resize(nd);
    e.slope_errors.resize(nd);
    e.corrections.resize(nd);
    e.quadratic_values.resize(nd);
    std::vector<Vec> units(nd);
    for (int d = 0; d < nd; ++d) {
      const double nu = h0s[i].norms[d];
      units[d] = s.directions[d] / nu;
      const Vec& w = units[d];
      // F(delta') with delta' = delta / |omega0|.
      std::vector<double> x(s.deltas.size()), y(s.deltas.size());
      for (std::size_t k = 0; k < x.size(); ++k) {
        x[k] = s.deltas[k] / nu;
        y[k] = s.L(d, k) - 2.0 * std::log(2.0 * x[k]);
      }
      const Vec c = poly_fit(x, y, fit_order);
      const Vec c_lo = poly_fit(x, y, fit_order - 1);
      e.slopes[d] = c[1];
      e.slope_errors[d] = std::abs(c[1] - c_lo[1]);
      // Tangential terms: -omega^k d_k G(omega, omega) - G(omega'(pi), omega),
      // with omega'(pi)_i = -d_i G(omega, omega).
      const Vec up = G[i] * w;
      Vec dq(n);
      for (int k = 0; k < n; ++k) dq[k] = w.dot(dG[k] * w);
      const double t1 = -up.dot(dq);
      const double t2 = up.dot(dq);
      e.corrections[d] = t1 + t2;
      e.quadratic_values[d] = -(2.0 / kPi) * (e.slopes[d] - e.corrections[d]);
    }
    e.drho_h_inv = polarize(units, e.quadratic_values, "recover_first_jet");
    e.drho_h = -h0s[i].h0 * e.drho_h_inv * h0s[i].h0;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model fitting

TrigPoly trig_interpolant(const std::vector<double>& values) {
  const int m = static_cast<int>(values.size());
  if (m == 0) throw InvalidArgument("trig_interpolant: no values");
  TrigPoly p;
  const int K = m / 2;
  p.cos_coeffs.assign(K + 1, 0.0);
  p.sin_coeffs.assign(K + 1, 0.0);
  for (int k = 0; k <= K; ++k) {
    double c = 0.0, s = 0.0;
    for (int j = 0; j < m; ++j) {
      const double y = 2.0 * kPi * j / m;
      c += values[j] * std::cos(k * y);
      s += values[j] * std::sin(k * y);
    }
    const bool edge = (k == 0) || (m % 2 == 0 && k == K);
    p.cos_coeffs[k] = (edge ? 1.0 : 2.0) * c / m;
    p.sin_coeffs[k] = (edge ? 0.0 : 2.0 * s / m);
  }
  return p;
}

namespace {

struct JetModel {
  int nodes;   // 1 for a y-independent model
  int k_max;

  int size() const { return nodes * (k_max + 1); }

  TrigPoly coefficient(const Vec& p, int k) const {
    std::vector<double> v(p.data() + k * nodes, p.data() + (k + 1) * nodes);
    return trig_interpolant(v);
  }

  BoundaryMetricFamily family(const Vec& p) const {
    std::vector<TrigPoly> c;
    for (int k = 0; k <= k_max; ++k) c.push_back(coefficient(p, k));
    auto jet = [c](double rho, const Vec& y) {
      const double y0 = y[0];
      double h = c[0](y0), hr = 0.0, hy = c[0].derivative(y0);
      if (c.size() > 1) {
        h += rho * c[1](y0);
        hr += c[1](y0);
        hy += rho * c[1].derivative(y0);
      }
      if (c.size() > 2) {
        h += 0.5 * rho * rho * c[2](y0);
        hr += rho * c[2](y0);
        hy += 0.5 * rho * rho * c[2].derivative(y0);
      }
      MetricJet j;
      j.h = Mat::Constant(1, 1, h);
      j.dh_drho = Mat::Constant(1, 1, hr);
      j.dh_dy = {Mat::Constant(1, 1, hy)};
      return j;
    };
    return BoundaryMetricFamily("jet-model", 1, {ChartKind::periodic}, 1.0, jet);
  }
};

struct FlatSample {
  double y0;
  double w;
  double delta;
  double L;
};

}  // namespace

JetFitReport recover_jet_fit(const std::vector<LengthSampleSet>& sets, const JetFitOptions& opts) {
  if (sets.empty()) throw InvalidArgument("recover_jet_fit: no sample sets");
  if (opts.k_max < 0 || opts.k_max > 2) throw InvalidArgument("recover_jet_fit: k_max must be 0, 1 or 2");
  std::vector<FlatSample> data;
  std::vector<double> points;
  for (const auto& s : sets) {
    check_samples(s, "recover_jet_fit");
    if (s.y0.size() != 1) throw InvalidArgument("recover_jet_fit: model fitting supports n = 1");
    points.push_back(reduce_angle(s.y0[0]));
    for (std::size_t d = 0; d < s.directions.size(); ++d)
      for (std::size_t k = 0; k < s.deltas.size(); ++k)
        data.push_back({s.y0[0], s.directions[d][0], s.deltas[k], s.L(d, k)});
  }
  std::sort(points.begin(), points.end());
  const int distinct = static_cast<int>(std::unique(points.begin(), points.end(),
                                                    [](double a, double b) { return std::abs(a - b) < 1e-12; }) -
                                        points.begin());
  const JetModel model{distinct >= 8 ? 8 : 1, opts.k_max};
  const int P = model.size();
  const int M = static_cast<int>(data.size());
  if (M < P) throw InvalidArgument("recover_jet_fit: fewer samples than parameters");

  // Start from h0 = mean recovered norm relation, higher coefficients zero.
  Vec p = Vec::Zero(P);
  {
    double mean = 0.0;
    for (const auto& s : sets) mean += recover_h0(s).h0(0, 0);
    p.head(model.nodes).setConstant(mean / sets.size());
  }

  auto residual = [&](const Vec& params, Vec& r) -> bool {
    BoundaryMetricFamily fam = model.family(params);
    r.resize(M);
    std::atomic<bool> ok{true};
    parallel_for(M, [&](long i) {
      if (!ok) return;
      try {
        const FlatSample& f = data[i];
        const BoundaryCovector z{Vec::Constant(1, f.y0), Vec::Constant(1, f.w / f.delta), Side::incoming};
        r[i] = renormalized_length(trace_geodesic(fam, z)).L - f.L;
      } catch (const Error&) {
        ok = false;
      }
    }, opts.jobs);
    return ok;
  };

  JetFitReport rep;
  rep.parameters = P;
  Vec r;
  if (!residual(p, r)) throw ConvergenceFailure("recover_jet_fit: initial model cannot be traced");
  double cost = r.squaredNorm();
  double mu = 1e-3;
  Mat J(M, P);
  for (int it = 0; it < opts.max_iters; ++it) {
    rep.iterations = it + 1;
    for (int j = 0; j < P; ++j) {
      Vec pp = p;
      const double h = opts.fd_step * std::max(1.0, std::abs(p[j]));
      pp[j] += h;
      Vec rp;
      if (!residual(pp, rp)) {
        pp[j] = p[j] - h;
        if (!residual(pp, rp)) throw ConvergenceFailure("recover_jet_fit: Jacobian probe failed");
        J.col(j) = (r - rp) / h;
      } else {
        J.col(j) = (rp - r) / h;
      }
    }
    const Mat JtJ = J.transpose() * J;
    const Vec g = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 12; ++tries) {
      Mat A = JtJ;
      A.diagonal() += mu * JtJ.diagonal().cwiseMax(1e-12);
      const Vec step = A.ldlt().solve(-g);
      Vec rt;
      const Vec pt = p + step;
      if (residual(pt, rt) && rt.squaredNorm() < cost) {
        const double rel = step.norm() / std::max(1.0, p.norm());
        p = pt;
        r = rt;
        cost = rt.squaredNorm();
        mu = std::max(mu / 5.0, 1e-12);
        improved = true;
        if (rel < 1e-10) rep.converged = true;
        break;
      }
      mu *= 10.0;
    }
    if (!improved || rep.converged) {
      // No further decrease: the minimum is resolved to the data noise.
      rep.converged = true;
      break;
    }
  }

  rep.fit_residuals = r;
  rep.residual_rms = std::sqrt(cost / M);
  Eigen::JacobiSVD<Mat> svd(J, Eigen::ComputeThinV);
  const Vec s = svd.singularValues();
  rep.rank = 0;
  for (int i = 0; i < s.size(); ++i)
    if (s[i] > opts.rank_tol * s[0]) ++rep.rank;
  rep.unresolved = svd.matrixV().rightCols(P - rep.rank);

  std::vector<TrigPoly> c;
  for (int k = 0; k <= model.k_max; ++k) c.push_back(model.coefficient(p, k));
  for (const auto& set : sets) {
    JetEstimate e;
    e.y0 = set.y0;
    const double y = set.y0[0];
    e.order = model.k_max;
    e.h0 = Mat::Constant(1, 1, c[0](y));
    e.drho_h = Mat::Constant(1, 1, model.k_max >= 1 ? c[1](y) : 0.0);
    e.d2rho_h = Mat::Constant(1, 1, model.k_max >= 2 ? c[2](y) : 0.0);
    rep.jets.push_back(e);
  }
  return rep;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

nlohmann::json vec_json(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

nlohmann::json mat_json(const Mat& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (int i = 0; i < m.rows(); ++i) {
    std::vector<double> r(m.cols());
    for (int j = 0; j < m.cols(); ++j) r[j] = m(i, j);
    rows.push_back(r);
  }
  return rows;
}

Vec json_vec(const nlohmann::json& j) {
  const auto v = j.get<std::vector<double>>();
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

nlohmann::json to_json(const LengthSampleSet& s) {
  nlohmann::json j;
  j["y0"] = vec_json(s.y0);
  j["directions"] = nlohmann::json::array();
  for (const Vec& w : s.directions) j["directions"].push_back(vec_json(w));
  j["deltas"] = s.deltas;
  j["L"] = mat_json(s.L);
  j["noise"] = s.noise;
  j["periodic"] = s.periodic;
  return j;
}

LengthSampleSet sample_set_from_json(const nlohmann::json& j) {
  try {
    LengthSampleSet s;
    s.y0 = json_vec(j.at("y0"));
    for (const auto& w : j.at("directions")) s.directions.push_back(json_vec(w));
    s.deltas = j.at("deltas").get<std::vector<double>>();
    const auto& rows = j.at("L");
    s.L.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(s.deltas.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const auto r = rows[i].get<std::vector<double>>();
      if (r.size() != s.deltas.size()) throw InvalidArgument("sample set: ragged L table");
      for (std::size_t k = 0; k < r.size(); ++k) s.L(i, k) = r[k];
    }
    s.noise = j.value("noise", 0.0);
    s.periodic = j.value("periodic", true);
    check_samples(s, "sample_set_from_json");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("sample set: ") + e.what());
  }
}

nlohmann::json to_json(const JetEstimate& e) {
  return {{"y0", vec_json(e.y0)},
          {"h0", mat_json(e.h0)},
          {"drho_h", mat_json(e.drho_h)},
          {"d2rho_h", mat_json(e.d2rho_h)},
          {"order", e.order}};
}

nlohmann::json to_json(const JetFitReport& r) {
  nlohmann::json j;
  j["jets"] = nlohmann::json::array();
  for (const auto& e : r.jets) j["jets"].push_back(to_json(e));
  j["residual_rms"] = r.residual_rms;
  j["iterations"] = r.iterations;
  j["parameters"] = r.parameters;
  j["rank"] = r.rank;
  j["converged"] = r.converged;
  j["unresolved"] = mat_json(r.unresolved);
  return j;
}

nlohmann::json to_json(const FirstJetEstimate& e) {
  return {{"y0", vec_json(e.y0)},
          {"slopes", vec_json(e.slopes)},
          {"slope_errors", vec_json(e.slope_errors)},
          {"corrections", vec_json(e.corrections)},
          {"quadratic_values", vec_json(e.quadratic_values)},
          {"drho_h", mat_json(e.drho_h)}};
}

}  // namespace ahx

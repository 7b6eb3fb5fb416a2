#pragma once

// Embedded Dormand-Prince 5(4) integrator with Hairer's continuous extension.
// The driver hands every accepted step to an observer, which may project the
// new state back onto a constraint surface or stop the integration (event
// handling lives with the caller).

#include "ahx/types.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace ahx {

template <class Scalar>
using StateT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Continuous extension of one accepted step, valid on [t0, t0 + h].
template <class Scalar>
struct DenseSegment {
  Scalar t0{};
  Scalar h{};
  StateT<Scalar> r1, r2, r3, r4, r5;

  Scalar t1() const { return t0 + h; }

  StateT<Scalar> operator()(Scalar t) const {
    const Scalar th = (t - t0) / h;
    const Scalar th1 = Scalar(1) - th;
    return r1 + th * (r2 + th1 * (r3 + th * (r4 + th1 * r5)));
  }

  Scalar component(Scalar t, int i) const {
    const Scalar th = (t - t0) / h;
    const Scalar th1 = Scalar(1) - th;
    return r1[i] + th * (r2[i] + th1 * (r3[i] + th * (r4[i] + th1 * r5[i])));
  }
};

template <class Scalar>
struct OdeOptions {
  Scalar rtol = Scalar(1e-10);
  Scalar atol = Scalar(1e-10);
  Scalar h_init = Scalar(0);  // 0: automatic
  Scalar h_max = Scalar(kInf);
  Scalar h_min = Scalar(1e-15);
  long max_steps = 500000;
};

/// Returned by step observers.
struct StepControl {
  bool stop = false;
  bool modified = false;  // observer changed the end state (projection)
};

template <class Scalar>
class DormandPrince {
 public:
  using State = StateT<Scalar>;
  using Rhs = std::function<void(Scalar, const State&, State&)>;

  struct Attempt {
    State x1;
    State k7;
    Scalar err_norm{};
    DenseSegment<Scalar> segment;
  };

  explicit DormandPrince(OdeOptions<Scalar> opts = {}) : opts_(opts) {}

  const OdeOptions<Scalar>& options() const { return opts_; }

  /// One trial step of size h (h may be negative) from (t, x) with k1 = f(t, x).
  Attempt attempt(const Rhs& f, Scalar t, const State& x, const State& k1, Scalar h) const {
    constexpr Scalar c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
    constexpr Scalar a21 = 1.0 / 5;
    constexpr Scalar a31 = 3.0 / 40, a32 = 9.0 / 40;
    constexpr Scalar a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    constexpr Scalar a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                     a54 = -212.0 / 729;
    constexpr Scalar a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                     a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    constexpr Scalar a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192,
                     a75 = -2187.0 / 6784, a76 = 11.0 / 84;
    constexpr Scalar e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                     e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;
    constexpr Scalar d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                     d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                     d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

    const Eigen::Index n = x.size();
    State k2(n), k3(n), k4(n), k5(n), k6(n), k7(n);
    f(t + c2 * h, x + h * (a21 * k1), k2);
    f(t + c3 * h, x + h * (a31 * k1 + a32 * k2), k3);
    f(t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3), k4);
    f(t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4), k5);
    f(t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5), k6);
    State x1 = x + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    f(t + h, x1, k7);

    const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    Scalar acc = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar sc = opts_.atol + opts_.rtol * std::max(std::abs(x[i]), std::abs(x1[i]));
      const Scalar r = err[i] / sc;
      acc += r * r;
    }

    Attempt a;
    a.err_norm = std::sqrt(acc / Scalar(std::max<Eigen::Index>(n, 1)));
    a.segment.t0 = t;
    a.segment.h = h;
    a.segment.r1 = x;
    a.segment.r2 = x1 - x;
    a.segment.r3 = h * k1 - a.segment.r2;
    a.segment.r4 = a.segment.r2 - h * k7 - a.segment.r3;
    a.segment.r5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
    a.x1 = std::move(x1);
    a.k7 = std::move(k7);
    return a;
  }

  /// Integrates from t0 towards t_end, calling `on_step(segment, x_new)` after
  /// each accepted step. Returns the last time reached.
  template <class OnStep>
  Scalar run(const Rhs& f, Scalar t0, State x, Scalar t_end, OnStep&& on_step) const {
    const Scalar dir = t_end >= t0 ? Scalar(1) : Scalar(-1);
    State k1(x.size());
    f(t0, x, k1);
    Scalar h = opts_.h_init > 0 ? opts_.h_init : initial_step(f, t0, x, k1, dir, std::abs(t_end - t0));
    h = std::min(h, opts_.h_max);
    Scalar t = t0;
    long steps = 0;
    int rejects_in_row = 0;
    while ((t_end - t) * dir > 0) {
      if (++steps > opts_.max_steps)
        throw ConvergenceFailure("ode: step budget exhausted at t=" + std::to_string(double(t)));
      Scalar hs = std::min(h, std::abs(t_end - t));
      Attempt a = attempt(f, t, x, k1, dir * hs);
      if (!std::isfinite(double(a.err_norm))) a.err_norm = Scalar(1e10);
      if (a.err_norm > 1) {
        const Scalar fac = std::max(Scalar(0.1), Scalar(0.9) * std::pow(a.err_norm, Scalar(-0.2)));
        h = hs * fac;
        if (h < opts_.h_min || ++rejects_in_row > 60)
          throw ConvergenceFailure("ode: step size underflow at t=" + std::to_string(double(t)));
        continue;
      }
      rejects_in_row = 0;
      t = t + dir * hs;
      x = a.x1;
      StepControl ctl = on_step(a.segment, x);
      if (ctl.stop) return t;
      if (ctl.modified)
        f(t, x, k1);
      else
        k1 = a.k7;
      const Scalar fac = a.err_norm == 0
                             ? Scalar(5)
                             : std::min(Scalar(5), std::max(Scalar(0.2), Scalar(0.9) * std::pow(
                                                                              a.err_norm, Scalar(-0.2))));
      h = std::min(hs * fac, opts_.h_max);
    }
    return t;
  }

 private:
  Scalar initial_step(const Rhs& f, Scalar t0, const State& x, const State& k1, Scalar dir,
                      Scalar span) const {
    Scalar d0 = 0, d1 = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const Scalar sc = opts_.atol + opts_.rtol * std::abs(x[i]);
      d0 += (x[i] / sc) * (x[i] / sc);
      d1 += (k1[i] / sc) * (k1[i] / sc);
    }
    d0 = std::sqrt(d0 / x.size());
    d1 = std::sqrt(d1 / x.size());
    Scalar h0 = (d0 < 1e-5 || d1 < 1e-5) ? Scalar(1e-6) : Scalar(0.01) * d0 / d1;
    // The probe step must stay inside the integration interval.
    h0 = std::min(h0, span);
    State x1 = x + dir * h0 * k1;
    State k2(x.size());
    f(t0 + dir * h0, x1, k2);
    Scalar d2 = 0;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const Scalar sc = opts_.atol + opts_.rtol * std::abs(x[i]);
      d2 += ((k2[i] - k1[i]) / sc) * ((k2[i] - k1[i]) / sc);
    }
    d2 = std::sqrt(d2 / x.size()) / h0;
    const Scalar m = std::max(d1, d2);
    const Scalar h1 = m <= 1e-15 ? std::max(Scalar(1e-6), h0 * Scalar(1e-3))
                                 : std::pow(Scalar(0.01) / m, Scalar(0.2));
    return std::min(Scalar(100) * h0, h1);
  }

  OdeOptions<Scalar> opts_;
};

extern template class DormandPrince<double>;

}  // namespace ahx

#pragma once

// Small arithmetic expression language used by metric and tensor documents.
//
//   expr    := term (('+' | '-') term)*
//   term    := unary (('*' | '/') unary)*
//   unary   := ('+' | '-') unary | power
//   power   := primary ('^' unary)?
//   primary := number | name | name '(' expr ')' | '(' expr ')'
//
// Variables are `rho`, `y` (alias of `y1`), `y1`..`y9`; the constant `pi` is
// predefined. Functions: sin cos tan exp log sqrt sinh cosh tanh abs.
// Evaluation is generic in the scalar so that forward-mode dual numbers give
// exact first derivatives.

#include "ahx/types.hpp"

#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ahx {

/// Forward-mode dual number carrying a gradient with respect to up to
/// `kMaxVars` variables.
struct Dual {
  static constexpr int kMaxVars = 10;
  double v = 0.0;
  std::array<double, kMaxVars> d{};

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit from constants
  static Dual variable(double value, int index) {
    Dual x(value);
    x.d[index] = 1.0;
    return x;
  }
};

inline Dual chain(const Dual& a, double value, double slope) {
  Dual r(value);
  for (int i = 0; i < Dual::kMaxVars; ++i) r.d[i] = slope * a.d[i];
  return r;
}
inline Dual operator+(const Dual& a, const Dual& b) {
  Dual r(a.v + b.v);
  for (int i = 0; i < Dual::kMaxVars; ++i) r.d[i] = a.d[i] + b.d[i];
  return r;
}
inline Dual operator-(const Dual& a, const Dual& b) {
  Dual r(a.v - b.v);
  for (int i = 0; i < Dual::kMaxVars; ++i) r.d[i] = a.d[i] - b.d[i];
  return r;
}
inline Dual operator-(const Dual& a) { return chain(a, -a.v, -1.0); }
inline Dual operator*(const Dual& a, const Dual& b) {
  Dual r(a.v * b.v);
  for (int i = 0; i < Dual::kMaxVars; ++i) r.d[i] = a.d[i] * b.v + a.v * b.d[i];
  return r;
}
inline Dual operator/(const Dual& a, const Dual& b) {
  Dual r(a.v / b.v);
  const double inv = 1.0 / (b.v * b.v);
  for (int i = 0; i < Dual::kMaxVars; ++i) r.d[i] = (a.d[i] * b.v - a.v * b.d[i]) * inv;
  return r;
}
inline Dual sin(const Dual& a) { return chain(a, std::sin(a.v), std::cos(a.v)); }
inline Dual cos(const Dual& a) { return chain(a, std::cos(a.v), -std::sin(a.v)); }
inline Dual tan(const Dual& a) {
  const double t = std::tan(a.v);
  return chain(a, t, 1.0 + t * t);
}
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.v);
  return chain(a, e, e);
}
inline Dual log(const Dual& a) { return chain(a, std::log(a.v), 1.0 / a.v); }
inline Dual sqrt(const Dual& a) {
  const double s = std::sqrt(a.v);
  return chain(a, s, 0.5 / s);
}
inline Dual sinh(const Dual& a) { return chain(a, std::sinh(a.v), std::cosh(a.v)); }
inline Dual cosh(const Dual& a) { return chain(a, std::cosh(a.v), std::sinh(a.v)); }
inline Dual tanh(const Dual& a) {
  const double t = std::tanh(a.v);
  return chain(a, t, 1.0 - t * t);
}
inline Dual abs(const Dual& a) { return chain(a, std::abs(a.v), a.v < 0 ? -1.0 : 1.0); }
inline Dual pow(const Dual& a, const Dual& b) {
  const double p = std::pow(a.v, b.v);
  Dual r(p);
  const double da = b.v * std::pow(a.v, b.v - 1.0);
  const double db = a.v > 0 ? p * std::log(a.v) : 0.0;
  for (int i = 0; i < Dual::kMaxVars; ++i) r.d[i] = da * a.d[i] + db * b.d[i];
  return r;
}

/// A parsed expression. Cheap to copy (shared immutable tree).
class Expression {
 public:
  /// Parses `text`; throws InvalidArgument with the offending position.
  static Expression parse(std::string_view text);
  /// Constant expression.
  static Expression constant(double value);

  /// Variable slots: 0 = rho, k = y^k (1-based).
  double eval(std::span<const double> vars) const;
  Dual eval(std::span<const Dual> vars) const;

  /// Highest variable slot referenced (-1 for constants).
  int max_slot() const;
  const std::string& text() const { return text_; }

  struct Node;

 private:
  std::shared_ptr<const Node> root_;
  std::string text_;
};

}  // namespace ahx

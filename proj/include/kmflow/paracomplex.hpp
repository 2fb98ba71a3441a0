#pragma once

#include <array>
#include <cmath>
#include <numbers>

namespace kmflow {

/// Para-complex number re + k im with k^2 = +1.
///
/// The idempotents tau = (1 + k)/2 and taubar = (1 - k)/2 split the algebra:
/// (a tau + b taubar)(c tau + d taubar) = ac tau + bd taubar. Values are
/// stored by their (tau, taubar) components, so products and the para-norm
/// a b are free of the cancellation in re^2 - im^2.
class ParaComplex {
 public:
  constexpr ParaComplex() = default;
  /// re + k im.
  constexpr ParaComplex(double re, double im) : a_(re + im), b_(re - im) {}

  static constexpr ParaComplex k() { return {0.0, 1.0}; }
  static constexpr ParaComplex tau() { return from_idempotents(1.0, 0.0); }
  static constexpr ParaComplex tau_bar() { return from_idempotents(0.0, 1.0); }
  /// a tau + b taubar.
  static constexpr ParaComplex from_idempotents(double a, double b) {
    ParaComplex z;
    z.a_ = a;
    z.b_ = b;
    return z;
  }
  /// e^{k theta} = e^theta tau + e^{-theta} taubar.
  static ParaComplex exp_k(double theta) { return from_idempotents(std::exp(theta), std::exp(-theta)); }

  constexpr double re() const { return 0.5 * (a_ + b_); }
  constexpr double im() const { return 0.5 * (a_ - b_); }
  /// Components in the (tau, taubar) basis.
  constexpr double tau_part() const { return a_; }
  constexpr double tau_bar_part() const { return b_; }

  constexpr ParaComplex conj() const { return from_idempotents(b_, a_); }
  /// z conj(z) = re^2 - im^2: an indefinite quadratic form, not a norm.
  constexpr double para_norm2() const { return a_ * b_; }
  /// Euclidean size of (re, im), used to measure residuals.
  double modulus() const { return std::hypot(a_, b_) * std::numbers::sqrt2 * 0.5; }

  friend constexpr ParaComplex operator+(ParaComplex x, ParaComplex y) {
    return from_idempotents(x.a_ + y.a_, x.b_ + y.b_);
  }
  friend constexpr ParaComplex operator-(ParaComplex x, ParaComplex y) {
    return from_idempotents(x.a_ - y.a_, x.b_ - y.b_);
  }
  friend constexpr ParaComplex operator-(ParaComplex x) { return from_idempotents(-x.a_, -x.b_); }
  friend constexpr ParaComplex operator*(ParaComplex x, ParaComplex y) {
    return from_idempotents(x.a_ * y.a_, x.b_ * y.b_);
  }
  friend constexpr ParaComplex operator*(double s, ParaComplex x) { return from_idempotents(s * x.a_, s * x.b_); }
  friend constexpr bool operator==(ParaComplex x, ParaComplex y) = default;

 private:
  double a_ = 0.0;  // tau component
  double b_ = 0.0;  // taubar component
};

ParaComplex pow(ParaComplex z, int n);

/// Para-complex valued exterior form on the 2n-dimensional product chart
/// (n <= 2). Generators are dx^1..dx^n followed by dxbar^1..dxbar^n; a basis
/// monomial is a bitmask over generators, written in increasing order.
class ExteriorForm {
 public:
  explicit ExteriorForm(int generators) : generators_(generators) {}

  int generators() const { return generators_; }
  ParaComplex coefficient(unsigned mask) const { return coeff_[mask]; }
  void add(unsigned mask, ParaComplex c) { coeff_[mask] = coeff_[mask] + c; }

  /// c * dz^{g1} ^ dz^{g2} ^ ... for an arbitrary ordering of distinct
  /// generators (the sign of the sorting permutation is applied).
  static ExteriorForm monomial(int generators, std::initializer_list<int> gens, ParaComplex c);

  ExteriorForm wedge(const ExteriorForm& other) const;
  ExteriorForm conj() const;
  friend ExteriorForm operator*(ParaComplex s, const ExteriorForm& f);
  friend ExteriorForm operator+(const ExteriorForm& a, const ExteriorForm& b);

 private:
  int generators_;
  std::array<ParaComplex, 16> coeff_{};
};

}  // namespace kmflow

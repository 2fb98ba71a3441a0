#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kmflow/linalg.hpp"

namespace kmflow {

enum class CostKind { bilinear_flat, torus_squared_distance, perturbed_quadratic };

std::string_view to_string(CostKind kind);
std::optional<CostKind> parse_cost_kind(std::string_view name);

/// Excludes a band of half-width `margin` (in units of the period) around the
/// antipode on every axis: accepts (x, xbar) iff |wrap(x_a - xbar_a)| <=
/// (1/2 - margin) * period_a for all a.
struct CutLocusGuard {
  double margin = 0.1;
};

struct CostParams {
  double epsilon = 0.0;                 // perturbation amplitude
  std::array<int, 2> frequency{1, 1};   // per-axis perturbation frequency k_a
};

/// A cost c(x, xbar) on T^n x T^n with closed-form partial derivatives up to
/// total order 4.
///
/// Every built-in kind is a sum over axes of a two-variable function of
/// (x_a, xbar_a), so any partial that differentiates along two different
/// axes vanishes. Torus-based kinds are written through the signed nearest
/// displacement delta_a = wrap(x_a - xbar_a):
///
///   bilinear_flat           c = -sum_a x_a (x_a - delta_a)
///   torus_squared_distance  c = 1/2 sum_a delta_a^2
///   perturbed_quadratic     c = 1/2 sum_a delta_a^2
///                               + eps sum_a sin(2 pi k_a x_a / P_a) sin(2 pi k_a xbar_a / P_a)
///
/// The perturbation is capped at |eps| (2 pi k_a / P_a)^2 <= 0.95 so that
/// b = -c_{i sbar} stays positive definite.
class CostModel {
 public:
  CostModel(CostKind kind, int n_dims, CostParams params = {}, CutLocusGuard guard = {},
            std::array<double, 2> period = {1.0, 1.0});

  static constexpr int max_order = 4;
  static constexpr double perturbation_cap = 0.95;

  CostKind kind() const { return kind_; }
  int dims() const { return dims_; }
  const CostParams& params() const { return params_; }
  const CutLocusGuard& guard() const { return guard_; }
  double period(int axis) const { return period_[axis]; }
  bool is_flat() const { return kind_ != CostKind::perturbed_quadratic || params_.epsilon == 0.0; }

  bool accepts(const Vec& x, const Vec& xbar) const;
  /// Throws CutLocusViolation when the guard rejects the pair.
  void require_valid(const Vec& x, const Vec& xbar) const;

  double value(const Vec& x, const Vec& xbar) const;

  /// Partial derivative with orders_x[a] derivatives in x_a and
  /// orders_xbar[a] in xbar_a. Total order must be <= 4.
  double partial(const Vec& x, const Vec& xbar, std::span<const int> orders_x,
                 std::span<const int> orders_xbar) const;

  /// Unguarded extended-precision evaluation of the closed-form value; only
  /// the finite-difference oracles use it.
  long double value_extended(std::span<const long double> x, std::span<const long double> xbar) const;

  // Per-point bundles for the hot loops. The caller has checked the guard.
  Vec grad_x(const Vec& x, const Vec& xbar) const;        // c_i
  Mat mixed(const Vec& x, const Vec& xbar) const;         // c_{i sbar}
  Mat hess_x(const Vec& x, const Vec& xbar) const;        // c_{ij}
  Vec displacement(const Vec& x, const Vec& xbar) const;  // wrap(xbar - x)

 private:
  template <class Real>
  Real axis_partial(int axis, Real x, Real xbar, int p, int q) const;

  CostKind kind_;
  int dims_;
  CostParams params_;
  CutLocusGuard guard_;
  std::array<double, 2> period_;
};

/// Richardson-extrapolated central finite difference of value_extended for
/// the requested partial. Steps step, step/2, ..., step/2^(levels-1).
double finite_difference_partial(const CostModel& model, const Vec& x, const Vec& xbar,
                                 std::span<const int> orders_x, std::span<const int> orders_xbar,
                                 double step = 2e-2, int levels = 3);

struct PartialCheck {
  Vec x;
  Vec xbar;
  std::vector<int> orders_x;
  std::vector<int> orders_xbar;
  double analytic = 0.0;
  double finite_difference = 0.0;
  double error = 0.0;
};

struct VerificationReport {
  std::size_t samples = 0;
  std::size_t checks = 0;
  std::size_t failures = 0;
  double max_abs_error = 0.0;
  double max_scaled_error = 0.0;  // error / max(rel_tol |fd|, abs_floor); <= 1 passes
  PartialCheck worst;
  bool passed() const { return failures == 0; }
};

/// Checks every partial of total order <= 4 against finite_difference_partial
/// at `sample_count` random guarded points: pass iff
/// |analytic - fd| <= max(1e-5 |fd|, 1e-8).
VerificationReport verify_partials(const CostModel& model, int sample_count, std::uint64_t seed);

/// All multi-indices (orders_x, orders_xbar) with total order in [1, 4].
std::vector<std::pair<std::vector<int>, std::vector<int>>> partial_multi_indices(int n_dims);

}  // namespace kmflow

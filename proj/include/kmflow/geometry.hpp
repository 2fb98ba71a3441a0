#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "kmflow/cost.hpp"
#include "kmflow/grid.hpp"
#include "kmflow/linalg.hpp"

namespace kmflow {

/// Dense rank-3 array over n <= 2 indices: (i, j, m) -> t[(i * n + j) * n + m].
struct Tensor3 {
  int n = 0;
  std::array<double, 8> v{};
  double& operator()(int i, int j, int m) { return v[(i * n + j) * n + m]; }
  double operator()(int i, int j, int m) const { return v[(i * n + j) * n + m]; }
  double max_abs() const;
};

/// Dense rank-4 array over n <= 2 indices.
struct Tensor4 {
  int n = 0;
  std::array<double, 16> v{};
  double& operator()(int i, int j, int k, int l) { return v[((i * n + j) * n + k) * n + l]; }
  double operator()(int i, int j, int k, int l) const { return v[((i * n + j) * n + k) * n + l]; }
  double max_abs() const;
};

struct MixedHessian {
  Mat b;      // b_{i sbar} = -c_{i sbar}, rows unbarred, columns barred
  Mat b_inv;  // (b^{-1})_{sbar i}
  double log_det = 0.0;
  double condition = 1.0;
};

/// b = -[c_{i sbar}] with its inverse, log-determinant (LU with partial
/// pivoting) and 2-norm condition number. Throws CutLocusViolation, or
/// SingularHessian when a pivot is non-positive in the determinant sense or
/// the condition number exceeds 1e10.
MixedHessian mixed_hessian(const CostModel& model, const Vec& x, const Vec& xbar);

struct Christoffel {
  Tensor3 unbarred;  // Gamma_{ij}^m      = (C^{-1})_{kbar m} c_{i j kbar}
  Tensor3 barred;    // Gamma_{ibar jbar}^{mbar} = (C^{-1})_{mbar k} c_{k ibar jbar}
};

/// The only non-vanishing Christoffel symbols of the Kim-McCann metric (all
/// mixed classes vanish).
Christoffel christoffel(const CostModel& model, const Vec& x, const Vec& xbar);

/// Mixed curvature components R_{i jbar kbar l}:
///   2 R_{i jbar kbar l} = c_{i jbar kbar l} - c_{l i fbar} (C^{-1})_{fbar a} c_{a jbar kbar}.
Tensor4 curvature(const CostModel& model, const Vec& x, const Vec& xbar);

/// Textbook-coordinate finite-difference geometry of the full 2n x 2n metric
/// h = 1/2 [[0, b], [b^T, 0]], coordinates z = (x, xbar). Central
/// differences with one Richardson level.
struct FdGeometry {
  int dim = 0;                       // 2n
  std::array<double, 64> gamma{};    // Gamma^a_{bc} at [(a * dim + b) * dim + c]
  std::array<double, 256> riemann{}; // R_{abcd}, all indices lowered

  double christoffel(int a, int b, int c) const { return gamma[(a * dim + b) * dim + c]; }
  double riemann_lowered(int a, int b, int c, int d) const {
    return riemann[((a * dim + b) * dim + c) * dim + d];
  }
};

FdGeometry fd_geometry(const CostModel& model, const Vec& x, const Vec& xbar, double step = 1e-3);

/// Independent oracle for `curvature`: the mixed block R_{i jbar kbar l} of
/// the finite-difference Riemann tensor.
Tensor4 curvature_fd_oracle(const CostModel& model, const Vec& x, const Vec& xbar,
                            double step = 1e-3);

/// Independent oracle for `christoffel`, read off fd_geometry.
Christoffel christoffel_fd_oracle(const CostModel& model, const Vec& x, const Vec& xbar,
                                  double step = 1e-3);

/// Cross-curvature of the h-orthogonal pair (xi + 0, 0 + xibar):
///   sum_{ijkl} R^(z)(xi_i e_i, xibar_j e_jbar, xi_k e_k, xibar_l e_lbar)
///   = - sum R_{i jbar kbar l} xi_i xibar_j xibar_k xi_l.
/// xibar is first projected so that xi^T b xibar = 0; no normalisation is
/// applied, so the value is quadratic in each argument. Throws
/// NullPairUnavailable in 1-D or when the projected xibar vanishes.
double cross_curvature(const CostModel& model, const Vec& x, const Vec& xbar, const Vec& xi,
                       const Vec& xibar);

/// Removes from xibar its component along b^T xi so that xi^T b xibar = 0.
Vec project_null(const Mat& b, const Vec& xi, const Vec& xibar);

enum class MtwVerdict { positive, nonnegative_with_nulls, violated, vacuous };
std::string_view to_string(MtwVerdict verdict);

struct MtwReport {
  double min_value = 0.0;
  Vec argmin_x;
  Vec argmin_xbar;
  Vec argmin_xi;
  Vec argmin_xibar;
  std::size_t samples = 0;
  std::size_t pairs = 0;
  MtwVerdict verdict = MtwVerdict::vacuous;
};

struct MtwScanOptions {
  int directions_per_point = 16;
  /// Sub-lattice stride: every `stride`-th node on each axis is used for both
  /// x and xbar. 0 picks the stride giving at most 8 points per axis.
  int stride = 0;
  std::uint64_t seed = 1;
  Exec exec = Exec::parallel;
};

/// Minimum cross-curvature over guarded sub-lattice pairs and random
/// normalised null pairs. Verdict: positive if min > 1e-10,
/// nonnegative_with_nulls if |min| <= 1e-10, violated otherwise, vacuous when
/// no null pair exists (1-D, or every pair rejected by the guard).
MtwReport mtw_scan(const CostModel& model, const Grid& grid, const MtwScanOptions& options);

/// psi = (ln rho + ln rhobar - ln det b) / 2n. Throws NonpositiveDensity.
double conformal_factor(const CostModel& model, double rho, double rho_bar, const Vec& x,
                        const Vec& xbar);

/// Kim-McCann metric h = 1/2 [[0, b], [b^T, 0]] on the product chart.
Mat2n km_metric(const CostModel& model, const Vec& x, const Vec& xbar);

/// Conformal Kim-McCann-Warren metric e^{2 psi} h.
Mat2n kmw_metric(const CostModel& model, double rho, double rho_bar, const Vec& x,
                 const Vec& xbar);

}  // namespace kmflow

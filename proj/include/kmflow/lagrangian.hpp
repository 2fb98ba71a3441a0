#pragma once

#include <memory>
#include <optional>

#include "kmflow/cost.hpp"
#include "kmflow/grid.hpp"
#include "kmflow/paracomplex.hpp"

namespace kmflow {

/// Positive periodic densities rho on M and rhobar on Mbar, sampled on the
/// same grid. Masses are periodic sums; they need not be equal.
struct DensityPair {
  ScalarField rho;
  ScalarField rho_bar;
  double mass = 0.0;
  double mass_bar = 0.0;
  bool normalized = false;  // both masses equal 1 within 1e-12
};

/// Throws NonpositiveDensity if either field has a non-positive or
/// non-finite entry, grid_mismatch if the grids differ.
DensityPair make_density_pair(ScalarField rho, ScalarField rho_bar);

/// A Lagrangian graph x -> (x, T(x)) over the torus with everything the flow
/// and the monitors need, computed once per state. States are immutable; the
/// flow builds successors.
struct LagrangianState {
  CostModel model;
  std::shared_ptr<const DensityPair> densities;
  std::optional<ScalarField> potential{};  // present for potential-route states
  VectorField displacement{};              // T(x) = x + displacement, wrapped
  MatrixField DT{};                        // Jacobian of T
  MatrixField W{};                         // W_ij = b_{i sbar} DT^{sbar}_j
  ScalarField theta{};                     // det-g route (primary)
  ScalarField theta_det_dt{};              // det-DT route (cross-check)
  VectorField grad_theta{};                // discrete gradient of theta
  ScalarField det_dt{};
  ScalarField det_g{};
  ScalarField log_det_b{};
  ScalarField rho_bar_at_T{};
  double min_metric_eigenvalue = 0.0;  // smallest eigenvalue of g over nodes
  double time = 0.0;

  const Grid& grid() const { return theta.grid(); }
  int dims() const { return grid().dims(); }
  /// T(x) at node k, not wrapped (x + displacement).
  Vec target(std::size_t k) const;
  Vec node(std::size_t k) const;
};

/// Solves Du(x) + D_x c(x, T(x)) = 0 for T at every node by Newton's method
/// (residual <= 1e-12 in max norm, at most 50 iterations). `grad_u` is the
/// discrete gradient of the potential. Without a warm start the iteration
/// starts from T = x + Du, which is exact for the torus distance cost.
/// Throws NewtonDivergence (node and residual in the message) or
/// CutLocusViolation when an iterate leaves the guard.
VectorField c_exponential(const CostModel& model, const VectorField& grad_u,
                          const VectorField* warm_start = nullptr, Exec exec = Exec::parallel);

/// Convenience overload differentiating u with the default stencil.
VectorField c_exponential(const CostModel& model, const ScalarField& u,
                          const VectorField* warm_start = nullptr, Exec exec = Exec::parallel);

/// Max-norm residual of Du + D_x c(x, T(x)) over the grid.
double c_exponential_residual(const CostModel& model, const VectorField& grad_u,
                              const VectorField& displacement);

/// State of the graph of the c-exponential of u. W comes from differentiating
/// the c-exponential relation, W = D^2 u + c_xx(x, T(x)), and DT = b^{-1} W,
/// so W is symmetric by construction. Throws SpacelikeViolation naming the
/// first node where g is not positive definite.
LagrangianState build_state(const CostModel& model, std::shared_ptr<const DensityPair> densities,
                            const ScalarField& u, const VectorField* warm_start = nullptr,
                            Exec exec = Exec::parallel);

/// State of the graph of T = x + displacement, with DT from finite differences
/// of the displacement and W = b DT (W need not be symmetric).
LagrangianState build_state_from_map(const CostModel& model,
                                     std::shared_ptr<const DensityPair> densities,
                                     const VectorField& displacement, Exec exec = Exec::parallel);

/// Lagrangian angle from the induced metric,
///   theta = -1/2 (ln det g - ln rho + ln rhobar(T) - ln det b),
/// after checking it against theta = 1/2 ln(rho / (rhobar(T) det DT)).
/// Throws RouteMismatch when the routes differ by more than 1e-6.
ScalarField lagrangian_angle(const LagrangianState& state);

/// sup |theta_g - theta_detDT| over nodes.
double angle_route_gap(const LagrangianState& state);

/// max over nodes of the max-entry norm of (W - W^T)/2: the discrete size of
/// the symplectic form restricted to the graph.
double lagrangian_defect(const LagrangianState& state);

/// sup over nodes of |Omega(F_1..F_n) - e^{k theta + n psi} sqrt(det g)|,
/// with Omega(F) = tau rho + taubar rhobar(T) det DT.
double calibration_defect(const LagrangianState& state);

/// sup |det DT e^{2 theta} rhobar(T) / rho - 1|.
double det_dt_identity_residual(const LagrangianState& state);

/// sup |det DT rhobar(T) - rho|.
double pushforward_residual(const LagrangianState& state);

struct WedgeCheck {
  ParaComplex lhs;  // e^{2n psi} omega^n / n!
  ParaComplex rhs;  // (-1)^{n(n-1)/2} (k/2)^n Omega ^ conj(Omega)
  double residual = 0.0;
};

/// Evaluates both sides of the defining identity for psi as multiples of
/// dx^1..dx^n dxbar^1..dxbar^n, each assembled in the exterior algebra.
WedgeCheck wedge_identity_check(const CostModel& model, double rho, double rho_bar, const Vec& x,
                                const Vec& xbar);

/// Per-node slope ratio max_i (1 + lambda_i^2) / lambda_i with lambda_i the
/// eigenvalues of W in the Euclidean chart metric. Requires a spacelike state
/// whose Lagrangian defect is below 1e-6; throws SpacelikeViolation on
/// lambda <= 0.
ScalarField slope_ratio(const LagrangianState& state);

/// Max over nodes of the slope ratio computed from the symmetric part of W,
/// without the defect precondition (used by the flow monitors).
double slope_ratio_max(const LagrangianState& state);

/// The ratio (|v|^2 + |W v|^2) / (v^T W v) of the auxiliary metric to the
/// Kim-McCann metric on the tangent vector (v, DT v).
double slope_ratio_of_vector(const Mat& W, const Vec& v);

}  // namespace kmflow

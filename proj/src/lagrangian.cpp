#include "kmflow/lagrangian.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "kmflow/errors.hpp"
#include "kmflow/geometry.hpp"

namespace kmflow {

DensityPair make_density_pair(ScalarField rho, ScalarField rho_bar) {
  require(rho.grid() == rho_bar.grid(), ErrorCode::grid_mismatch, "density grids differ");
  for (std::size_t k = 0; k < rho.size(); ++k) {
    require(rho[k] > 0.0 && std::isfinite(rho[k]), ErrorCode::nonpositive_density,
            "rho not positive at node " + std::to_string(k));
    require(rho_bar[k] > 0.0 && std::isfinite(rho_bar[k]), ErrorCode::nonpositive_density,
            "rhobar not positive at node " + std::to_string(k));
  }
  DensityPair d{std::move(rho), std::move(rho_bar), 0.0, 0.0, false};
  d.mass = d.rho.integral();
  d.mass_bar = d.rho_bar.integral();
  d.normalized = std::abs(d.mass - 1.0) <= 1e-12 && std::abs(d.mass_bar - 1.0) <= 1e-12;
  return d;
}

Vec LagrangianState::node(std::size_t k) const {
  const Grid& g = grid();
  Vec x(g.dims());
  for (int a = 0; a < g.dims(); ++a) x(a) = g.coordinate(k, a);
  return x;
}

Vec LagrangianState::target(std::size_t k) const {
  Vec t = node(k);
  for (int a = 0; a < dims(); ++a) t(a) += displacement[a][k];
  return t;
}

namespace {

Vec node_of(const Grid& g, std::size_t k) {
  Vec x(g.dims());
  for (int a = 0; a < g.dims(); ++a) x(a) = g.coordinate(k, a);
  return x;
}

// Per-node failure record; the lowest failing node is reported after the
// parallel loop so the message does not depend on scheduling.
struct NodeFailure {
  ErrorCode code = ErrorCode::precondition;
  std::string message;
};

void raise_first(const std::vector<std::optional<NodeFailure>>& failures) {
  for (const auto& f : failures) {
    if (f) throw Error(f->code, f->message);
  }
}

}  // namespace

VectorField c_exponential(const CostModel& model, const VectorField& grad_u,
                          const VectorField* warm_start, Exec exec) {
  const Grid& g = grad_u.grid();
  const int n = g.dims();
  require(model.dims() == n, ErrorCode::grid_mismatch, "cost and grid dimensions differ");
  constexpr double tol = 1e-12;
  constexpr int max_iter = 50;
  VectorField disp(g);
  std::vector<std::optional<NodeFailure>> failures(g.size());

  for_each_node(exec, g.size(), [&](std::size_t k) {
    const Vec x = node_of(g, k);
    Vec du(n), d(n);
    for (int a = 0; a < n; ++a) {
      du(a) = grad_u[a][k];
      d(a) = warm_start ? (*warm_start)[a][k] : du(a);
    }
    double residual = std::numeric_limits<double>::infinity();
    for (int it = 0; it <= max_iter; ++it) {
      const Vec xbar = x + d;
      if (!model.accepts(x, xbar)) {
        failures[k] = NodeFailure{ErrorCode::cut_locus_violation,
                                  "c-exponential iterate left the guard at node " + std::to_string(k)};
        return;
      }
      const Vec f = du + model.grad_x(x, xbar);
      residual = f.cwiseAbs().maxCoeff();
      if (residual <= tol) break;
      if (it == max_iter) break;
      const Mat c_mixed = model.mixed(x, xbar);
      d -= small_solve(c_mixed, f);
      for (int a = 0; a < n; ++a) d(a) = wrap_displacement(d(a), model.period(a));
    }
    if (!(residual <= tol)) {
      failures[k] = NodeFailure{ErrorCode::newton_divergence,
                                "c-exponential Newton failed at node " + std::to_string(k) +
                                    " with residual " + std::to_string(residual)};
      return;
    }
    for (int a = 0; a < n; ++a) disp[a][k] = d(a);
  });
  raise_first(failures);
  return disp;
}

VectorField c_exponential(const CostModel& model, const ScalarField& u,
                          const VectorField* warm_start, Exec exec) {
  return c_exponential(model, gradient(u, 4, exec), warm_start, exec);
}

double c_exponential_residual(const CostModel& model, const VectorField& grad_u,
                              const VectorField& displacement) {
  const Grid& g = grad_u.grid();
  const int n = g.dims();
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Vec x = node_of(g, k);
    Vec xbar = x;
    Vec du(n);
    for (int a = 0; a < n; ++a) {
      xbar(a) += displacement[a][k];
      du(a) = grad_u[a][k];
    }
    worst = std::max(worst, (du + model.grad_x(x, xbar)).cwiseAbs().maxCoeff());
  }
  return worst;
}

namespace {

enum class Route { potential, map };

// Fills the per-node quantities of a state whose displacement is set. For
// the potential route `hess` holds D^2 u; for the map route `jac` holds the
// Jacobian of the displacement.
void assemble(LagrangianState& s, Route route, const MatrixField* hess, const MatrixField* jac,
              Exec exec) {
  const Grid& g = s.displacement.grid();
  const int n = g.dims();
  const CostModel& model = s.model;
  const DensityPair& dens = *s.densities;
  s.DT = MatrixField(g);
  s.W = MatrixField(g);
  s.theta = ScalarField(g);
  s.theta_det_dt = ScalarField(g);
  s.det_dt = ScalarField(g);
  s.det_g = ScalarField(g);
  s.log_det_b = ScalarField(g);
  s.rho_bar_at_T = ScalarField(g);
  std::vector<double> min_eig(g.size());
  std::vector<std::optional<NodeFailure>> failures(g.size());

  for_each_node(exec, g.size(), [&](std::size_t k) {
    const Vec x = node_of(g, k);
    Vec xbar = x;
    for (int a = 0; a < n; ++a) xbar(a) += s.displacement[a][k];
    if (!model.accepts(x, xbar)) {
      failures[k] = NodeFailure{ErrorCode::cut_locus_violation,
                                "graph point at node " + std::to_string(k) + " is too close to the cut locus"};
      return;
    }
    const Mat b = -model.mixed(x, xbar);
    Mat W(n, n), DT(n, n);
    if (route == Route::potential) {
      const Mat cxx = model.hess_x(x, xbar);
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) W(i, j) = (*hess)(i, j)[k] + cxx(i, j);
      DT = small_inverse(b) * W;
    } else {
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) DT(i, j) = (i == j ? 1.0 : 0.0) + (*jac)(i, j)[k];
      W = b * DT;
    }
    const Mat gm = 0.5 * (W + W.transpose());
    const double det_b = small_det(b);
    const double det_g = small_det(gm);
    const double det_dt = small_det(DT);
    const double lam = symmetric_eigenvalues(gm)(0);
    min_eig[k] = lam;
    if (!(lam > 0.0) || !(det_b > 0.0) || !(det_dt > 0.0)) {
      failures[k] = NodeFailure{ErrorCode::spacelike_violation,
                                "induced metric not positive definite at node " + std::to_string(k) +
                                    " (min eigenvalue " + std::to_string(lam) + ")"};
      return;
    }
    const double rb = interpolate(dens.rho_bar, std::span<const double>(xbar.data(), n));
    if (!(rb > 0.0)) {
      failures[k] = NodeFailure{ErrorCode::nonpositive_density,
                                "interpolated rhobar not positive at node " + std::to_string(k)};
      return;
    }
    const double log_det_b = std::log(det_b);
    const double log_rho = std::log(dens.rho[k]);
    const double log_rb = std::log(rb);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        s.W(i, j)[k] = W(i, j);
        s.DT(i, j)[k] = DT(i, j);
      }
    s.theta[k] = -0.5 * (std::log(det_g) - log_rho + log_rb - log_det_b);
    s.theta_det_dt[k] = 0.5 * (log_rho - log_rb - std::log(det_dt));
    s.det_dt[k] = det_dt;
    s.det_g[k] = det_g;
    s.log_det_b[k] = log_det_b;
    s.rho_bar_at_T[k] = rb;
  });
  raise_first(failures);
  double m = std::numeric_limits<double>::infinity();
  for (double v : min_eig) m = std::min(m, v);
  s.min_metric_eigenvalue = m;
  s.grad_theta = gradient(s.theta, 4, exec);
}

}  // namespace

LagrangianState build_state(const CostModel& model, std::shared_ptr<const DensityPair> densities,
                            const ScalarField& u, const VectorField* warm_start, Exec exec) {
  require(densities && densities->rho.grid() == u.grid(), ErrorCode::grid_mismatch,
          "densities and potential live on different grids");
  LagrangianState s{.model = model, .densities = std::move(densities), .potential = u};
  const VectorField du = gradient(u, 4, exec);
  s.displacement = c_exponential(model, du, warm_start, exec);
  const MatrixField hess = hessian(u, 4, exec);
  assemble(s, Route::potential, &hess, nullptr, exec);
  return s;
}

LagrangianState build_state_from_map(const CostModel& model,
                                     std::shared_ptr<const DensityPair> densities,
                                     const VectorField& displacement, Exec exec) {
  require(densities && densities->rho.grid() == displacement.grid(), ErrorCode::grid_mismatch,
          "densities and map live on different grids");
  LagrangianState s{.model = model, .densities = std::move(densities), .displacement = displacement};
  for (int a = 0; a < displacement.dims(); ++a) {
    for (double& v : s.displacement[a].values()) v = wrap_displacement(v, model.period(a));
  }
  const MatrixField jac = jacobian(s.displacement, 4, exec);
  assemble(s, Route::map, nullptr, &jac, exec);
  return s;
}

double angle_route_gap(const LagrangianState& state) {
  double gap = 0.0;
  for (std::size_t k = 0; k < state.theta.size(); ++k) {
    gap = std::max(gap, std::abs(state.theta[k] - state.theta_det_dt[k]));
  }
  return gap;
}

ScalarField lagrangian_angle(const LagrangianState& state) {
  const double gap = angle_route_gap(state);
  require(gap <= 1e-6, ErrorCode::route_mismatch,
          "det-g and det-DT routes for theta differ by " + std::to_string(gap));
  return state.theta;
}

double lagrangian_defect(const LagrangianState& state) {
  const int n = state.dims();
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const auto& wij = state.W(i, j);
      const auto& wji = state.W(j, i);
      for (std::size_t k = 0; k < wij.size(); ++k) {
        worst = std::max(worst, 0.5 * std::abs(wij[k] - wji[k]));
      }
    }
  }
  return worst;
}

double calibration_defect(const LagrangianState& state) {
  const int n = state.dims();
  const DensityPair& dens = *state.densities;
  double worst = 0.0;
  for (std::size_t k = 0; k < state.theta.size(); ++k) {
    const double rho = dens.rho[k];
    const double rb = state.rho_bar_at_T[k];
    const ParaComplex omega = ParaComplex::from_idempotents(rho, rb * state.det_dt[k]);
    const double psi = (std::log(rho) + std::log(rb) - state.log_det_b[k]) / (2.0 * n);
    const double volume = std::exp(n * psi) * std::sqrt(state.det_g[k]);
    const ParaComplex calibrated = volume * ParaComplex::exp_k(state.theta[k]);
    worst = std::max(worst, (omega - calibrated).modulus());
  }
  return worst;
}

double det_dt_identity_residual(const LagrangianState& state) {
  const DensityPair& dens = *state.densities;
  double worst = 0.0;
  for (std::size_t k = 0; k < state.theta.size(); ++k) {
    const double r = state.det_dt[k] * std::exp(2.0 * state.theta[k]) * state.rho_bar_at_T[k] / dens.rho[k];
    worst = std::max(worst, std::abs(r - 1.0));
  }
  return worst;
}

double pushforward_residual(const LagrangianState& state) {
  const DensityPair& dens = *state.densities;
  double worst = 0.0;
  for (std::size_t k = 0; k < state.theta.size(); ++k) {
    worst = std::max(worst, std::abs(state.det_dt[k] * state.rho_bar_at_T[k] - dens.rho[k]));
  }
  return worst;
}

namespace {

int factorial(int n) { return n <= 1 ? 1 : n * factorial(n - 1); }

}  // namespace

WedgeCheck wedge_identity_check(const CostModel& model, double rho, double rho_bar, const Vec& x,
                                const Vec& xbar) {
  const int n = model.dims();
  const int gens = 2 * n;
  const double psi = conformal_factor(model, rho, rho_bar, x, xbar);
  const Mat c_mixed = model.mixed(x, xbar);

  // omega = -1/2 c_{i sbar} dx^i ^ dxbar^s
  ExteriorForm omega(gens);
  for (int i = 0; i < n; ++i)
    for (int s = 0; s < n; ++s)
      omega = omega + ExteriorForm::monomial(gens, {i, n + s}, ParaComplex{-0.5 * c_mixed(i, s), 0.0});
  ExteriorForm omega_n = omega;
  for (int p = 1; p < n; ++p) omega_n = omega_n.wedge(omega);

  // Omega = tau rho dx^1..dx^n + taubar rhobar dxbar^1..dxbar^n
  const ExteriorForm dx = n == 1 ? ExteriorForm::monomial(gens, {0}, {1.0, 0.0})
                                 : ExteriorForm::monomial(gens, {0, 1}, {1.0, 0.0});
  const ExteriorForm dxbar = n == 1 ? ExteriorForm::monomial(gens, {1}, {1.0, 0.0})
                                    : ExteriorForm::monomial(gens, {2, 3}, {1.0, 0.0});
  const ExteriorForm big_omega = (rho * ParaComplex::tau()) * dx + (rho_bar * ParaComplex::tau_bar()) * dxbar;
  const ExteriorForm product = big_omega.wedge(big_omega.conj());

  const unsigned top = (1u << gens) - 1u;
  WedgeCheck out;
  out.lhs = (std::exp(2.0 * n * psi) / factorial(n)) * omega_n.coefficient(top);
  const double sign = ((n * (n - 1) / 2) % 2) ? -1.0 : 1.0;
  out.rhs = pow(0.5 * ParaComplex::k(), n) * (sign * product.coefficient(top));
  out.residual = (out.lhs - out.rhs).modulus();
  return out;
}

double slope_ratio_of_vector(const Mat& W, const Vec& v) {
  const Vec wv = W * v;
  return (v.squaredNorm() + wv.squaredNorm()) / v.dot(wv);
}

namespace {

double node_slope_ratio(const LagrangianState& state, std::size_t k, bool strict) {
  const int n = state.dims();
  Mat gm(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) gm(i, j) = 0.5 * (state.W(i, j)[k] + state.W(j, i)[k]);
  const Vec lam = symmetric_eigenvalues(gm);
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    if (strict) {
      require(lam(i) > 0.0, ErrorCode::spacelike_violation,
              "non-positive slope eigenvalue at node " + std::to_string(k));
    }
    worst = std::max(worst, (1.0 + lam(i) * lam(i)) / lam(i));
  }
  return worst;
}

}  // namespace

ScalarField slope_ratio(const LagrangianState& state) {
  const double defect = lagrangian_defect(state);
  require(defect <= 1e-6, ErrorCode::precondition,
          "slope ratio needs a Lagrangian state (defect " + std::to_string(defect) + ")");
  ScalarField out(state.grid());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = node_slope_ratio(state, k, true);
  return out;
}

double slope_ratio_max(const LagrangianState& state) {
  double worst = 0.0;
  for (std::size_t k = 0; k < state.theta.size(); ++k) {
    worst = std::max(worst, node_slope_ratio(state, k, false));
  }
  return worst;
}

}  // namespace kmflow

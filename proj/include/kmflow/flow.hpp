#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kmflow/lagrangian.hpp"

namespace kmflow {

enum class Formulation { potential, map };
enum class DtPolicy { cfl, fixed };
enum class Integrator { euler, midpoint };
enum class Termination { converged, t_max, error };

std::string_view to_string(Formulation f);
std::string_view to_string(DtPolicy p);
std::string_view to_string(Integrator i);
std::string_view to_string(Termination t);

struct FlowConfig {
  Formulation formulation = Formulation::potential;
  DtPolicy dt_policy = DtPolicy::cfl;
  double safety = 0.5;   // cfl policy
  double dt = 1e-5;      // fixed policy
  double t_max = 1.0;
  double stop_grad_theta = 1e-8;
  int monitor_stride = 10;
  Integrator integrator = Integrator::euler;
  int max_halvings = 10;
  double max_principle_slack = 1e-9;
  double decay_tail_fraction = 0.5;
  Exec exec = Exec::parallel;
};

/// Throws ValidationError listing every invalid field.
void validate(const FlowConfig& config);

struct DecayFit {
  double rate = 0.0;
  double r_squared = 0.0;
  double window_start = 0.0;
  double window_end = 0.0;
  std::size_t samples = 0;
};

struct FlowReport {
  // Monitor series, one entry per monitored snapshot (every monitor_stride
  // accepted steps, plus the initial and final states).
  std::vector<double> times;
  std::vector<double> theta_min;
  std::vector<double> theta_max;
  std::vector<double> theta_osc;
  std::vector<double> slope_ratio_max;
  std::vector<double> lagrangian_defect;
  std::vector<double> det_dt_identity;   // sup |det DT e^{2 theta} rhobar(T)/rho - 1|
  std::vector<double> angle_route_gap;   // sup |theta_g - theta_detDT|
  std::vector<double> grad_theta_sup;

  double calibration_defect_final = 0.0;
  std::optional<DecayFit> decay_fit;
  std::size_t steps = 0;
  Termination termination = Termination::t_max;
  std::string error;

  std::size_t rejected_steps = 0;
  int halvings = 0;
  double t_final = 0.0;
  double dt_final = 0.0;
  std::size_t max_principle_violations = 0;
  double max_principle_excess = 0.0;  // largest per-step overshoot (<= 0 when clean)
  double theta_mean_final = 0.0;
  double theta_deviation_final = 0.0;  // sup |theta - mean theta|
  double pushforward_residual_final = 0.0;
  bool slope_bound_ok = true;           // slope ratio <= 1.05 x initial
  std::optional<double> defect_growth_rate;  // smallest C with defect <= defect(0) e^{Ct}
  double potential_drift = 0.0;         // mean of u_t removed by re-centering, last step

  std::optional<LagrangianState> final_state;
};

/// One explicit step of u_t = -2 theta, with u re-centred to zero mean. The
/// state must carry a potential. The successor's Newton solve warm-starts
/// from the current map.
LagrangianState step_potential(const LagrangianState& state, double dt,
                               Integrator integrator = Integrator::euler, Exec exec = Exec::parallel);

/// One explicit step of T_t = -2 b^{-1} grad theta, b evaluated at (x, T(x)).
/// W is rebuilt from the new map without symmetrisation.
LagrangianState step_map(const LagrangianState& state, double dt,
                         Integrator integrator = Integrator::euler, Exec exec = Exec::parallel);

/// dt = safety * h^2 * lambda_min(g) / (2n), h the smallest grid spacing.
double cfl_dt(const LagrangianState& state, double safety);

/// sup over nodes of the Euclidean norm of the discrete gradient of theta.
double grad_theta_sup(const LagrangianState& state);

/// Runs the flow from `initial` until sup |grad theta| < stop_grad_theta or
/// t >= t_max. A step that fails (spacelike, cut locus, Newton) is retried
/// with half the time step; the halving persists for the rest of the run.
/// When the halvings are exhausted the run stops with termination = error.
FlowReport run_flow(const LagrangianState& initial, const FlowConfig& config);

/// Least-squares fit of ln osc(t) over the last `tail_fraction` of the
/// series. Throws InsufficientTail for fewer than 20 samples in the window or
/// any value <= 1e-14.
DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& osc,
                   double tail_fraction);
DecayFit fit_decay(const FlowReport& report, double tail_fraction);

}  // namespace kmflow

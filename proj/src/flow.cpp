#include "kmflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kmflow/errors.hpp"

namespace kmflow {

std::string_view to_string(Formulation f) { return f == Formulation::potential ? "potential" : "map"; }
std::string_view to_string(DtPolicy p) { return p == DtPolicy::cfl ? "cfl" : "fixed"; }
std::string_view to_string(Integrator i) { return i == Integrator::euler ? "euler" : "midpoint"; }
std::string_view to_string(Termination t) {
  switch (t) {
    case Termination::converged: return "converged";
    case Termination::t_max: return "t_max";
    case Termination::error: return "error";
  }
  return "error";
}

void validate(const FlowConfig& c) {
  std::string problems;
  auto check = [&](bool ok, const char* what) {
    if (!ok) problems += std::string(problems.empty() ? "" : "; ") + what;
  };
  check(c.t_max > 0.0, "flow.t_max must be positive");
  check(c.stop_grad_theta > 0.0, "flow.stop_grad_theta must be positive");
  check(c.monitor_stride >= 1, "flow.monitor_stride must be at least 1");
  check(c.max_halvings >= 0, "flow.max_halvings must be non-negative");
  check(c.max_principle_slack >= 0.0, "flow.max_principle_slack must be non-negative");
  check(c.decay_tail_fraction > 0.0 && c.decay_tail_fraction <= 1.0,
        "flow.decay_tail_fraction must lie in (0, 1]");
  if (c.dt_policy == DtPolicy::cfl) {
    check(c.safety > 0.0 && c.safety <= 1.0, "flow.safety must lie in (0, 1]");
  } else {
    check(c.dt > 0.0, "flow.dt must be positive");
  }
  require(problems.empty(), ErrorCode::validation_error, problems);
}

namespace {

ScalarField recentred(ScalarField u) {
  const double m = u.mean();
  for (double& v : u.values()) v -= m;
  return u;
}

ScalarField advance_potential(const ScalarField& u, const ScalarField& theta, double dt) {
  ScalarField next = u;
  for (std::size_t k = 0; k < next.size(); ++k) next[k] = u[k] - 2.0 * dt * theta[k];
  return recentred(std::move(next));
}

// Displacement velocity -2 b^{-1} grad theta at every node.
VectorField map_velocity(const LagrangianState& s, Exec exec) {
  const Grid& g = s.grid();
  const int n = g.dims();
  const VectorField& grad = s.grad_theta;
  VectorField vel(g);
  for_each_node(exec, g.size(), [&](std::size_t k) {
    const Vec x = s.node(k);
    const Vec xbar = s.target(k);
    const Mat b = -s.model.mixed(x, xbar);
    Vec gt(n);
    for (int a = 0; a < n; ++a) gt(a) = grad[a][k];
    const Vec v = -2.0 * small_solve(b, gt);
    for (int a = 0; a < n; ++a) vel[a][k] = v(a);
  });
  return vel;
}

VectorField advance_map(const VectorField& disp, const VectorField& vel, double dt) {
  VectorField next = disp;
  for (int a = 0; a < disp.dims(); ++a) {
    for (std::size_t k = 0; k < disp[a].size(); ++k) next[a][k] = disp[a][k] + dt * vel[a][k];
  }
  return next;
}

}  // namespace

LagrangianState step_potential(const LagrangianState& state, double dt, Integrator integrator,
                               Exec exec) {
  require(state.potential.has_value(), ErrorCode::precondition,
          "step_potential needs a state carrying a potential");
  require(dt > 0.0, ErrorCode::precondition, "time step must be positive");
  const ScalarField& u = *state.potential;
  ScalarField next;
  if (integrator == Integrator::euler) {
    next = advance_potential(u, state.theta, dt);
  } else {
    const LagrangianState half = build_state(state.model, state.densities,
                                             advance_potential(u, state.theta, 0.5 * dt),
                                             &state.displacement, exec);
    next = advance_potential(u, half.theta, dt);
  }
  LagrangianState out = build_state(state.model, state.densities, next, &state.displacement, exec);
  out.time = state.time + dt;
  return out;
}

LagrangianState step_map(const LagrangianState& state, double dt, Integrator integrator, Exec exec) {
  require(dt > 0.0, ErrorCode::precondition, "time step must be positive");
  const VectorField v0 = map_velocity(state, exec);
  VectorField next;
  if (integrator == Integrator::euler) {
    next = advance_map(state.displacement, v0, dt);
  } else {
    const LagrangianState half = build_state_from_map(
        state.model, state.densities, advance_map(state.displacement, v0, 0.5 * dt), exec);
    next = advance_map(state.displacement, map_velocity(half, exec), dt);
  }
  LagrangianState out = build_state_from_map(state.model, state.densities, next, exec);
  out.time = state.time + dt;
  return out;
}

double cfl_dt(const LagrangianState& state, double safety) {
  require(safety > 0.0 && safety <= 1.0, ErrorCode::precondition, "CFL safety must lie in (0, 1]");
  require(state.min_metric_eigenvalue > 0.0, ErrorCode::spacelike_violation,
          "CFL step needs a spacelike state");
  const double h = state.grid().min_spacing();
  return safety * h * h * state.min_metric_eigenvalue / (2.0 * state.dims());
}

double grad_theta_sup(const LagrangianState& state) {
  const VectorField& grad = state.grad_theta;
  double worst = 0.0;
  for (std::size_t k = 0; k < state.theta.size(); ++k) {
    double s = 0.0;
    for (int a = 0; a < grad.dims(); ++a) s += grad[a][k] * grad[a][k];
    worst = std::max(worst, std::sqrt(s));
  }
  return worst;
}

namespace {

bool retryable(ErrorCode code) {
  switch (code) {
    case ErrorCode::spacelike_violation:
    case ErrorCode::cut_locus_violation:
    case ErrorCode::newton_divergence:
    case ErrorCode::nonpositive_density:
    case ErrorCode::singular_hessian:
      return true;
    default:
      return false;
  }
}

bool theta_finite(const LagrangianState& s) { return s.theta.all_finite(); }

void record_row(FlowReport& r, const LagrangianState& s, double grad_sup) {
  const double lo = s.theta.min();
  const double hi = s.theta.max();
  r.times.push_back(s.time);
  r.theta_min.push_back(lo);
  r.theta_max.push_back(hi);
  r.theta_osc.push_back(hi - lo);
  r.slope_ratio_max.push_back(slope_ratio_max(s));
  r.lagrangian_defect.push_back(lagrangian_defect(s));
  r.det_dt_identity.push_back(det_dt_identity_residual(s));
  r.angle_route_gap.push_back(angle_route_gap(s));
  r.grad_theta_sup.push_back(grad_sup);
}

}  // namespace

FlowReport run_flow(const LagrangianState& initial, const FlowConfig& config) {
  validate(config);
  if (config.formulation == Formulation::potential) {
    require(initial.potential.has_value(), ErrorCode::precondition,
            "potential formulation needs an initial potential");
  }
  require(initial.min_metric_eigenvalue > 0.0, ErrorCode::spacelike_violation,
          "initial state is not spacelike");

  FlowReport report;
  LagrangianState state = initial;
  double grad_sup = grad_theta_sup(state);
  record_row(report, state, grad_sup);
  bool row_current = true;

  auto attempt = [&](double dt) {
    return config.formulation == Formulation::potential
               ? step_potential(state, dt, config.integrator, config.exec)
               : step_map(state, dt, config.integrator, config.exec);
  };

  double scale = 1.0;
  double dt = 0.0;
  if (grad_sup < config.stop_grad_theta) {
    report.termination = Termination::converged;
  } else {
    report.termination = Termination::t_max;
    while (state.time < config.t_max) {
      const double base = config.dt_policy == DtPolicy::cfl ? cfl_dt(state, config.safety) : config.dt;
      dt = base * scale;
      const bool last = state.time + dt >= config.t_max;
      if (last) dt = config.t_max - state.time;

      std::optional<LagrangianState> next;
      try {
        next = attempt(dt);
        if (!theta_finite(*next)) next.reset();
      } catch (const Error& e) {
        if (!retryable(e.code())) {
          report.termination = Termination::error;
          report.error = e.what();
          break;
        }
        next.reset();
        report.error = e.what();
      }
      if (!next) {
        ++report.rejected_steps;
        if (report.halvings >= config.max_halvings) {
          report.termination = Termination::error;
          report.error = "time step halving exhausted after " + std::to_string(report.halvings) +
                         " halvings: " + report.error;
          break;
        }
        ++report.halvings;
        scale *= 0.5;
        continue;
      }
      report.error.clear();
      if (last) next->time = config.t_max;

      const double excess = std::max(next->theta.max() - state.theta.max(),
                                     state.theta.min() - next->theta.min());
      if (report.steps == 0) {
        report.max_principle_excess = excess;
      } else {
        report.max_principle_excess = std::max(report.max_principle_excess, excess);
      }
      if (excess > config.max_principle_slack) ++report.max_principle_violations;

      state = std::move(*next);
      ++report.steps;
      grad_sup = grad_theta_sup(state);
      const bool done = grad_sup < config.stop_grad_theta;
      row_current = false;
      if (report.steps % static_cast<std::size_t>(config.monitor_stride) == 0 || done ||
          state.time >= config.t_max) {
        record_row(report, state, grad_sup);
        row_current = true;
      }
      if (done) {
        report.termination = Termination::converged;
        break;
      }
    }
  }
  if (!row_current) record_row(report, state, grad_sup);

  report.t_final = state.time;
  report.dt_final = dt;
  report.calibration_defect_final = calibration_defect(state);
  report.theta_mean_final = state.theta.mean();
  double dev = 0.0;
  for (std::size_t k = 0; k < state.theta.size(); ++k) {
    dev = std::max(dev, std::abs(state.theta[k] - report.theta_mean_final));
  }
  report.theta_deviation_final = dev;
  report.pushforward_residual_final = pushforward_residual(state);
  report.potential_drift = -2.0 * report.theta_mean_final;

  const double slope0 = report.slope_ratio_max.front();
  report.slope_bound_ok =
      *std::max_element(report.slope_ratio_max.begin(), report.slope_ratio_max.end()) <= 1.05 * slope0;

  const double defect0 = report.lagrangian_defect.front();
  if (defect0 > 1e-14 && report.times.size() > 1) {
    double c = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < report.times.size(); ++i) {
      const double t = report.times[i] - report.times.front();
      if (t > 0.0) c = std::max(c, std::log(report.lagrangian_defect[i] / defect0) / t);
    }
    if (std::isfinite(c)) report.defect_growth_rate = c;
  }

  try {
    report.decay_fit = fit_decay(report, config.decay_tail_fraction);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::insufficient_tail) throw;
  }
  report.final_state = std::move(state);
  return report;
}

DecayFit fit_decay(const std::vector<double>& times, const std::vector<double>& osc,
                   double tail_fraction) {
  require(times.size() == osc.size(), ErrorCode::precondition, "series lengths differ");
  require(tail_fraction > 0.0 && tail_fraction <= 1.0, ErrorCode::precondition,
          "tail fraction must lie in (0, 1]");
  const std::size_t count =
      static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(times.size())));
  require(count >= 20, ErrorCode::insufficient_tail,
          "decay fit needs at least 20 tail samples, have " + std::to_string(count));
  const std::size_t first = times.size() - count;
  double st = 0.0, sy = 0.0;
  for (std::size_t i = first; i < times.size(); ++i) {
    require(osc[i] > 1e-14, ErrorCode::insufficient_tail,
            "oscillation at or below 1e-14 inside the tail window");
    st += times[i];
    sy += std::log(osc[i]);
  }
  const double m = static_cast<double>(count);
  const double tm = st / m, ym = sy / m;
  double stt = 0.0, sty = 0.0, syy = 0.0;
  for (std::size_t i = first; i < times.size(); ++i) {
    const double dt = times[i] - tm, dy = std::log(osc[i]) - ym;
    stt += dt * dt;
    sty += dt * dy;
    syy += dy * dy;
  }
  require(stt > 0.0, ErrorCode::insufficient_tail, "tail window spans no time");
  DecayFit fit;
  fit.rate = sty / stt;
  const double ss_res = std::max(0.0, syy - fit.rate * sty);
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  fit.window_start = times[first];
  fit.window_end = times.back();
  fit.samples = count;
  return fit;
}

DecayFit fit_decay(const FlowReport& report, double tail_fraction) {
  return fit_decay(report.times, report.theta_osc, tail_fraction);
}

}  // namespace kmflow

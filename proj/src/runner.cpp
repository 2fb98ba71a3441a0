#include "kmflow/runner.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <random>

#include "kmflow/errors.hpp"

namespace kmflow {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int resolve_threads(const std::optional<int>& override_threads, const RunConfig& config) {
  if (override_threads) return *override_threads;
  if (const char* env = std::getenv("KMFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    require(end != env && *end == '\0' && v >= 0, ErrorCode::validation_error,
            std::string("KMFLOW_THREADS must be a non-negative integer, got '") + env + "'");
    return static_cast<int>(v);
  }
  return config.output.threads;
}

LagrangianState initial_state(const RunConfig& config, const CostModel& model,
                              std::shared_ptr<const DensityPair> densities) {
  const Grid& grid = densities->rho.grid();
  const InitialSpec& init = config.initial;
  const Exec exec = config.flow.exec;
  ScalarField u(grid);
  if (init.kind != InitialSpec::Kind::identity) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      double v = init.amplitude;
      for (int a = 0; a < grid.dims(); ++a) {
        v *= std::sin(2.0 * std::numbers::pi * init.wavenumber * grid.coordinate(k, a) / grid.period(a));
      }
      u[k] = v;
    }
  }
  if (config.flow.formulation == Formulation::potential) {
    return build_state(model, std::move(densities), u, nullptr, exec);
  }
  VectorField disp = c_exponential(model, u, nullptr, exec);
  if (init.kind == InitialSpec::Kind::curl_perturbation) {
    for (std::size_t k = 0; k < grid.size(); ++k) {
      disp[0][k] += init.delta * std::sin(2.0 * std::numbers::pi * grid.coordinate(k, 1) / grid.period(1));
    }
  }
  return build_state_from_map(model, std::move(densities), disp, exec);
}

nlohmann::json to_json(const FlowReport& r) {
  nlohmann::json j;
  j["times"] = r.times;
  j["theta_min"] = r.theta_min;
  j["theta_max"] = r.theta_max;
  j["theta_osc"] = r.theta_osc;
  j["slope_ratio_max"] = r.slope_ratio_max;
  j["lagrangian_defect"] = r.lagrangian_defect;
  j["det_dt_identity"] = r.det_dt_identity;
  j["angle_route_gap"] = r.angle_route_gap;
  j["grad_theta_sup"] = r.grad_theta_sup;
  j["calibration_defect_final"] = r.calibration_defect_final;
  if (r.decay_fit) {
    j["decay_fit"] = {{"rate", r.decay_fit->rate},
                      {"r_squared", r.decay_fit->r_squared},
                      {"window", {r.decay_fit->window_start, r.decay_fit->window_end}},
                      {"samples", r.decay_fit->samples}};
  } else {
    j["decay_fit"] = nullptr;
  }
  j["steps"] = r.steps;
  j["termination"] = std::string(to_string(r.termination));
  j["error"] = r.error;
  j["rejected_steps"] = r.rejected_steps;
  j["halvings"] = r.halvings;
  j["t_final"] = r.t_final;
  j["dt_final"] = r.dt_final;
  j["max_principle_violations"] = r.max_principle_violations;
  j["max_principle_excess"] = r.max_principle_excess;
  j["theta_mean_final"] = r.theta_mean_final;
  j["theta_deviation_final"] = r.theta_deviation_final;
  j["pushforward_residual_final"] = r.pushforward_residual_final;
  j["slope_bound_ok"] = r.slope_bound_ok;
  j["defect_growth_rate"] = r.defect_growth_rate ? nlohmann::json(*r.defect_growth_rate) : nlohmann::json(nullptr);
  j["potential_drift"] = r.potential_drift;
  return j;
}

namespace {

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

nlohmann::json to_json(const MtwReport& r) {
  return {{"min_value", r.min_value},
          {"argmin_x", vec_json(r.argmin_x)},
          {"argmin_xbar", vec_json(r.argmin_xbar)},
          {"argmin_xi", vec_json(r.argmin_xi)},
          {"argmin_xibar", vec_json(r.argmin_xibar)},
          {"samples", r.samples},
          {"pairs", r.pairs},
          {"verdict", std::string(to_string(r.verdict))}};
}

void write_series_csv(const std::filesystem::path& path, const FlowReport& r) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + path.string());
  out << "t,theta_min,theta_max,theta_osc,slope_ratio_max,lagrangian_defect\n";
  for (std::size_t i = 0; i < r.times.size(); ++i) {
    out << format_double(r.times[i]) << ',' << format_double(r.theta_min[i]) << ','
        << format_double(r.theta_max[i]) << ',' << format_double(r.theta_osc[i]) << ','
        << format_double(r.slope_ratio_max[i]) << ',' << format_double(r.lagrangian_defect[i]) << '\n';
  }
}

void write_final_map_csv(const std::filesystem::path& path, const VectorField& displacement) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + path.string());
  const Grid& g = displacement.grid();
  const int n = g.dims();
  out << "node";
  for (int a = 0; a < n; ++a) out << ",x" << a;
  for (int a = 0; a < n; ++a) out << ",disp" << a;
  out << '\n';
  for (std::size_t k = 0; k < g.size(); ++k) {
    out << k;
    for (int a = 0; a < n; ++a) out << ',' << format_double(g.coordinate(k, a));
    for (int a = 0; a < n; ++a) out << ',' << format_double(displacement[a][k]);
    out << '\n';
  }
}

namespace {

nlohmann::json config_summary(const RunConfig& c) {
  return {{"scenario", std::string(to_string(c.scenario))},
          {"seed", c.seed},
          {"dims", c.dims},
          {"resolution", std::vector<int>(c.resolution.begin(), c.resolution.begin() + c.dims)},
          {"period", std::vector<double>(c.period.begin(), c.period.begin() + c.dims)},
          {"cost", {{"kind", std::string(to_string(c.cost_kind))},
                    {"epsilon", c.cost_params.epsilon},
                    {"guard_margin", c.guard.margin}}},
          {"flow", {{"formulation", std::string(to_string(c.flow.formulation))},
                    {"dt_policy", std::string(to_string(c.flow.dt_policy))},
                    {"integrator", std::string(to_string(c.flow.integrator))},
                    {"safety", c.flow.safety},
                    {"dt", c.flow.dt},
                    {"t_max", c.flow.t_max},
                    {"stop_grad_theta", c.flow.stop_grad_theta},
                    {"monitor_stride", c.flow.monitor_stride}}}};
}

std::shared_ptr<const DensityPair> densities_for(const RunConfig& c, const Grid& grid) {
  return std::make_shared<const DensityPair>(
      make_density_pair(make_density(c.rho, grid), make_density(c.rho_bar, grid)));
}

// Uniform point of the chart and a guard-valid partner.
std::pair<Vec, Vec> sample_pair(const CostModel& model, std::mt19937_64& rng) {
  const int n = model.dims();
  const double reach = std::max(0.5 - model.guard().margin - 0.1, 0.5 * (0.5 - model.guard().margin));
  std::uniform_real_distribution<double> unit(0.0, 1.0), disp(-reach, reach);
  Vec x(n), xbar(n);
  for (int a = 0; a < n; ++a) {
    x(a) = unit(rng) * model.period(a);
    xbar(a) = x(a) + disp(rng) * model.period(a);
  }
  return {x, xbar};
}

template <class Tensor>
double max_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

nlohmann::json geometry_checks(const RunConfig& c, std::uint64_t seed, bool& ok) {
  const CostModel model = make_cost(c);
  const VerificationReport partials = verify_partials(model, c.verify.samples, seed);

  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> dens(0.5, 2.0);
  double chr_abs = 0.0, chr_rel = 0.0, cur_abs = 0.0, cur_rel = 0.0;
  double analytic_max = 0.0, wedge_max = 0.0;
  for (int s = 0; s < c.verify.samples; ++s) {
    const auto [x, xbar] = sample_pair(model, rng);
    const Christoffel an = christoffel(model, x, xbar);
    const Christoffel fd = christoffel_fd_oracle(model, x, xbar, c.verify.fd_step);
    const Tensor4 ran = curvature(model, x, xbar);
    const Tensor4 rfd = curvature_fd_oracle(model, x, xbar, c.verify.fd_step);
    const double dc = std::max(max_diff(an.unbarred, fd.unbarred), max_diff(an.barred, fd.barred));
    const double sc = std::max({fd.unbarred.max_abs(), fd.barred.max_abs(), 1e-12});
    const double dr = max_diff(ran, rfd);
    const double sr = std::max(rfd.max_abs(), 1e-12);
    chr_abs = std::max(chr_abs, dc);
    chr_rel = std::max(chr_rel, dc / sc);
    cur_abs = std::max(cur_abs, dr);
    cur_rel = std::max(cur_rel, dr / sr);
    analytic_max = std::max({analytic_max, an.unbarred.max_abs(), an.barred.max_abs(), ran.max_abs()});
    const double r0 = dens(rng), r1 = dens(rng);
    wedge_max = std::max(wedge_max, wedge_identity_check(model, r0, r1, x, xbar).residual);
  }
  const bool flat = model.is_flat();
  const bool geometry_ok = flat ? analytic_max < 1e-12 : (chr_rel <= 1e-5 && cur_rel <= 1e-5);
  const bool wedge_ok = wedge_max < 1e-10;
  ok = partials.passed() && geometry_ok && wedge_ok;
  return {{"partials", {{"samples", partials.samples},
                        {"checks", partials.checks},
                        {"failures", partials.failures},
                        {"max_abs_error", partials.max_abs_error},
                        {"max_scaled_error", partials.max_scaled_error}}},
          {"christoffel", {{"max_abs_error", chr_abs}, {"max_rel_error", chr_rel}}},
          {"curvature", {{"max_abs_error", cur_abs}, {"max_rel_error", cur_rel}}},
          {"flat_cost", flat},
          {"analytic_max_abs", analytic_max},
          {"wedge_residual_max", wedge_max},
          {"samples", c.verify.samples},
          {"passed", ok}};
}

void write_report(const std::filesystem::path& dir, const nlohmann::json& report) {
  std::ofstream out(dir / "report.json");
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + (dir / "report.json").string());
  out << report.dump(2) << '\n';
}

}  // namespace

RunResult run_scenario(RunConfig config, const RunOptions& options) {
  if (options.seed) config.seed = *options.seed;
  if (options.out_dir) config.output.dir = *options.out_dir;
  RunResult result;
  nlohmann::json& report = result.report;
  report["config"] = config_summary(config);

  const std::filesystem::path dir = config.output.dir;
  try {
    set_thread_count(resolve_threads(options.threads, config));
    if (options.write_files) std::filesystem::create_directories(dir);
    const Grid grid = make_grid(config);
    const CostModel model = make_cost(config);

    switch (config.scenario) {
      case Scenario::flow:
      case Scenario::oracle_compare: {
        const auto densities = densities_for(config, grid);
        report["masses"] = {{"rho", densities->mass}, {"rho_bar", densities->mass_bar},
                            {"normalized", densities->normalized}};
        const LagrangianState start = initial_state(config, model, densities);
        FlowReport flow = run_flow(start, config.flow);
        report["flow"] = to_json(flow);

        bool violated = flow.max_principle_violations > 0;
        const bool converged = flow.termination == Termination::converged;
        const bool stationary_ok =
            !converged || (flow.theta_deviation_final < 1e-6 && flow.calibration_defect_final < 1e-5);
        violated = violated || !stationary_ok;
        nlohmann::json props = {{"max_principle_ok", flow.max_principle_violations == 0},
                                {"stationarity_ok", stationary_ok},
                                {"slope_bound_ok", flow.slope_bound_ok}};

        if (config.oracle.method != OracleSpec::Method::none && flow.final_state &&
            flow.termination != Termination::error) {
          OracleMap oracle;
          if (config.oracle.method == OracleSpec::Method::rearrangement) {
            oracle = rearrangement_1d(densities->rho, densities->rho_bar);
          } else {
            oracle = sinkhorn(densities->rho, densities->rho_bar, model,
                              {config.oracle.epsilon, config.oracle.max_iters, config.oracle.tol,
                               config.flow.exec});
          }
          const MapComparison cmp = compare_maps(flow.final_state->displacement, oracle.displacement);
          report["oracle"] = {{"method", std::string(to_string(oracle.method))},
                              {"sup_error", cmp.sup_error},
                              {"l2_error", cmp.l2_error},
                              {"epsilon", oracle.epsilon},
                              {"iterations", oracle.iterations},
                              {"marginal_residual", oracle.marginal_residual},
                              {"rotation", oracle.rotation}};
          if (config.scenario == Scenario::oracle_compare) {
            const bool oracle_ok = cmp.sup_error < config.oracle.tolerance;
            props["oracle_ok"] = oracle_ok;
            violated = violated || !oracle_ok;
          }
        }
        report["properties"] = props;
        if (options.write_files) {
          write_series_csv(dir / "series.csv", flow);
          if (flow.final_state) write_final_map_csv(dir / "final_map.csv", flow.final_state->displacement);
        }
        if (flow.termination == Termination::error) result.exit_code = exit_error;
        else if (violated) result.exit_code = exit_violation;
        result.flow = std::move(flow);
        break;
      }
      case Scenario::mtw_scan: {
        MtwScanOptions opts;
        opts.directions_per_point = config.mtw.directions;
        opts.stride = config.mtw.stride;
        opts.seed = config.seed;
        opts.exec = config.flow.exec;
        const MtwReport mtw = mtw_scan(model, grid, opts);
        report["mtw"] = to_json(mtw);
        if (mtw.verdict == MtwVerdict::violated) result.exit_code = exit_violation;
        break;
      }
      case Scenario::geometry_verify: {
        bool ok = true;
        report["geometry"] = geometry_checks(config, config.seed, ok);
        if (!ok) result.exit_code = exit_violation;
        break;
      }
    }
  } catch (const std::exception& e) {
    report["error"] = e.what();
    result.exit_code = exit_error;
  }
  report["exit_code"] = result.exit_code;
  if (options.write_files) {
    try {
      std::filesystem::create_directories(dir);
      write_report(dir, report);
    } catch (const std::exception& e) {
      report["error"] = e.what();
      result.exit_code = exit_error;
    }
  }
  return result;
}

RunResult verify_config(RunConfig config, const RunOptions& options) {
  if (options.seed) config.seed = *options.seed;
  RunResult result;
  result.report["config"] = config_summary(config);
  try {
    set_thread_count(resolve_threads(options.threads, config));
    bool ok = true;
    result.report["geometry"] = geometry_checks(config, config.seed, ok);
    if (!ok) result.exit_code = exit_violation;
  } catch (const std::exception& e) {
    result.report["error"] = e.what();
    result.exit_code = exit_error;
  }
  result.report["exit_code"] = result.exit_code;
  return result;
}

}  // namespace kmflow

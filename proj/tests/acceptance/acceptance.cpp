// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "kmflow/config.hpp"
#include "kmflow/geometry.hpp"
#include "kmflow/lagrangian.hpp"
#include "kmflow/paracomplex.hpp"
#include "kmflow/runner.hpp"

using namespace kmflow;
namespace fs = std::filesystem;

namespace {

const fs::path config_dir = KMFLOW_CONFIG_DIR;
const fs::path work_dir = fs::temp_directory_path() / "kmflow_acceptance";

int failures = 0;

void verdict(const char* id, bool pass, const std::string& detail) {
  std::printf("%s %s  %s\n", id, pass ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct Run {
  RunResult result;
  double seconds = 0.0;
  fs::path dir;
  const FlowReport& flow() const { return *result.flow; }
  double oracle_sup() const {
    return result.report.contains("oracle") ? result.report["oracle"]["sup_error"].get<double>() : INFINITY;
  }
};

Run run(const std::string& config, const std::string& tag, std::optional<int> threads) {
  Run r;
  r.dir = work_dir / tag;
  fs::remove_all(r.dir);
  const RunConfig c = parse_config(config_dir / config);
  const auto start = std::chrono::steady_clock::now();
  r.result = run_scenario(c, {r.dir, threads, std::nullopt, true});
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!r.result.flow) {
    std::fprintf(stderr, "%s: %s\n", config.c_str(), r.result.report.dump().c_str());
    std::exit(1);
  }
  const FlowReport& f = *r.result.flow;
  std::fprintf(stderr, "[%s] %s after %zu steps, t = %.4g, %.1f s, exit %d\n", tag.c_str(),
               std::string(to_string(f.termination)).c_str(), f.steps, f.t_final, r.seconds,
               r.result.exit_code);
  return r;
}

double series_max(const std::vector<double>& v) { return v.empty() ? INFINITY : *std::max_element(v.begin(), v.end()); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Steps where theta_max rose or theta_min fell by more than the slack
// between consecutive monitored snapshots.
std::size_t snapshot_violations(const FlowReport& f, double slack) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < f.times.size(); ++i) {
    if (f.theta_max[i] > f.theta_max[i - 1] + slack) ++n;
    if (f.theta_min[i] < f.theta_min[i - 1] - slack) ++n;
  }
  return n;
}

std::pair<Vec, Vec> guarded_pair(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0), d(-0.3, 0.3);
  Vec x(n), xb(n);
  for (int a = 0; a < n; ++a) {
    x(a) = u(rng);
    xb(a) = x(a) + d(rng);
  }
  return {x, xb};
}

template <class T>
double max_diff(const T& a, const T& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) m = std::max(m, std::abs(a.v[i] - b.v[i]));
  return m;
}

void curvature_criterion() {
  std::mt19937_64 rng(2024);
  double chr_rel = 0.0, cur_rel = 0.0;
  const CostModel curved(CostKind::perturbed_quadratic, 2, CostParams{0.02, {1, 1}});
  for (int s = 0; s < 50; ++s) {
    const auto [x, xb] = guarded_pair(2, rng);
    const Christoffel an = christoffel(curved, x, xb);
    const Christoffel fd = christoffel_fd_oracle(curved, x, xb);
    const double scale = std::max({fd.unbarred.max_abs(), fd.barred.max_abs()});
    chr_rel = std::max(chr_rel, std::max(max_diff(an.unbarred, fd.unbarred), max_diff(an.barred, fd.barred)) / scale);
    const Tensor4 r = curvature(curved, x, xb);
    const Tensor4 rf = curvature_fd_oracle(curved, x, xb);
    cur_rel = std::max(cur_rel, max_diff(r, rf) / rf.max_abs());
  }
  double flat_max = 0.0;
  for (CostKind kind : {CostKind::torus_squared_distance, CostKind::bilinear_flat}) {
    const CostModel flat(kind, 2);
    for (int s = 0; s < 50; ++s) {
      const auto [x, xb] = guarded_pair(2, rng);
      const Christoffel an = christoffel(flat, x, xb);
      flat_max = std::max({flat_max, an.unbarred.max_abs(), an.barred.max_abs(), curvature(flat, x, xb).max_abs()});
    }
  }
  verdict("AC6", chr_rel <= 1e-5 && cur_rel <= 1e-5 && flat_max < 1e-12,
          fmt("curvature formula: christoffel rel %.2e, R rel %.2e (<= 1e-5, 50 points); flat max %.1e (< 1e-12)",
              chr_rel, cur_rel, flat_max));
}

void paracomplex_criterion() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> dens(0.2, 5.0);
  const CostModel curved(CostKind::perturbed_quadratic, 2, CostParams{0.02, {1, 1}});
  double wedge = 0.0;
  for (int s = 0; s < 100; ++s) {
    const auto [x, xb] = guarded_pair(2, rng);
    const double r0 = dens(rng), r1 = dens(rng);
    wedge = std::max(wedge, wedge_identity_check(curved, r0, r1, x, xb).residual);
  }
  double norm = 0.0;
  for (int i = -5000; i <= 5000; ++i) {
    norm = std::max(norm, std::abs(ParaComplex::exp_k(i * 1e-3).para_norm2() - 1.0));
  }
  verdict("AC7", wedge < 1e-10 && norm < 1e-12,
          fmt("para-complex identities: wedge residual %.2e (< 1e-10, 100 points); |para_norm(e^{k theta}) - 1| %.2e (< 1e-12, |theta| <= 5)",
              wedge, norm));
}

}  // namespace

int main() {
  fs::create_directories(work_dir);

  // Geometry criteria first; they take seconds.
  curvature_criterion();
  paracomplex_criterion();

  const Run one = run("flow_1d.toml", "run1", 1);
  const Run one_again = run("flow_1d.toml", "run1_repeat", 1);
  const Run two = run("flow_2d.toml", "run2", std::nullopt);

  verdict("AC1", one.flow().termination == Termination::converged && one.oracle_sup() < 5e-3 && one.seconds < 60.0,
          fmt("1-D oracle: %s, sup|T - T*| %.2e (< 5e-3), %.1f s single-threaded (< 60 s)",
              std::string(to_string(one.flow().termination)).c_str(), one.oracle_sup(), one.seconds));
  verdict("AC2", two.flow().termination == Termination::converged && two.oracle_sup() < 2e-2 && two.seconds < 600.0,
          fmt("2-D oracle: %s, sup|T - T*_sinkhorn| %.2e (< 2e-2), %.1f s (< 600 s)",
              std::string(to_string(two.flow().termination)).c_str(), two.oracle_sup(), two.seconds));

  const std::size_t step_viol = one.flow().max_principle_violations + two.flow().max_principle_violations;
  const std::size_t snap_viol = snapshot_violations(one.flow(), 1e-9) + snapshot_violations(two.flow(), 1e-9);
  verdict("AC3", step_viol == 0 && snap_viol == 0,
          fmt("maximum principle: %zu step violations over %zu accepted steps, %zu snapshot violations; largest excess %.2e (slack 1e-9)",
              step_viol, one.flow().steps + two.flow().steps, snap_viol,
              std::max(one.flow().max_principle_excess, two.flow().max_principle_excess)));

  const auto& fit = one.flow().decay_fit;
  verdict("AC4", fit && fit->r_squared > 0.99 && fit->rate < 0.0,
          fit ? fmt("exponential decay: rate %.4g (< 0), r^2 %.6f (> 0.99) over t in [%.3g, %.3g], %zu samples", fit->rate,
                    fit->r_squared, fit->window_start, fit->window_end, fit->samples)
              : std::string("exponential decay: no fit"));

  const Run exact = run("map_exact.toml", "map_exact", std::nullopt);
  const Run curl = run("map_curl.toml", "map_curl", std::nullopt);
  const double delta = 1e-3;
  const double exact_defect = series_max(exact.flow().lagrangian_defect);
  const double curl_defect = series_max(curl.flow().lagrangian_defect);
  const bool windows = exact.flow().t_final >= 1.0 && curl.flow().t_final >= 1.0 &&
                       exact.flow().termination == Termination::t_max && curl.flow().termination == Termination::t_max;
  const double growth = curl.flow().defect_growth_rate.value_or(NAN);
  verdict("AC5", windows && exact_defect < 1e-7 && curl_defect <= 10.0 * delta,
          fmt("Lagrangian preservation on t in [0, %.3g]: exact start max defect %.2e (< 1e-7); delta = 1e-3 start max defect %.3e (<= 1e-2), initial %.3e, fitted C %.3g",
              std::min(exact.flow().t_final, curl.flow().t_final), exact_defect, curl_defect,
              curl.flow().lagrangian_defect.front(), growth));

  const FlowReport& f1 = one.flow();
  verdict("AC8", f1.termination == Termination::converged && f1.theta_deviation_final < 1e-6 &&
                     f1.calibration_defect_final < 1e-5 && f1.pushforward_residual_final < 5e-3,
          fmt("calibration at stationarity: sup|theta - mean| %.2e (< 1e-6), calibration defect %.2e (< 1e-5), pushforward %.2e (< 5e-3)",
              f1.theta_deviation_final, f1.calibration_defect_final, f1.pushforward_residual_final));

  const double det_identity = std::max(series_max(f1.det_dt_identity), series_max(two.flow().det_dt_identity));
  verdict("AC9", det_identity < 1e-6,
          fmt("det DT identity: max over %zu snapshots %.2e (< 1e-6)",
              f1.det_dt_identity.size() + two.flow().det_dt_identity.size(), det_identity));

  const std::string a = slurp(one.dir / "series.csv"), b = slurp(one_again.dir / "series.csv");
  verdict("AC10", !a.empty() && a == b,
          fmt("determinism: series.csv %zu bytes, repeat %s", a.size(), a == b ? "byte-identical" : "differs"));

  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "kmflow/runner.hpp"

using namespace kmflow;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("kmflow_runner_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig small_flow() {
  return parse_config_string(R"(
scenario = "flow"
[grid]
dims = 1
resolution = 64
[density.rho_bar]
family = "sine_product"
amplitude = 0.3
[flow]
t_max = 2.0
monitor_stride = 5
)");
}

}  // namespace

TEST_CASE("identity fixed point exits cleanly") {
  RunConfig c = parse_config_string("scenario = \"flow\"\n[grid]\ndims = 1\nresolution = 64\n");
  const auto dir = scratch("identity");
  const RunResult r = run_scenario(c, {dir, 1, std::nullopt, true});
  CHECK(r.exit_code == exit_ok);
  REQUIRE(r.flow.has_value());
  CHECK(r.flow->termination == Termination::converged);
  for (double o : r.flow->theta_osc) CHECK(o < 1e-14);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "series.csv"));
  CHECK(std::filesystem::exists(dir / "final_map.csv"));
  CHECK(slurp(dir / "series.csv").rfind("t,theta_min,theta_max,theta_osc,slope_ratio_max,lagrangian_defect\n", 0) == 0);
  std::filesystem::remove_all(dir);
}

TEST_CASE("a huge fixed step exhausts the halvings") {
  RunConfig c = small_flow();
  c.flow.dt_policy = DtPolicy::fixed;
  c.flow.dt = 1e4;
  const auto dir = scratch("huge_dt");
  const RunResult r = run_scenario(c, {dir, std::nullopt, std::nullopt, true});
  CHECK(r.exit_code == exit_error);
  CHECK(r.report["flow"]["termination"] == "error");
  CHECK_FALSE(r.report["flow"]["error"].get<std::string>().empty());
  const auto written = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(written["exit_code"] == exit_error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("geometry_verify on the perturbed cost") {
  RunConfig c = parse_config_string(R"(
scenario = "geometry_verify"
[grid]
dims = 2
resolution = 8
[cost]
kind = "perturbed_quadratic"
epsilon = 0.02
[verify]
samples = 20
)");
  const RunResult r = run_scenario(c, {std::nullopt, std::nullopt, std::nullopt, false});
  CHECK(r.exit_code == exit_ok);
  const auto& g = r.report["geometry"];
  CHECK(g["passed"] == true);
  CHECK(g["curvature"]["max_rel_error"].get<double>() <= 1e-5);
  CHECK(g["christoffel"]["max_rel_error"].get<double>() <= 1e-5);
  CHECK(g["partials"]["failures"] == 0);

  const RunResult v = verify_config(c);
  CHECK(v.exit_code == exit_ok);
  CHECK(v.report["geometry"] == g);
}

TEST_CASE("mtw_scan of the flat cost") {
  RunConfig c = parse_config_string("scenario = \"mtw_scan\"\n[grid]\ndims = 2\nresolution = 8\n");
  const RunResult r = run_scenario(c, {std::nullopt, std::nullopt, std::nullopt, false});
  CHECK(r.exit_code == exit_ok);
  CHECK(r.report["mtw"]["verdict"] == "nonnegative_with_nulls");
}

TEST_CASE("report.json reproduces the logged scalars") {
  const auto dir = scratch("roundtrip");
  const RunResult r = run_scenario(small_flow(), {dir, std::nullopt, std::nullopt, true});
  REQUIRE(r.exit_code == exit_ok);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(j == r.report);
  const auto& f = j["flow"];
  CHECK(f["t_final"].get<double>() == r.flow->t_final);
  CHECK(f["steps"].get<std::size_t>() == r.flow->steps);
  CHECK(f["calibration_defect_final"].get<double>() == r.flow->calibration_defect_final);
  CHECK(f["theta_osc"].get<std::vector<double>>() == r.flow->theta_osc);
  CHECK(f["decay_fit"]["rate"].get<double>() == r.flow->decay_fit->rate);
  std::filesystem::remove_all(dir);
}

TEST_CASE("same config and seed give byte-identical series") {
  const auto a = scratch("det_a"), b = scratch("det_b");
  run_scenario(small_flow(), {a, std::nullopt, 7, true});
  run_scenario(small_flow(), {b, std::nullopt, 7, true});
  const std::string sa = slurp(a / "series.csv");
  CHECK_FALSE(sa.empty());
  CHECK(sa == slurp(b / "series.csv"));
  CHECK(slurp(a / "final_map.csv") == slurp(b / "final_map.csv"));
  std::filesystem::remove_all(a);
  std::filesystem::remove_all(b);
}

TEST_CASE("thread resolution order") {
  RunConfig c = small_flow();
  c.output.threads = 3;
  ::unsetenv("KMFLOW_THREADS");
  CHECK(resolve_threads(std::nullopt, c) == 3);
  ::setenv("KMFLOW_THREADS", "2", 1);
  CHECK(resolve_threads(std::nullopt, c) == 2);
  CHECK(resolve_threads(1, c) == 1);
  ::unsetenv("KMFLOW_THREADS");
}

TEST_CASE("format_double round-trips") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23}) CHECK(std::stod(format_double(v)) == v);
}

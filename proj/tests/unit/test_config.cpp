#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "kmflow/config.hpp"

using namespace kmflow;

namespace {

constexpr const char* minimal = R"(
scenario = "flow"
[grid]
dims = 1
resolution = 128
[cost]
kind = "torus_squared_distance"
[density.rho_bar]
family = "sine_product"
amplitude = 0.3
)";

std::vector<std::string> problems_of(const std::string& text, ErrorCode expected) {
  try {
    parse_config_string(text);
  } catch (const ConfigError& e) {
    CHECK(e.code() == expected);
    return e.problems();
  }
  FAIL("expected a configuration error");
  return {};
}

bool mentions(const std::vector<std::string>& problems, const std::string& what) {
  for (const auto& p : problems)
    if (p.find(what) != std::string::npos) return true;
  return false;
}

}  // namespace

TEST_CASE("minimal flow config") {
  const RunConfig c = parse_config_string(minimal);
  CHECK(c.scenario == Scenario::flow);
  CHECK(c.dims == 1);
  CHECK(c.resolution[0] == 128);
  CHECK(c.cost_kind == CostKind::torus_squared_distance);
  CHECK(c.rho.family == DensitySpec::Family::constant);
  CHECK(c.rho_bar.family == DensitySpec::Family::sine_product);
  CHECK(c.rho_bar.amplitude[0] == 0.3);
  const Grid g = make_grid(c);
  CHECK(g.size() == 128);
  const ScalarField rb = make_density(c.rho_bar, g);
  CHECK(rb.max() == doctest::Approx(1.3));
  CHECK(rb.min() == doctest::Approx(0.7));
  CHECK(make_cost(c).kind() == CostKind::torus_squared_distance);
}

TEST_CASE("scalars broadcast across axes and arrays are read per axis") {
  const RunConfig c = parse_config_string(R"(
scenario = "mtw_scan"
seed = 42
[grid]
dims = 2
resolution = [32, 16]
period = 1.0
[cost]
kind = "perturbed_quadratic"
epsilon = 0.02
frequency = 1
guard_margin = 0.15
[mtw]
directions = 24
)");
  CHECK(c.seed == 42);
  CHECK(c.resolution[0] == 32);
  CHECK(c.resolution[1] == 16);
  CHECK(c.period[1] == 1.0);
  CHECK(c.cost_params.epsilon == 0.02);
  CHECK(c.cost_params.frequency[1] == 1);
  CHECK(c.guard.margin == 0.15);
  CHECK(c.mtw.directions == 24);
}

TEST_CASE("density that goes negative") {
  const auto p = problems_of(std::string(minimal) + "\n[density.rho]\nfamily = \"sine_product\"\namplitude = -2\n",
                             ErrorCode::validation_error);
  CHECK(mentions(p, "density not positive"));
}

TEST_CASE("unknown cost kind names the field") {
  std::string text = minimal;
  text.replace(text.find("torus_squared_distance"), 22, "euclidean");
  const auto p = problems_of(text, ErrorCode::validation_error);
  CHECK(mentions(p, "cost.kind"));
}

TEST_CASE("every validation problem is reported") {
  const auto p = problems_of(R"(
scenario = "flow"
[grid]
dims = 3
resolution = 0
[cost]
kind = "quartic"
[flow]
safety = 4
monitor_stride = 0
unknown_key = 1
)",
                             ErrorCode::validation_error);
  CHECK(p.size() >= 5);
  CHECK(mentions(p, "grid.dims"));
  CHECK(mentions(p, "cost.kind"));
  CHECK(mentions(p, "flow.safety"));
  CHECK(mentions(p, "flow.monitor_stride"));
  CHECK(mentions(p, "unknown_key"));
}

TEST_CASE("parse errors carry the line number") {
  const auto p = problems_of("scenario = \"flow\"\n[grid\ndims = 1\n", ErrorCode::parse_error);
  CHECK(mentions(p, "line 2"));
  const auto q = problems_of("scenario = \"flow\"\n\ndims 1\n", ErrorCode::parse_error);
  CHECK(mentions(q, "line 3"));
}

TEST_CASE("integer fields reject fractions") {
  const auto p = problems_of("[grid]\ndims = 1\nresolution = 12.5\n", ErrorCode::validation_error);
  CHECK(mentions(p, "grid.resolution"));
}

TEST_CASE("too few MTW directions") {
  const auto p = problems_of("scenario = \"mtw_scan\"\n[grid]\ndims = 2\nresolution = 8\n[mtw]\ndirections = 4\n",
                             ErrorCode::validation_error);
  CHECK(mentions(p, "mtw.directions"));
}

TEST_CASE("files and tabulated densities") {
  const auto dir = std::filesystem::temp_directory_path() / "kmflow_config_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream csv(dir / "rho.csv");
    // One row per index along the second axis.
    for (int k = 0; k < 8; ++k) csv << (k % 2 ? 0.5 : 1.5) << (k < 7 ? "," : "\n");
    std::ofstream cfg(dir / "run.toml");
    cfg << "scenario = \"flow\"\n[grid]\ndims = 1\nresolution = 8\n"
           "[density.rho]\nfamily = \"csv\"\nfile = \"rho.csv\"\n[output]\ndir = \"res\"\n";
  }
  const RunConfig c = parse_config(dir / "run.toml");
  CHECK(c.output.dir == dir / "res");
  const ScalarField rho = make_density(c.rho, make_grid(c));
  CHECK(rho[0] == 1.5);
  CHECK(rho[1] == 0.5);

  try {
    parse_config(dir / "missing.toml");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::io_error);
  }
  std::filesystem::remove_all(dir);
}

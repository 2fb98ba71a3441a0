#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "kmflow/cost.hpp"
#include "kmflow/errors.hpp"
#include "kmflow/flow.hpp"
#include "kmflow/grid.hpp"

namespace kmflow {

enum class Scenario { flow, mtw_scan, geometry_verify, oracle_compare };
std::string_view to_string(Scenario s);

struct DensitySpec {
  enum class Family { constant, sine_product, csv };
  Family family = Family::constant;
  double value = 1.0;                    // constant
  double scale = 1.0;                    // sine_product
  std::array<double, 2> amplitude{0.0, 0.0};
  std::array<int, 2> wavenumber{1, 1};
  std::array<double, 2> phase{0.0, 0.0};
  std::filesystem::path file;            // csv, resolved against the config directory
};

struct InitialSpec {
  enum class Kind { identity, sine_potential, curl_perturbation };
  Kind kind = Kind::identity;
  double amplitude = 0.0;  // u = amplitude * prod_a sin(2 pi k x_a / P_a)
  int wavenumber = 1;
  double delta = 0.0;      // curl_perturbation: displacement += delta (sin(2 pi x_1 / P_1), 0)
};

struct OracleSpec {
  enum class Method { none, rearrangement, sinkhorn };
  Method method = Method::none;
  double epsilon = 1e-3;
  std::size_t max_iters = 50000;
  double tol = 1e-9;
  double tolerance = 5e-3;  // sup error allowed by the oracle_compare scenario
};

struct MtwSpec {
  int directions = 16;
  int stride = 0;
};

struct VerifySpec {
  int samples = 50;
  double fd_step = 1e-3;
};

struct OutputSpec {
  std::filesystem::path dir = "out";
  int threads = 0;  // 0 keeps the OpenMP default
};

struct RunConfig {
  Scenario scenario = Scenario::flow;
  std::uint64_t seed = 1;
  int dims = 1;
  std::array<int, 2> resolution{128, 1};
  std::array<double, 2> period{1.0, 1.0};
  CostKind cost_kind = CostKind::torus_squared_distance;
  CostParams cost_params;
  CutLocusGuard guard;
  DensitySpec rho;
  DensitySpec rho_bar;
  FlowConfig flow;
  InitialSpec initial;
  OracleSpec oracle;
  MtwSpec mtw;
  VerifySpec verify;
  OutputSpec output;
};

/// Thrown by parse_config with every problem found, not just the first.
class ConfigError : public Error {
 public:
  ConfigError(ErrorCode code, std::vector<std::string> problems);
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

/// Reads a config file:
///
///   scenario = "flow"
///   seed = 7
///   [grid]
///   dims = 1
///   resolution = [256]
///   [density.rho_bar]
///   family = "sine_product"
///   amplitude = [0.3]
///
/// Lines are `key = value` under `[section]` headers; values are numbers,
/// quoted strings, true/false or numeric arrays; `#` starts a comment.
/// Throws ConfigError with code parse_error (line numbers) or
/// validation_error (field names).
RunConfig parse_config(const std::filesystem::path& path);
RunConfig parse_config_string(std::string_view text,
                              const std::filesystem::path& base_dir = std::filesystem::path("."));

Grid make_grid(const RunConfig& config);
CostModel make_cost(const RunConfig& config);
ScalarField make_density(const DensitySpec& spec, const Grid& grid);

}  // namespace kmflow

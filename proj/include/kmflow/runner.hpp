#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "kmflow/config.hpp"
#include "kmflow/flow.hpp"
#include "kmflow/geometry.hpp"
#include "kmflow/ot_oracle.hpp"

namespace kmflow {

inline constexpr int exit_ok = 0;
inline constexpr int exit_error = 1;
inline constexpr int exit_violation = 2;

struct RunOptions {
  std::optional<std::filesystem::path> out_dir;  // overrides output.dir
  std::optional<int> threads;                    // overrides KMFLOW_THREADS and output.threads
  std::optional<std::uint64_t> seed;             // overrides seed
  bool write_files = true;
};

struct RunResult {
  int exit_code = exit_ok;
  nlohmann::json report;
  std::optional<FlowReport> flow;  // flow and oracle_compare scenarios
};

/// Thread count for a run: the explicit override, else KMFLOW_THREADS, else
/// output.threads; 0 means the OpenMP default.
int resolve_threads(const std::optional<int>& override_threads, const RunConfig& config);

/// Initial Lagrangian state described by the [initial] section. The map
/// formulation starts from the graph of the map (Jacobian by finite
/// differences), the potential formulation from the potential.
LagrangianState initial_state(const RunConfig& config, const CostModel& model,
                              std::shared_ptr<const DensityPair> densities);

/// Runs the configured scenario and writes report.json (plus series.csv and
/// final_map.csv for flow runs) into the output directory. Exit code 0 on
/// success, 2 when a monitored property is violated, 1 on error; module
/// errors are caught and recorded in the report.
RunResult run_scenario(RunConfig config, const RunOptions& options = {});

/// The checks behind `kmflow verify`: cost partials against finite
/// differences, Christoffel symbols and curvature against the
/// finite-difference geometry, and the wedge identity, all for the config's
/// cost model. Writes nothing.
RunResult verify_config(RunConfig config, const RunOptions& options = {});

nlohmann::json to_json(const FlowReport& report);
nlohmann::json to_json(const MtwReport& report);

/// Columns t,theta_min,theta_max,theta_osc,slope_ratio_max,lagrangian_defect
/// with 17 significant digits.
void write_series_csv(const std::filesystem::path& path, const FlowReport& report);

/// Columns node,x0[,x1],disp0[,disp1].
void write_final_map_csv(const std::filesystem::path& path, const VectorField& displacement);

std::string format_double(double v);

}  // namespace kmflow

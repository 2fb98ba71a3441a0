#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "kmflow/config.hpp"
#include "kmflow/runner.hpp"

namespace {

int print_config_error(const kmflow::ConfigError& e) {
  std::cerr << "kmflow: invalid configuration (" << kmflow::to_string(e.code()) << ")\n";
  for (const auto& p : e.problems()) std::cerr << "  " << p << '\n';
  return kmflow::exit_error;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generalized Lagrangian mean curvature flow on Kim-McCann manifolds"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<int> threads;
  std::optional<std::uint64_t> seed;

  auto* run = app.add_subcommand("run", "Run the scenario described by a config file");
  run->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides output.dir)");
  run->add_option("--threads", threads, "Thread count (overrides KMFLOW_THREADS)")->check(CLI::NonNegativeNumber);
  run->add_option("--seed", seed, "Random seed (overrides seed)");

  auto* verify = app.add_subcommand("verify", "Check the config and the geometry of its cost model");
  verify->add_option("config", config_path, "Config file")->required()->check(CLI::ExistingFile);
  verify->add_option("--threads", threads, "Thread count (overrides KMFLOW_THREADS)")->check(CLI::NonNegativeNumber);
  verify->add_option("--seed", seed, "Random seed (overrides seed)");

  CLI11_PARSE(app, argc, argv);

  kmflow::RunConfig config;
  try {
    config = kmflow::parse_config(config_path);
  } catch (const kmflow::ConfigError& e) {
    return print_config_error(e);
  }

  kmflow::RunOptions options;
  if (out_dir) options.out_dir = *out_dir;
  options.threads = threads;
  options.seed = seed;

  const kmflow::RunResult result =
      run->parsed() ? kmflow::run_scenario(config, options) : kmflow::verify_config(config, options);

  if (verify->parsed()) {
    std::cout << result.report.dump(2) << '\n';
  } else {
    std::cout << "scenario " << kmflow::to_string(config.scenario) << " finished with exit code "
              << result.exit_code << "; outputs in "
              << options.out_dir.value_or(config.output.dir).string() << '\n';
    if (result.flow) {
      std::cout << "termination " << kmflow::to_string(result.flow->termination) << " after "
                << result.flow->steps << " steps, t = " << result.flow->t_final << '\n';
    }
  }
  if (result.report.contains("error")) std::cerr << "kmflow: " << result.report["error"].get<std::string>() << '\n';
  return result.exit_code;
}

// Serial reference vs OpenMP kernels. Each benchmark takes the execution
// policy as its first argument (0 = serial, 1 = parallel) and the grid
// resolution per axis as the second.

#include <benchmark/benchmark.h>

#include <cmath>
#include <memory>
#include <numbers>

#include "kmflow/flow.hpp"
#include "kmflow/geometry.hpp"
#include "kmflow/lagrangian.hpp"
#include "kmflow/ot_oracle.hpp"

using namespace kmflow;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

Exec policy(const benchmark::State& state) { return state.range(0) ? Exec::parallel : Exec::serial; }

Grid square(int n) {
  const int res[] = {n, n};
  const double per[] = {1.0, 1.0};
  return make_grid(2, res, per);
}

ScalarField wave(const Grid& g, double a) {
  ScalarField f(g);
  for (std::size_t k = 0; k < g.size(); ++k)
    f[k] = a * std::sin(two_pi * g.coordinate(k, 0)) * std::cos(two_pi * g.coordinate(k, 1));
  return f;
}

std::shared_ptr<const DensityPair> densities(const Grid& g) {
  ScalarField rb = wave(g, 0.2);
  for (double& v : rb.values()) v += 1.0;
  return std::make_shared<const DensityPair>(make_density_pair(ScalarField(g, 1.0), rb));
}

const CostModel curved(CostKind::perturbed_quadratic, 2, CostParams{0.01, {1, 1}});

void BM_Hessian(benchmark::State& state) {
  const Grid g = square(static_cast<int>(state.range(1)));
  const ScalarField u = wave(g, 0.01);
  for (auto _ : state) benchmark::DoNotOptimize(hessian(u, 4, policy(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.size()));
}

void BM_CExponential(benchmark::State& state) {
  const Grid g = square(static_cast<int>(state.range(1)));
  const VectorField du = gradient(wave(g, 0.002));
  for (auto _ : state) benchmark::DoNotOptimize(c_exponential(curved, du, nullptr, policy(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.size()));
}

void BM_BuildState(benchmark::State& state) {
  const Grid g = square(static_cast<int>(state.range(1)));
  const auto dens = densities(g);
  const ScalarField u = wave(g, 0.002);
  for (auto _ : state) benchmark::DoNotOptimize(build_state(curved, dens, u, nullptr, policy(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.size()));
}

void BM_StepMap(benchmark::State& state) {
  const Grid g = square(static_cast<int>(state.range(1)));
  const CostModel flat(CostKind::torus_squared_distance, 2);
  const auto dens = densities(g);
  const LagrangianState s = build_state_from_map(flat, dens, c_exponential(flat, wave(g, 0.002)), policy(state));
  const double dt = cfl_dt(s, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(step_map(s, dt, Integrator::euler, policy(state)));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(g.size()));
}

void BM_Sinkhorn(benchmark::State& state) {
  const Grid g = square(static_cast<int>(state.range(1)));
  const auto dens = densities(g);
  const CostModel flat(CostKind::torus_squared_distance, 2);
  SinkhornOptions opts;
  opts.epsilon = 1e-2;
  opts.tol = 1e-8;
  opts.exec = policy(state);
  for (auto _ : state) benchmark::DoNotOptimize(sinkhorn(dens->rho, dens->rho_bar, flat, opts));
}

void BM_MtwScan(benchmark::State& state) {
  const Grid g = square(static_cast<int>(state.range(1)));
  MtwScanOptions opts;
  opts.exec = policy(state);
  for (auto _ : state) benchmark::DoNotOptimize(mtw_scan(curved, g, opts));
}

}  // namespace

BENCHMARK(BM_Hessian)->ArgsProduct({{0, 1}, {64, 256}})->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_CExponential)->ArgsProduct({{0, 1}, {64, 128}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BuildState)->ArgsProduct({{0, 1}, {64, 128}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_StepMap)->ArgsProduct({{0, 1}, {64, 128}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Sinkhorn)->ArgsProduct({{0, 1}, {16}})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MtwScan)->ArgsProduct({{0, 1}, {16}})->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();

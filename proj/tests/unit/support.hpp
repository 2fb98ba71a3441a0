#pragma once

#include <cmath>
#include <memory>
#include <numbers>

#include "kmflow/cost.hpp"
#include "kmflow/grid.hpp"
#include "kmflow/lagrangian.hpp"

namespace kmtest {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

inline kmflow::Grid grid1(int n) {
  const int res[] = {n};
  const double per[] = {1.0};
  return kmflow::make_grid(1, res, per);
}

inline kmflow::Grid grid2(int n) {
  const int res[] = {n, n};
  const double per[] = {1.0, 1.0};
  return kmflow::make_grid(2, res, per);
}

template <class F>
kmflow::ScalarField sample(const kmflow::Grid& g, F f) {
  kmflow::ScalarField out(g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.dims() == 1)
      out[k] = f(g.coordinate(k, 0), 0.0);
    else
      out[k] = f(g.coordinate(k, 0), g.coordinate(k, 1));
  }
  return out;
}

inline std::shared_ptr<const kmflow::DensityPair> densities(kmflow::ScalarField rho,
                                                            kmflow::ScalarField rho_bar) {
  return std::make_shared<const kmflow::DensityPair>(
      kmflow::make_density_pair(std::move(rho), std::move(rho_bar)));
}

inline std::shared_ptr<const kmflow::DensityPair> uniform(const kmflow::Grid& g, double a = 1.0,
                                                          double b = 1.0) {
  return densities(kmflow::ScalarField(g, a), kmflow::ScalarField(g, b));
}

inline kmflow::CostModel torus(int n) { return kmflow::CostModel(kmflow::CostKind::torus_squared_distance, n); }

inline kmflow::CostModel perturbed(int n, double eps) {
  return kmflow::CostModel(kmflow::CostKind::perturbed_quadratic, n, kmflow::CostParams{eps, {1, 1}});
}

}  // namespace kmtest

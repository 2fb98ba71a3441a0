#pragma once

#include <cstddef>
#include <string_view>

#include "kmflow/cost.hpp"
#include "kmflow/grid.hpp"

namespace kmflow {

enum class OracleMethod { rearrangement_1d, sinkhorn };
std::string_view to_string(OracleMethod m);

struct OracleMap {
  Grid grid;
  VectorField displacement;  // T*(x) = x + displacement, wrapped to (-P/2, P/2]
  OracleMethod method = OracleMethod::rearrangement_1d;
  double epsilon = 0.0;           // sinkhorn only
  std::size_t iterations = 0;     // sinkhorn only
  double marginal_residual = 0.0; // sinkhorn only, L1 over both marginals
  double rotation = 0.0;          // rearrangement only: mass shift of the anchor
};

/// Periodic monotone rearrangement T* = Fbar^{-1}(F(x) + s) on T^1. F and
/// Fbar are cumulative integrals of the Catmull-Rom reconstructions of the
/// densities; Fbar is inverted on its cubic Hermite interpolant. The rotation
/// s minimises the transport cost 1/2 d^2: a scan over 64 candidates
/// followed by a root solve of the stationarity condition. Throws
/// MassMismatch when the masses differ by more than 1e-10 (relative).
OracleMap rearrangement_1d(const ScalarField& rho, const ScalarField& rho_bar);

struct SinkhornOptions {
  double epsilon = 1e-3;
  std::size_t max_iters = 50000;  // total over the whole epsilon schedule
  double tol = 1e-9;              // L1 marginal residual at the final epsilon
  Exec exec = Exec::parallel;
};

/// Log-domain entropic OT between the node measures rho h^n / mass and
/// rhobar h^n / mass, epsilon halved from 0.1 down to the target. Pairs
/// rejected by the cost guard get infinite cost. T* is the barycentric
/// projection of the coupling (wrapped displacements averaged). Throws
/// MassMismatch, Precondition (more than 64 points per axis, epsilon <= 0) or
/// NonConvergence.
OracleMap sinkhorn(const ScalarField& rho, const ScalarField& rho_bar, const CostModel& model,
                   const SinkhornOptions& options = {});

struct MapComparison {
  double sup_error = 0.0;  // max over nodes of the Euclidean wrapped difference
  double l2_error = 0.0;   // (sum |d|^2 cell_volume)^{1/2}
};

/// Throws GridMismatch when the two displacement fields live on different grids.
MapComparison compare_maps(const VectorField& displacement, const VectorField& reference);

}  // namespace kmflow

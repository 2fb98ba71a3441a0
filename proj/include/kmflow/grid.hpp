#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "kmflow/parallel.hpp"

namespace kmflow {

/// Uniform periodic grid on the flat torus T^n, n in {1, 2}.
///
/// Nodes sit at x_a = i_a * spacing_a with i_a in [0, N_a). Axis 0 is the
/// fastest-varying index of the flat layout: flat = i0 + N0 * i1.
class Grid {
 public:
  Grid() = default;

  int dims() const { return dims_; }
  int resolution(int axis) const { return res_[axis]; }
  double period(int axis) const { return period_[axis]; }
  double spacing(int axis) const { return period_[axis] / res_[axis]; }
  double min_spacing() const;
  std::size_t size() const { return static_cast<std::size_t>(res_[0]) * res_[1]; }
  /// Volume of one cell, the quadrature weight of the periodic sum.
  double cell_volume() const;

  /// Flat index with periodic wraparound on every axis (i = -1 maps to N - 1).
  std::size_t index(long i0, long i1 = 0) const;
  std::array<int, 2> multi_index(std::size_t flat) const;
  double coordinate(std::size_t flat, int axis) const;

  bool operator==(const Grid&) const = default;

  friend Grid make_grid(int n_dims, std::span<const int> resolution,
                        std::span<const double> period);

 private:
  int dims_ = 1;
  std::array<int, 2> res_{8, 1};
  std::array<double, 2> period_{1.0, 1.0};
};

/// Throws unsupported_dimension for n_dims outside {1, 2} and invalid_grid for
/// fewer than 8 points or a non-positive period on any axis.
Grid make_grid(int n_dims, std::span<const int> resolution, std::span<const double> period);

/// Wraps a displacement into (-period/2, period/2].
double wrap_displacement(double d, double period);
/// Wraps a coordinate into [0, period).
double wrap_coordinate(double x, double period);

class ScalarField {
 public:
  ScalarField() = default;
  explicit ScalarField(const Grid& grid, double fill = 0.0);
  ScalarField(const Grid& grid, std::vector<double> values);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return values_.size(); }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  bool all_finite() const;
  double min() const;
  double max() const;
  /// Periodic quadrature of the field over the torus; summed serially in
  /// index order so the result does not depend on the thread count.
  double integral() const;
  double mean() const;

 private:
  Grid grid_;
  std::vector<double> values_;
};

/// n scalar components stored separately (structure of arrays).
struct VectorField {
  VectorField() = default;
  explicit VectorField(const Grid& grid, double fill = 0.0);

  const Grid& grid() const { return components.front().grid(); }
  int dims() const { return static_cast<int>(components.size()); }
  ScalarField& operator[](int a) { return components[a]; }
  const ScalarField& operator[](int a) const { return components[a]; }

  std::vector<ScalarField> components;
};

/// n x n entries stored row-major, each as a scalar field.
struct MatrixField {
  MatrixField() = default;
  explicit MatrixField(const Grid& grid, double fill = 0.0);

  const Grid& grid() const { return entries.front().grid(); }
  int dims() const { return n; }
  ScalarField& operator()(int i, int j) { return entries[i * n + j]; }
  const ScalarField& operator()(int i, int j) const { return entries[i * n + j]; }

  int n = 0;
  std::vector<ScalarField> entries;
};

/// Central finite difference with periodic wraparound.
///
/// order 1, accuracy 2: (f[i+1] - f[i-1]) / 2h
/// order 1, accuracy 4: (f[i-2] - 8 f[i-1] + 8 f[i+1] - f[i+2]) / 12h
/// order 2, accuracy 2: (f[i-1] - 2 f[i] + f[i+1]) / h^2
/// order 2, accuracy 4: (-f[i-2] + 16 f[i-1] - 30 f[i] + 16 f[i+1] - f[i+2]) / 12h^2
ScalarField diff(const ScalarField& field, int axis, int order, int accuracy = 4,
                 Exec exec = Exec::parallel);

/// Plain modular-index implementation of diff; the reference the optimized
/// kernel is tested against.
ScalarField diff_reference(const ScalarField& field, int axis, int order, int accuracy = 4);

/// Mixed partial d^2 f / dx_a dx_b (a != b), composed from one-axis first
/// derivatives in ascending axis order.
ScalarField diff_mixed(const ScalarField& field, int axis_a, int axis_b, int accuracy = 4,
                       Exec exec = Exec::parallel);

/// Gradient of a scalar field: one first-derivative field per axis.
VectorField gradient(const ScalarField& field, int accuracy = 4, Exec exec = Exec::parallel);

/// Hessian: pure second derivatives on the diagonal, composed mixed partials
/// off the diagonal (stored symmetrically).
MatrixField hessian(const ScalarField& field, int accuracy = 4, Exec exec = Exec::parallel);

/// Jacobian J(i, j) = d v_i / d x_j of a vector field.
MatrixField jacobian(const VectorField& field, int accuracy = 4, Exec exec = Exec::parallel);

/// Periodic Catmull-Rom (cubic) interpolation, tensor product in 2-D. The
/// point is wrapped into the fundamental domain first.
double interpolate(const ScalarField& field, std::span<const double> point);

}  // namespace kmflow

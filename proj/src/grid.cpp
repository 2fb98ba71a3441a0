#include "kmflow/grid.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <string>

#include "kmflow/errors.hpp"

namespace kmflow {

void set_thread_count(int threads) {
  if (threads > 0) omp_set_num_threads(threads);
}

int thread_count() { return omp_get_max_threads(); }

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::precondition: return "Precondition";
    case ErrorCode::unsupported_dimension: return "UnsupportedDimension";
    case ErrorCode::invalid_grid: return "InvalidGrid";
    case ErrorCode::cut_locus_violation: return "CutLocusViolation";
    case ErrorCode::unsupported_order: return "UnsupportedOrder";
    case ErrorCode::singular_hessian: return "SingularHessian";
    case ErrorCode::null_pair_unavailable: return "NullPairUnavailable";
    case ErrorCode::nonpositive_density: return "NonpositiveDensity";
    case ErrorCode::newton_divergence: return "NewtonDivergence";
    case ErrorCode::spacelike_violation: return "SpacelikeViolation";
    case ErrorCode::route_mismatch: return "RouteMismatch";
    case ErrorCode::insufficient_tail: return "InsufficientTail";
    case ErrorCode::mass_mismatch: return "MassMismatch";
    case ErrorCode::non_convergence: return "NonConvergence";
    case ErrorCode::grid_mismatch: return "GridMismatch";
    case ErrorCode::parse_error: return "ParseError";
    case ErrorCode::validation_error: return "ValidationError";
    case ErrorCode::io_error: return "IoError";
  }
  return "Unknown";
}

Grid make_grid(int n_dims, std::span<const int> resolution, std::span<const double> period) {
  require(n_dims == 1 || n_dims == 2, ErrorCode::unsupported_dimension,
          "unsupported dimension " + std::to_string(n_dims) + " (expected 1 or 2)");
  require(resolution.size() == static_cast<std::size_t>(n_dims) &&
              period.size() == static_cast<std::size_t>(n_dims),
          ErrorCode::invalid_grid, "resolution/period must have one entry per axis");
  Grid g;
  g.dims_ = n_dims;
  for (int a = 0; a < n_dims; ++a) {
    require(resolution[a] >= 8, ErrorCode::invalid_grid,
            "axis " + std::to_string(a) + " needs at least 8 points");
    require(period[a] > 0.0 && std::isfinite(period[a]), ErrorCode::invalid_grid,
            "axis " + std::to_string(a) + " period must be positive");
    g.res_[a] = resolution[a];
    g.period_[a] = period[a];
  }
  if (n_dims == 1) {
    g.res_[1] = 1;
    g.period_[1] = 1.0;
  }
  return g;
}

double Grid::min_spacing() const {
  double h = spacing(0);
  if (dims_ == 2) h = std::min(h, spacing(1));
  return h;
}

double Grid::cell_volume() const {
  double v = spacing(0);
  if (dims_ == 2) v *= spacing(1);
  return v;
}

std::size_t Grid::index(long i0, long i1) const {
  const long n0 = res_[0];
  const long n1 = res_[1];
  i0 %= n0;
  if (i0 < 0) i0 += n0;
  i1 %= n1;
  if (i1 < 0) i1 += n1;
  return static_cast<std::size_t>(i0 + n0 * i1);
}

std::array<int, 2> Grid::multi_index(std::size_t flat) const {
  const auto n0 = static_cast<std::size_t>(res_[0]);
  return {static_cast<int>(flat % n0), static_cast<int>(flat / n0)};
}

double Grid::coordinate(std::size_t flat, int axis) const {
  return multi_index(flat)[axis] * spacing(axis);
}

double wrap_displacement(double d, double period) {
  // (-P/2, P/2]
  return d - period * std::ceil(d / period - 0.5);
}

double wrap_coordinate(double x, double period) {
  double r = std::fmod(x, period);
  if (r < 0.0) r += period;
  if (r >= period) r -= period;
  return r;
}

ScalarField::ScalarField(const Grid& grid, double fill) : grid_(grid), values_(grid.size(), fill) {}

ScalarField::ScalarField(const Grid& grid, std::vector<double> values)
    : grid_(grid), values_(std::move(values)) {
  require(values_.size() == grid_.size(), ErrorCode::invalid_grid,
          "field has " + std::to_string(values_.size()) + " values for a grid of " +
              std::to_string(grid_.size()) + " nodes");
}

bool ScalarField::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

double ScalarField::min() const { return *std::min_element(values_.begin(), values_.end()); }
double ScalarField::max() const { return *std::max_element(values_.begin(), values_.end()); }

double ScalarField::integral() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s * grid_.cell_volume();
}

double ScalarField::mean() const {
  double s = 0.0;
  for (double v : values_) s += v;
  return s / static_cast<double>(values_.size());
}

VectorField::VectorField(const Grid& grid, double fill)
    : components(static_cast<std::size_t>(grid.dims()), ScalarField(grid, fill)) {}

MatrixField::MatrixField(const Grid& grid, double fill)
    : n(grid.dims()), entries(static_cast<std::size_t>(n * n), ScalarField(grid, fill)) {}

namespace {

struct Stencil {
  int order;
  int accuracy;
  double h;

  // One expression per stencil, shared by the reference and the optimized
  // kernel so both produce identical bits.
  double operator()(double fm2, double fm1, double f0, double fp1, double fp2) const {
    if (order == 1) {
      if (accuracy == 2) return (fp1 - fm1) / (2.0 * h);
      return ((fm2 - fp2) + 8.0 * (fp1 - fm1)) / (12.0 * h);
    }
    if (accuracy == 2) return ((fm1 + fp1) - 2.0 * f0) / (h * h);
    return (16.0 * (fm1 + fp1) - (fm2 + fp2) - 30.0 * f0) / (12.0 * h * h);
  }
};

Stencil make_stencil(const Grid& g, int axis, int order, int accuracy) {
  require(axis >= 0 && axis < g.dims(), ErrorCode::precondition, "diff axis out of range");
  require(order == 1 || order == 2, ErrorCode::precondition, "diff order must be 1 or 2");
  require(accuracy == 2 || accuracy == 4, ErrorCode::precondition,
          "diff accuracy must be 2 or 4");
  return Stencil{order, accuracy, g.spacing(axis)};
}

}  // namespace

ScalarField diff_reference(const ScalarField& field, int axis, int order, int accuracy) {
  const Grid& g = field.grid();
  const Stencil st = make_stencil(g, axis, order, accuracy);
  ScalarField out(g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto mi = g.multi_index(k);
    auto at = [&](int shift) {
      return axis == 0 ? field[g.index(mi[0] + shift, mi[1])] : field[g.index(mi[0], mi[1] + shift)];
    };
    out[k] = st(at(-2), at(-1), at(0), at(1), at(2));
  }
  return out;
}

ScalarField diff(const ScalarField& field, int axis, int order, int accuracy, Exec exec) {
  const Grid& g = field.grid();
  const Stencil st = make_stencil(g, axis, order, accuracy);
  ScalarField out(g);
  const int n0 = g.resolution(0);
  const int n1 = g.resolution(1);
  const double* f = field.values().data();
  double* o = out.values().data();

  if (axis == 0) {
    // Rows are contiguous: interior without wraparound, two cells at each end
    // with it.
    for_each_node(exec, static_cast<std::size_t>(n1), [&](std::size_t row) {
      const double* r = f + row * n0;
      double* w = o + row * n0;
      auto wrap = [n0](int i) { return ((i % n0) + n0) % n0; };
      for (int i : {0, 1, n0 - 2, n0 - 1}) {
        w[i] = st(r[wrap(i - 2)], r[wrap(i - 1)], r[i], r[wrap(i + 1)], r[wrap(i + 2)]);
      }
      for (int i = 2; i < n0 - 2; ++i) w[i] = st(r[i - 2], r[i - 1], r[i], r[i + 1], r[i + 2]);
    });
  } else {
    // Combine whole neighbouring rows.
    for_each_node(exec, static_cast<std::size_t>(n1), [&](std::size_t row) {
      const long j = static_cast<long>(row);
      auto row_ptr = [&](long shift) {
        long jj = (j + shift) % n1;
        if (jj < 0) jj += n1;
        return f + jj * n0;
      };
      const double* m2 = row_ptr(-2);
      const double* m1 = row_ptr(-1);
      const double* c0 = row_ptr(0);
      const double* p1 = row_ptr(1);
      const double* p2 = row_ptr(2);
      double* w = o + row * n0;
      for (int i = 0; i < n0; ++i) w[i] = st(m2[i], m1[i], c0[i], p1[i], p2[i]);
    });
  }
  return out;
}

ScalarField diff_mixed(const ScalarField& field, int axis_a, int axis_b, int accuracy, Exec exec) {
  require(axis_a != axis_b, ErrorCode::precondition, "mixed partial needs distinct axes");
  const int first = std::min(axis_a, axis_b);
  const int second = std::max(axis_a, axis_b);
  return diff(diff(field, first, 1, accuracy, exec), second, 1, accuracy, exec);
}

VectorField gradient(const ScalarField& field, int accuracy, Exec exec) {
  VectorField out;
  for (int a = 0; a < field.grid().dims(); ++a) {
    out.components.push_back(diff(field, a, 1, accuracy, exec));
  }
  return out;
}

MatrixField hessian(const ScalarField& field, int accuracy, Exec exec) {
  const Grid& g = field.grid();
  MatrixField out(g);
  for (int a = 0; a < g.dims(); ++a) out(a, a) = diff(field, a, 2, accuracy, exec);
  if (g.dims() == 2) {
    out(0, 1) = diff_mixed(field, 0, 1, accuracy, exec);
    out(1, 0) = out(0, 1);
  }
  return out;
}

MatrixField jacobian(const VectorField& field, int accuracy, Exec exec) {
  const Grid& g = field.grid();
  MatrixField out(g);
  for (int i = 0; i < g.dims(); ++i) {
    for (int j = 0; j < g.dims(); ++j) out(i, j) = diff(field[i], j, 1, accuracy, exec);
  }
  return out;
}

namespace {

struct CubicWeights {
  long base;  // index of the node left of the point
  std::array<double, 4> w;
};

CubicWeights catmull_rom(double x, double h, int n) {
  const double s = x / h;
  double fl = std::floor(s);
  double t = s - fl;
  long base = static_cast<long>(fl);
  if (base >= n) {  // x rounded up to the period
    base -= n;
  }
  const double t2 = t * t;
  const double t3 = t2 * t;
  return {base,
          {0.5 * (-t3 + 2.0 * t2 - t), 0.5 * (3.0 * t3 - 5.0 * t2 + 2.0),
           0.5 * (-3.0 * t3 + 4.0 * t2 + t), 0.5 * (t3 - t2)}};
}

}  // namespace

double interpolate(const ScalarField& field, std::span<const double> point) {
  const Grid& g = field.grid();
  require(point.size() >= static_cast<std::size_t>(g.dims()), ErrorCode::precondition,
          "interpolation point has too few coordinates");
  const double x0 = wrap_coordinate(point[0], g.period(0));
  const CubicWeights w0 = catmull_rom(x0, g.spacing(0), g.resolution(0));
  if (g.dims() == 1) {
    double v = 0.0;
    for (int k = 0; k < 4; ++k) v += w0.w[k] * field[g.index(w0.base - 1 + k)];
    return v;
  }
  const double x1 = wrap_coordinate(point[1], g.period(1));
  const CubicWeights w1 = catmull_rom(x1, g.spacing(1), g.resolution(1));
  double v = 0.0;
  for (int l = 0; l < 4; ++l) {
    double row = 0.0;
    for (int k = 0; k < 4; ++k) row += w0.w[k] * field[g.index(w0.base - 1 + k, w1.base - 1 + l)];
    v += w1.w[l] * row;
  }
  return v;
}

}  // namespace kmflow

#include "kmflow/cost.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "kmflow/errors.hpp"
#include "kmflow/grid.hpp"

namespace kmflow {

std::string_view to_string(CostKind kind) {
  switch (kind) {
    case CostKind::bilinear_flat: return "bilinear_flat";
    case CostKind::torus_squared_distance: return "torus_squared_distance";
    case CostKind::perturbed_quadratic: return "perturbed_quadratic";
  }
  return "unknown";
}

std::optional<CostKind> parse_cost_kind(std::string_view name) {
  if (name == "bilinear_flat") return CostKind::bilinear_flat;
  if (name == "torus_squared_distance") return CostKind::torus_squared_distance;
  if (name == "perturbed_quadratic") return CostKind::perturbed_quadratic;
  return std::nullopt;
}

CostModel::CostModel(CostKind kind, int n_dims, CostParams params, CutLocusGuard guard,
                     std::array<double, 2> period)
    : kind_(kind), dims_(n_dims), params_(params), guard_(guard), period_(period) {
  require(n_dims == 1 || n_dims == 2, ErrorCode::unsupported_dimension,
          "cost models support n = 1 or 2");
  require(guard.margin > 0.0 && guard.margin < 0.5, ErrorCode::precondition,
          "guard margin must lie in (0, 0.5)");
  for (int a = 0; a < n_dims; ++a) {
    require(period[a] > 0.0, ErrorCode::precondition, "cost period must be positive");
  }
  if (kind == CostKind::perturbed_quadratic) {
    for (int a = 0; a < n_dims; ++a) {
      require(params.frequency[a] >= 1, ErrorCode::precondition,
              "perturbation frequency must be >= 1");
      const double alpha = 2.0 * std::numbers::pi * params.frequency[a] / period[a];
      require(std::abs(params.epsilon) * alpha * alpha <= perturbation_cap, ErrorCode::precondition,
              "perturbation |eps| (2 pi k)^2 exceeds " + std::to_string(perturbation_cap) +
                  "; -c_{i sbar} would lose positive definiteness");
    }
  } else {
    params_.epsilon = 0.0;
  }
}

bool CostModel::accepts(const Vec& x, const Vec& xbar) const {
  for (int a = 0; a < dims_; ++a) {
    const double d = wrap_displacement(x(a) - xbar(a), period_[a]);
    if (!(std::abs(d) <= (0.5 - guard_.margin) * period_[a])) return false;
  }
  return true;
}

void CostModel::require_valid(const Vec& x, const Vec& xbar) const {
  if (accepts(x, xbar)) return;
  std::string where = "(";
  for (int a = 0; a < dims_; ++a) where += (a ? ", " : "") + std::to_string(x(a));
  where += ") -> (";
  for (int a = 0; a < dims_; ++a) where += (a ? ", " : "") + std::to_string(xbar(a));
  where += ")";
  throw Error(ErrorCode::cut_locus_violation,
              "pair " + where + " is within guard margin " + std::to_string(guard_.margin) +
                  " of the cut locus");
}

namespace {

template <class Real>
Real wrap_signed(Real d, Real period) {
  using std::ceil;
  return d - period * ceil(d / period - Real(0.5));
}

// sin(t + p pi / 2) without rounding the phase shift.
template <class Real>
Real shifted_sin(Real t, int p) {
  using std::cos;
  using std::sin;
  switch (((p % 4) + 4) % 4) {
    case 0: return sin(t);
    case 1: return cos(t);
    case 2: return -sin(t);
    default: return -cos(t);
  }
}

}  // namespace

template <class Real>
Real CostModel::axis_partial(int axis, Real x, Real xbar, int p, int q) const {
  const Real period = static_cast<Real>(period_[axis]);
  const Real delta = wrap_signed<Real>(x - xbar, period);
  const int m = p + q;
  Real base = 0;
  if (kind_ == CostKind::bilinear_flat) {
    // c = -x * y with y = x - delta the lift of xbar next to x.
    const Real y = x - delta;
    if (p == 0 && q == 0) base = -x * y;
    else if (p == 1 && q == 0) base = -y;
    else if (p == 0 && q == 1) base = -x;
    else if (p == 1 && q == 1) base = -1;
    return base;
  }
  const Real sign_q = (q % 2 == 0) ? Real(1) : Real(-1);
  if (m == 0) base = Real(0.5) * delta * delta;
  else if (m == 1) base = sign_q * delta;
  else if (m == 2) base = sign_q;
  if (kind_ == CostKind::perturbed_quadratic && params_.epsilon != 0.0) {
    const Real alpha = Real(2) * std::numbers::pi_v<Real> * params_.frequency[axis] / period;
    Real scale = static_cast<Real>(params_.epsilon);
    for (int k = 0; k < m; ++k) scale *= alpha;
    base += scale * shifted_sin(alpha * x, p) * shifted_sin(alpha * xbar, q);
  }
  return base;
}

double CostModel::value(const Vec& x, const Vec& xbar) const {
  require_valid(x, xbar);
  double v = 0.0;
  for (int a = 0; a < dims_; ++a) v += axis_partial<double>(a, x(a), xbar(a), 0, 0);
  return v;
}

long double CostModel::value_extended(std::span<const long double> x,
                                      std::span<const long double> xbar) const {
  long double v = 0.0L;
  for (int a = 0; a < dims_; ++a) v += axis_partial<long double>(a, x[a], xbar[a], 0, 0);
  return v;
}

double CostModel::partial(const Vec& x, const Vec& xbar, std::span<const int> orders_x,
                          std::span<const int> orders_xbar) const {
  require(orders_x.size() == static_cast<std::size_t>(dims_) &&
              orders_xbar.size() == static_cast<std::size_t>(dims_),
          ErrorCode::precondition, "multi-index length must equal the dimension");
  int total = 0;
  int axes_touched = 0;
  int axis = -1;
  for (int a = 0; a < dims_; ++a) {
    require(orders_x[a] >= 0 && orders_xbar[a] >= 0, ErrorCode::precondition,
            "negative derivative order");
    total += orders_x[a] + orders_xbar[a];
    if (orders_x[a] + orders_xbar[a] > 0) {
      ++axes_touched;
      axis = a;
    }
  }
  require(total <= max_order, ErrorCode::unsupported_order,
          "total order " + std::to_string(total) + " exceeds " + std::to_string(max_order));
  require_valid(x, xbar);
  if (total == 0) return value(x, xbar);
  if (axes_touched > 1) return 0.0;
  return axis_partial<double>(axis, x(axis), xbar(axis), orders_x[axis], orders_xbar[axis]);
}

Vec CostModel::grad_x(const Vec& x, const Vec& xbar) const {
  Vec g(dims_);
  for (int a = 0; a < dims_; ++a) g(a) = axis_partial<double>(a, x(a), xbar(a), 1, 0);
  return g;
}

Mat CostModel::mixed(const Vec& x, const Vec& xbar) const {
  Mat m = Mat::Zero(dims_, dims_);
  for (int a = 0; a < dims_; ++a) m(a, a) = axis_partial<double>(a, x(a), xbar(a), 1, 1);
  return m;
}

Mat CostModel::hess_x(const Vec& x, const Vec& xbar) const {
  Mat m = Mat::Zero(dims_, dims_);
  for (int a = 0; a < dims_; ++a) m(a, a) = axis_partial<double>(a, x(a), xbar(a), 2, 0);
  return m;
}

Vec CostModel::displacement(const Vec& x, const Vec& xbar) const {
  Vec d(dims_);
  for (int a = 0; a < dims_; ++a) d(a) = wrap_signed(xbar(a) - x(a), period_[a]);
  return d;
}

namespace {

// Central-difference weights for a single variable, indexed by offset + 2.
struct Weights1d {
  std::array<long double, 5> w{};
};

Weights1d central_weights(int order) {
  switch (order) {
    case 0: return {{0, 0, 1, 0, 0}};
    case 1: return {{0, -0.5L, 0, 0.5L, 0}};
    case 2: return {{0, 1, -2, 1, 0}};
    case 3: return {{-0.5L, 1, 0, -1, 0.5L}};
    default: return {{1, -4, 6, -4, 1}};
  }
}

long double central_difference(const CostModel& model, std::span<const long double> base,
                               std::span<const int> orders, long double h) {
  const int vars = static_cast<int>(base.size());
  const int n = vars / 2;
  std::vector<Weights1d> weights;
  for (int v = 0; v < vars; ++v) weights.push_back(central_weights(orders[v]));
  std::vector<long double> point(base.begin(), base.end());
  long double sum = 0.0L;
  // Enumerate offsets in {-2..2}^vars, skipping zero weights.
  std::vector<int> off(vars, -2);
  while (true) {
    long double w = 1.0L;
    for (int v = 0; v < vars && w != 0.0L; ++v) w *= weights[v].w[off[v] + 2];
    if (w != 0.0L) {
      for (int v = 0; v < vars; ++v) point[v] = base[v] + off[v] * h;
      sum += w * model.value_extended(std::span(point).first(n), std::span(point).subspan(n));
    }
    int v = 0;
    while (v < vars && ++off[v] > 2) off[v++] = -2;
    if (v == vars) break;
  }
  int total = 0;
  for (int o : orders) total += o;
  long double scale = 1.0L;
  for (int k = 0; k < total; ++k) scale *= h;
  return sum / scale;
}

}  // namespace

double finite_difference_partial(const CostModel& model, const Vec& x, const Vec& xbar,
                                 std::span<const int> orders_x, std::span<const int> orders_xbar,
                                 double step, int levels) {
  const int n = model.dims();
  std::vector<long double> base(2 * n);
  std::vector<int> orders(2 * n);
  for (int a = 0; a < n; ++a) {
    base[a] = x(a);
    base[n + a] = xbar(a);
    orders[a] = orders_x[a];
    orders[n + a] = orders_xbar[a];
  }
  std::vector<std::vector<long double>> table(levels);
  long double h = step;
  for (int i = 0; i < levels; ++i, h /= 2) {
    table[i].push_back(central_difference(model, base, orders, h));
    long double factor = 4.0L;
    for (int k = 1; k <= i; ++k, factor *= 4.0L) {
      table[i].push_back(table[i][k - 1] + (table[i][k - 1] - table[i - 1][k - 1]) / (factor - 1));
    }
  }
  return static_cast<double>(table.back().back());
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> partial_multi_indices(int n_dims) {
  std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
  const int vars = 2 * n_dims;
  std::vector<int> o(vars, 0);
  while (true) {
    int total = 0;
    for (int v : o) total += v;
    if (total >= 1 && total <= CostModel::max_order) {
      out.emplace_back(std::vector<int>(o.begin(), o.begin() + n_dims),
                       std::vector<int>(o.begin() + n_dims, o.end()));
    }
    int v = 0;
    while (v < vars && ++o[v] > CostModel::max_order) o[v++] = 0;
    if (v == vars) break;
  }
  return out;
}

VerificationReport verify_partials(const CostModel& model, int sample_count, std::uint64_t seed) {
  constexpr double rel_tol = 1e-5;
  constexpr double abs_floor = 1e-8;
  const int n = model.dims();
  std::mt19937_64 rng(seed);
  // Keep the finite-difference stencils well inside the guard.
  double reach = 0.5 - model.guard().margin - 0.1;
  if (reach <= 0.0) reach = 0.5 * (0.5 - model.guard().margin);
  const auto indices = partial_multi_indices(n);
  // Central differences are exact on the quadratic kinds, and Richardson
  // levels there would only amplify round-off.
  const int levels = model.is_flat() ? 1 : 3;

  VerificationReport report;
  for (int s = 0; s < sample_count; ++s) {
    Vec x(n), xbar(n);
    for (int a = 0; a < n; ++a) {
      std::uniform_real_distribution<double> pos(0.0, model.period(a));
      std::uniform_real_distribution<double> disp(-reach * model.period(a), reach * model.period(a));
      x(a) = pos(rng);
      xbar(a) = x(a) + disp(rng);
    }
    ++report.samples;
    for (const auto& [ox, oxb] : indices) {
      const double analytic = model.partial(x, xbar, ox, oxb);
      const double fd = finite_difference_partial(model, x, xbar, ox, oxb, 2e-2, levels);
      const double err = std::abs(analytic - fd);
      const double scaled = err / std::max(rel_tol * std::abs(fd), abs_floor);
      ++report.checks;
      if (scaled > 1.0) ++report.failures;
      report.max_abs_error = std::max(report.max_abs_error, err);
      if (scaled >= report.max_scaled_error) {
        report.max_scaled_error = scaled;
        report.worst = PartialCheck{x, xbar, ox, oxb, analytic, fd, err};
      }
    }
  }
  return report;
}

}  // namespace kmflow

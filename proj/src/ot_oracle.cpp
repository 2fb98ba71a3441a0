#include "kmflow/ot_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "kmflow/errors.hpp"

namespace kmflow {

std::string_view to_string(OracleMethod m) {
  return m == OracleMethod::rearrangement_1d ? "rearrangement_1d" : "sinkhorn";
}

namespace {

void require_equal_mass(double mass, double mass_bar) {
  const double scale = std::max(std::abs(mass), std::abs(mass_bar));
  require(std::abs(mass - mass_bar) <= 1e-10 * scale, ErrorCode::mass_mismatch,
          "densities carry different mass: " + std::to_string(mass) + " vs " + std::to_string(mass_bar));
}

void require_positive(const ScalarField& f, const char* name) {
  for (std::size_t k = 0; k < f.size(); ++k) {
    require(f[k] > 0.0 && std::isfinite(f[k]), ErrorCode::nonpositive_density,
            std::string(name) + " not positive at node " + std::to_string(k));
  }
}

// Cumulative mass at the nodes 0..N of the periodic Catmull-Rom
// reconstruction, each cell integrated exactly.
std::vector<double> node_cdf(const ScalarField& f) {
  const std::size_t n = f.size();
  const double h = f.grid().spacing(0);
  std::vector<double> cdf(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double fm = f[(i + n - 1) % n], f0 = f[i], f1 = f[(i + 1) % n], f2 = f[(i + 2) % n];
    cdf[i + 1] = cdf[i] + h * (-fm + 13.0 * f0 + 13.0 * f1 - f2) / 24.0;
  }
  return cdf;
}

// Cubic Hermite interpolant of a periodic CDF with the density as slope.
class HermiteCdf {
 public:
  HermiteCdf(const ScalarField& density)
      : rho_(density), cdf_(node_cdf(density)), h_(density.grid().spacing(0)),
        period_(density.grid().period(0)), n_(density.size()) {}

  double mass() const { return cdf_.back(); }

  double value(double y) const {
    const auto [wraps, cell, t] = locate(y);
    return wraps * mass() + cell_value(cell, t);
  }

  double slope(double y) const {
    const auto [wraps, cell, t] = locate(y);
    (void)wraps;
    const double t2 = t * t;
    const double d00 = 6.0 * t2 - 6.0 * t, d10 = 3.0 * t2 - 4.0 * t + 1.0;
    const double d01 = -d00, d11 = 3.0 * t2 - 2.0 * t;
    return (d00 * cdf_[cell] + d01 * cdf_[cell + 1]) / h_ + d10 * rho_[cell] +
           d11 * rho_[(cell + 1) % n_];
  }

  double inverse(double v) const {
    const double m = mass();
    const double wraps = std::floor(v / m);
    const double r = v - wraps * m;
    std::size_t cell = static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), r) - cdf_.begin());
    cell = std::clamp<std::size_t>(cell, 1, n_) - 1;
    double lo = 0.0, hi = 1.0, t = 0.5;
    if (cell_value(cell, 0.0) == r) {
      t = 0.0;
    } else {
      // Safeguarded Newton on the monotone cubic.
      for (int it = 0; it < 200; ++it) {
        const double p = cell_value(cell, t) - r;
        if (p == 0.0) break;
        if (p > 0.0) hi = t; else lo = t;
        const double t2 = t * t;
        const double dp = (6.0 * t2 - 6.0 * t) * (cdf_[cell] - cdf_[cell + 1]) +
                          h_ * ((3.0 * t2 - 4.0 * t + 1.0) * rho_[cell] +
                                (3.0 * t2 - 2.0 * t) * rho_[(cell + 1) % n_]);
        double next = dp > 0.0 ? t - p / dp : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (std::abs(next - t) <= 1e-17) {
          t = next;
          break;
        }
        t = next;
      }
    }
    return wraps * period_ + (static_cast<double>(cell) + t) * h_;
  }

 private:
  struct Where {
    double wraps;
    std::size_t cell;
    double t;
  };

  Where locate(double y) const {
    const double wraps = std::floor(y / period_);
    const double r = (y - wraps * period_) / h_;
    std::size_t cell = std::min(static_cast<std::size_t>(r), n_ - 1);
    return {wraps, cell, r - static_cast<double>(cell)};
  }

  double cell_value(std::size_t cell, double t) const {
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2.0 * t3 - 3.0 * t2 + 1.0, h10 = t3 - 2.0 * t2 + t;
    const double h01 = -2.0 * t3 + 3.0 * t2, h11 = t3 - t2;
    return h00 * cdf_[cell] + h10 * h_ * rho_[cell] + h01 * cdf_[cell + 1] +
           h11 * h_ * rho_[(cell + 1) % n_];
  }

  const ScalarField& rho_;
  std::vector<double> cdf_;
  double h_;
  double period_;
  std::size_t n_;
};

}  // namespace

OracleMap rearrangement_1d(const ScalarField& rho, const ScalarField& rho_bar) {
  const Grid& grid = rho.grid();
  require(grid.dims() == 1, ErrorCode::unsupported_dimension, "rearrangement oracle is 1-D only");
  require(grid == rho_bar.grid(), ErrorCode::grid_mismatch, "density grids differ");
  require_positive(rho, "rho");
  require_positive(rho_bar, "rhobar");
  const std::vector<double> f = node_cdf(rho);
  const HermiteCdf fbar(rho_bar);
  require_equal_mass(f.back(), fbar.mass());

  const std::size_t n = grid.size();
  const double period = grid.period(0);
  const double h = grid.spacing(0);
  std::vector<double> disp(n);
  auto map_at = [&](double s) {
    for (std::size_t i = 0; i < n; ++i) {
      disp[i] = wrap_displacement(fbar.inverse(f[i] + s) - grid.coordinate(i, 0), period);
    }
  };
  auto cost = [&](double s) {
    map_at(s);
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c += rho[i] * h * 0.5 * disp[i] * disp[i];
    return c;
  };
  // dcost/ds: T* moves with speed 1 / fbar'(T*) as the shift grows.
  auto stationarity = [&](double s) {
    map_at(s);
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      d += rho[i] * disp[i] / fbar.slope(grid.coordinate(i, 0) + disp[i]);
    }
    return d;
  };

  constexpr int candidates = 64;
  const double m = fbar.mass();
  const double step = m / candidates;
  int best = 0;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int j = 0; j < candidates; ++j) {
    const double c = cost(j * step);
    if (c < best_cost) {
      best_cost = c;
      best = j;
    }
  }
  double s = best * step;
  const double d0 = stationarity(s);
  if (d0 != 0.0) {
    const double lo = s - step, hi = s + step;
    const double dlo = stationarity(lo), dhi = stationarity(hi);
    if (dlo < 0.0 && dhi > 0.0) {
      boost::uintmax_t iters = 200;
      const auto root = boost::math::tools::toms748_solve(
          stationarity, lo, hi, dlo, dhi, boost::math::tools::eps_tolerance<double>(52), iters);
      s = 0.5 * (root.first + root.second);
    } else {
      s = boost::math::tools::brent_find_minima(cost, lo, hi, 52).first;
    }
  }
  map_at(s);

  OracleMap out;
  out.grid = grid;
  out.displacement = VectorField(grid);
  for (std::size_t i = 0; i < n; ++i) out.displacement[0][i] = disp[i];
  out.method = OracleMethod::rearrangement_1d;
  out.rotation = s;
  return out;
}

namespace {

// log sum_j exp(w_j + (p_j - c_j) / eps) over one row, skipping infinite costs.
double row_lse(const double* cost_row, const std::vector<double>& log_w, const std::vector<double>& pot,
               double eps) {
  const std::size_t m = log_w.size();
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) {
    if (std::isfinite(cost_row[j])) top = std::max(top, log_w[j] + (pot[j] - cost_row[j]) / eps);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    if (std::isfinite(cost_row[j])) sum += std::exp(log_w[j] + (pot[j] - cost_row[j]) / eps - top);
  }
  return top + std::log(sum);
}

}  // namespace

OracleMap sinkhorn(const ScalarField& rho, const ScalarField& rho_bar, const CostModel& model,
                   const SinkhornOptions& options) {
  const Grid& grid = rho.grid();
  require(grid == rho_bar.grid(), ErrorCode::grid_mismatch, "density grids differ");
  require(model.dims() == grid.dims(), ErrorCode::grid_mismatch, "cost and grid dimensions differ");
  for (int a = 0; a < grid.dims(); ++a) {
    require(grid.resolution(a) <= 64, ErrorCode::precondition,
            "sinkhorn oracle supports at most 64 points per axis");
  }
  require(options.epsilon > 0.0, ErrorCode::precondition, "sinkhorn epsilon must be positive");
  require_positive(rho, "rho");
  require_positive(rho_bar, "rhobar");
  const double mass = rho.integral();
  const double mass_bar = rho_bar.integral();
  require_equal_mass(mass, mass_bar);

  const std::size_t m = grid.size();
  const int n = grid.dims();
  std::vector<double> log_a(m), log_b(m);
  for (std::size_t i = 0; i < m; ++i) {
    log_a[i] = std::log(rho[i] * grid.cell_volume() / mass);
    log_b[i] = std::log(rho_bar[i] * grid.cell_volume() / mass_bar);
  }
  std::vector<Vec> pts(m, Vec(n));
  for (std::size_t i = 0; i < m; ++i)
    for (int a = 0; a < n; ++a) pts[i](a) = grid.coordinate(i, a);

  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> cost(m * m), cost_t(m * m);
  for_each_node(options.exec, m, [&](std::size_t i) {
    for (std::size_t j = 0; j < m; ++j) {
      cost[i * m + j] = model.accepts(pts[i], pts[j]) ? model.value(pts[i], pts[j]) : inf;
    }
  });
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < m; ++j) cost_t[j * m + i] = cost[i * m + j];

  std::vector<double> schedule;
  for (double e = 0.1; e > options.epsilon; e *= 0.5) schedule.push_back(e);
  schedule.push_back(options.epsilon);

  std::vector<double> f(m, 0.0), g(m, 0.0), lse(m);
  std::size_t iters = 0;
  double residual = inf;
  for (std::size_t stage = 0; stage < schedule.size(); ++stage) {
    const double eps = schedule[stage];
    const double stage_tol = stage + 1 == schedule.size() ? options.tol : std::max(options.tol, 1e-6);
    for (;;) {
      // g update makes the column marginal exact; the row LSE then gives
      // both the row residual and the next f.
      for_each_node(options.exec, m, [&](std::size_t j) {
        g[j] = -eps * row_lse(&cost_t[j * m], log_a, f, eps);
      });
      for_each_node(options.exec, m, [&](std::size_t i) {
        lse[i] = row_lse(&cost[i * m], log_b, g, eps);
      });
      ++iters;
      residual = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double a = std::exp(log_a[i]);
        residual += std::abs(a * std::exp(f[i] / eps + lse[i]) - a);
      }
      if (residual < stage_tol) break;
      if (iters >= options.max_iters) {
        throw Error(ErrorCode::non_convergence,
                    "sinkhorn did not converge in " + std::to_string(options.max_iters) +
                        " iterations (epsilon " + std::to_string(eps) + ", residual " +
                        std::to_string(residual) + ")");
      }
      for (std::size_t i = 0; i < m; ++i) f[i] = -eps * lse[i];
    }
  }

  const double eps = schedule.back();
  OracleMap out;
  out.grid = grid;
  out.displacement = VectorField(grid);
  for_each_node(options.exec, m, [&](std::size_t i) {
    double weight = 0.0;
    Vec acc = Vec::Zero(n);
    const double* row = &cost[i * m];
    for (std::size_t j = 0; j < m; ++j) {
      if (!std::isfinite(row[j])) continue;
      const double p = std::exp(log_a[i] + log_b[j] + (f[i] + g[j] - row[j]) / eps);
      weight += p;
      for (int a = 0; a < n; ++a) acc(a) += p * wrap_displacement(pts[j](a) - pts[i](a), grid.period(a));
    }
    for (int a = 0; a < n; ++a) out.displacement[a][i] = acc(a) / weight;
  });
  out.method = OracleMethod::sinkhorn;
  out.epsilon = eps;
  out.iterations = iters;
  out.marginal_residual = residual;
  return out;
}

MapComparison compare_maps(const VectorField& displacement, const VectorField& reference) {
  require(displacement.grid() == reference.grid(), ErrorCode::grid_mismatch,
          "maps live on different grids");
  const Grid& g = displacement.grid();
  MapComparison out;
  double sq = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    double s = 0.0;
    for (int a = 0; a < g.dims(); ++a) {
      const double d = wrap_displacement(displacement[a][k] - reference[a][k], g.period(a));
      s += d * d;
    }
    out.sup_error = std::max(out.sup_error, std::sqrt(s));
    sq += s;
  }
  out.l2_error = std::sqrt(sq * g.cell_volume());
  return out;
}

}  // namespace kmflow

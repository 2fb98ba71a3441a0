#include "kmflow/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "kmflow/errors.hpp"

namespace kmflow {

double Tensor3::max_abs() const {
  double m = 0.0;
  for (int k = 0; k < n * n * n; ++k) m = std::max(m, std::abs(v[k]));
  return m;
}

double Tensor4::max_abs() const {
  double m = 0.0;
  for (int k = 0; k < n * n * n * n; ++k) m = std::max(m, std::abs(v[k]));
  return m;
}

MixedHessian mixed_hessian(const CostModel& model, const Vec& x, const Vec& xbar) {
  model.require_valid(x, xbar);
  MixedHessian out;
  out.b = -model.mixed(x, xbar);
  const Eigen::PartialPivLU<Mat> lu(out.b);
  const double det = lu.determinant();
  require(det > 0.0 && std::isfinite(det), ErrorCode::singular_hessian,
          "det(-c_{i sbar}) = " + std::to_string(det) + " is not positive");
  const Eigen::JacobiSVD<Mat> svd(out.b);
  const auto sv = svd.singularValues();
  out.condition = sv(0) / sv(sv.size() - 1);
  require(out.condition <= 1e10, ErrorCode::singular_hessian,
          "condition number " + std::to_string(out.condition) + " exceeds 1e10");
  out.b_inv = lu.inverse();
  out.log_det = std::log(det);
  return out;
}

namespace {

// c partial with the multi-index given as index lists: xs lists unbarred axes,
// xbs barred axes (with repetition).
double c_idx(const CostModel& model, const Vec& x, const Vec& xbar, std::initializer_list<int> xs,
             std::initializer_list<int> xbs) {
  std::array<int, 2> ox{0, 0}, oxb{0, 0};
  for (int a : xs) ++ox[a];
  for (int a : xbs) ++oxb[a];
  const int n = model.dims();
  return model.partial(x, xbar, std::span(ox).first(n), std::span(oxb).first(n));
}

}  // namespace

Christoffel christoffel(const CostModel& model, const Vec& x, const Vec& xbar) {
  const MixedHessian mh = mixed_hessian(model, x, xbar);
  const Mat c_inv = -mh.b_inv;  // (C^{-1})_{sbar i}
  const int n = model.dims();
  Christoffel out;
  out.unbarred.n = n;
  out.barred.n = n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int m = 0; m < n; ++m) {
        double gu = 0.0, gb = 0.0;
        for (int k = 0; k < n; ++k) {
          gu += c_inv(k, m) * c_idx(model, x, xbar, {i, j}, {k});
          gb += c_inv(m, k) * c_idx(model, x, xbar, {k}, {i, j});
        }
        out.unbarred(i, j, m) = gu;
        out.barred(i, j, m) = gb;
      }
    }
  }
  return out;
}

Tensor4 curvature(const CostModel& model, const Vec& x, const Vec& xbar) {
  const MixedHessian mh = mixed_hessian(model, x, xbar);
  const Mat c_inv = -mh.b_inv;
  const int n = model.dims();
  Tensor4 r;
  r.n = n;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      for (int k = 0; k < n; ++k) {
        for (int l = 0; l < n; ++l) {
          double correction = 0.0;
          for (int a = 0; a < n; ++a) {
            for (int f = 0; f < n; ++f) {
              correction += c_idx(model, x, xbar, {l, i}, {f}) * c_inv(f, a) *
                            c_idx(model, x, xbar, {a}, {j, k});
            }
          }
          r(i, j, k, l) = 0.5 * (c_idx(model, x, xbar, {i, l}, {j, k}) - correction);
        }
      }
    }
  }
  return r;
}

namespace {

Mat2n metric_at(const CostModel& model, const Eigen::Vector4d& z) {
  const int n = model.dims();
  Vec x(n), xb(n);
  for (int a = 0; a < n; ++a) {
    x(a) = z(a);
    xb(a) = z(n + a);
  }
  const Mat b = -model.mixed(x, xb);
  Mat2n g = Mat2n::Zero(2 * n, 2 * n);
  g.topRightCorner(n, n) = 0.5 * b;
  g.bottomLeftCorner(n, n) = 0.5 * b.transpose();
  return g;
}

}  // namespace

FdGeometry fd_geometry(const CostModel& model, const Vec& x, const Vec& xbar, double step) {
  model.require_valid(x, xbar);
  const int n = model.dims();
  const int dim = 2 * n;
  Eigen::Vector4d z = Eigen::Vector4d::Zero();
  for (int a = 0; a < n; ++a) {
    z(a) = x(a);
    z(n + a) = xbar(a);
  }
  auto g_at = [&](int c, double hc, int d, double hd) {
    Eigen::Vector4d p = z;
    if (c >= 0) p(c) += hc;
    if (d >= 0) p(d) += hd;
    return metric_at(model, p);
  };
  // dg[c] = d G / d z_c ; ddg[c][d] = d^2 G / d z_c d z_d
  auto first = [&](int c, double h) { return Mat2n((g_at(c, h, -1, 0) - g_at(c, -h, -1, 0)) / (2 * h)); };
  auto second = [&](int c, int d, double h) {
    if (c == d) {
      return Mat2n((g_at(c, h, -1, 0) - 2.0 * g_at(-1, 0, -1, 0) + g_at(c, -h, -1, 0)) / (h * h));
    }
    return Mat2n((g_at(c, h, d, h) - g_at(c, h, d, -h) - g_at(c, -h, d, h) + g_at(c, -h, d, -h)) /
                 (4 * h * h));
  };
  std::vector<Mat2n> dg(dim);
  std::vector<std::vector<Mat2n>> ddg(dim, std::vector<Mat2n>(dim));
  for (int c = 0; c < dim; ++c) {
    dg[c] = (4.0 * first(c, step / 2) - first(c, step)) / 3.0;
    for (int d = 0; d < dim; ++d) ddg[c][d] = (4.0 * second(c, d, step / 2) - second(c, d, step)) / 3.0;
  }
  const Mat2n g = metric_at(model, z);
  const Mat2n g_inv = g.inverse();

  FdGeometry out;
  out.dim = dim;
  // Lowered symbols Gamma_{e b c}.
  std::array<double, 64> lowered{};
  auto low = [&](int e, int b, int c) -> double& { return lowered[(e * dim + b) * dim + c]; };
  for (int e = 0; e < dim; ++e)
    for (int b = 0; b < dim; ++b)
      for (int c = 0; c < dim; ++c) low(e, b, c) = 0.5 * (dg[b](e, c) + dg[c](e, b) - dg[e](b, c));
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b)
      for (int c = 0; c < dim; ++c) {
        double s = 0.0;
        for (int e = 0; e < dim; ++e) s += g_inv(a, e) * low(e, b, c);
        out.gamma[(a * dim + b) * dim + c] = s;
      }
  for (int a = 0; a < dim; ++a)
    for (int b = 0; b < dim; ++b)
      for (int c = 0; c < dim; ++c)
        for (int d = 0; d < dim; ++d) {
          double r = 0.5 * (ddg[b][c](a, d) + ddg[a][d](b, c) - ddg[a][c](b, d) - ddg[b][d](a, c));
          for (int e = 0; e < dim; ++e)
            for (int f = 0; f < dim; ++f)
              r += g(e, f) * (out.christoffel(e, b, c) * out.christoffel(f, a, d) -
                              out.christoffel(e, b, d) * out.christoffel(f, a, c));
          out.riemann[((a * dim + b) * dim + c) * dim + d] = r;
        }
  return out;
}

Tensor4 curvature_fd_oracle(const CostModel& model, const Vec& x, const Vec& xbar, double step) {
  const FdGeometry fd = fd_geometry(model, x, xbar, step);
  const int n = model.dims();
  Tensor4 r;
  r.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) r(i, j, k, l) = fd.riemann_lowered(i, n + j, n + k, l);
  return r;
}

Christoffel christoffel_fd_oracle(const CostModel& model, const Vec& x, const Vec& xbar,
                                  double step) {
  const FdGeometry fd = fd_geometry(model, x, xbar, step);
  const int n = model.dims();
  Christoffel out;
  out.unbarred.n = n;
  out.barred.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int m = 0; m < n; ++m) {
        out.unbarred(i, j, m) = fd.christoffel(m, i, j);
        out.barred(i, j, m) = fd.christoffel(n + m, n + i, n + j);
      }
  return out;
}

Vec project_null(const Mat& b, const Vec& xi, const Vec& xibar) {
  const Vec bt_xi = b.transpose() * xi;
  const double denom = bt_xi.squaredNorm();
  if (denom == 0.0) return xibar;
  return xibar - (xi.dot(b * xibar) / denom) * bt_xi;
}

namespace {

double contract_cross(const Tensor4& r, const Vec& xi, const Vec& xibar) {
  const int n = r.n;
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) s += r(i, j, k, l) * xi(i) * xibar(j) * xibar(k) * xi(l);
  return -s;
}

}  // namespace

double cross_curvature(const CostModel& model, const Vec& x, const Vec& xbar, const Vec& xi,
                       const Vec& xibar) {
  require(model.dims() >= 2, ErrorCode::null_pair_unavailable,
          "in 1-D the h-orthogonality constraint forces xibar = 0");
  model.require_valid(x, xbar);
  const MixedHessian mh = mixed_hessian(model, x, xbar);
  const Vec projected = project_null(mh.b, xi, xibar);
  require(projected.norm() > 1e-14 * std::max(1.0, xibar.norm()), ErrorCode::null_pair_unavailable,
          "projected xibar vanishes");
  return contract_cross(curvature(model, x, xbar), xi, projected);
}

std::string_view to_string(MtwVerdict verdict) {
  switch (verdict) {
    case MtwVerdict::positive: return "positive";
    case MtwVerdict::nonnegative_with_nulls: return "nonnegative_with_nulls";
    case MtwVerdict::violated: return "violated";
    case MtwVerdict::vacuous: return "vacuous";
  }
  return "unknown";
}

MtwReport mtw_scan(const CostModel& model, const Grid& grid, const MtwScanOptions& options) {
  require(options.directions_per_point >= 8, ErrorCode::precondition,
          "directions_per_point must be >= 8");
  require(grid.dims() == model.dims(), ErrorCode::grid_mismatch, "grid and cost dimensions differ");
  const int n = grid.dims();
  MtwReport report;
  report.argmin_x = Vec::Zero(n);
  report.argmin_xbar = Vec::Zero(n);
  report.argmin_xi = Vec::Zero(n);
  report.argmin_xibar = Vec::Zero(n);
  if (n < 2) return report;  // vacuous: no null pairs exist

  std::array<int, 2> stride{options.stride, options.stride};
  std::vector<Vec> nodes;
  for (int a = 0; a < n; ++a) {
    if (stride[a] <= 0) stride[a] = std::max(1, (grid.resolution(a) + 7) / 8);
  }
  for (int i1 = 0; i1 < grid.resolution(1); i1 += stride[1]) {
    for (int i0 = 0; i0 < grid.resolution(0); i0 += stride[0]) {
      Vec p(n);
      p(0) = i0 * grid.spacing(0);
      p(1) = i1 * grid.spacing(1);
      nodes.push_back(p);
    }
  }
  const std::size_t m = nodes.size();

  struct Best {
    double value = std::numeric_limits<double>::infinity();
    std::size_t pair = 0;
    Vec xi, xibar;
    std::size_t samples = 0;
    std::size_t pairs = 0;
  };
  std::vector<Best> per_x(m);

  for_each_node(options.exec, m, [&](std::size_t p) {
    Best& best = per_x[p];
    for (std::size_t q = 0; q < m; ++q) {
      if (!model.accepts(nodes[p], nodes[q])) continue;
      const std::size_t pair = p * m + q;
      std::seed_seq seq{static_cast<std::uint32_t>(options.seed),
                        static_cast<std::uint32_t>(options.seed >> 32),
                        static_cast<std::uint32_t>(pair)};
      std::mt19937_64 rng(seq);
      std::normal_distribution<double> normal;
      const Mat b = -model.mixed(nodes[p], nodes[q]);
      const Tensor4 r = curvature(model, nodes[p], nodes[q]);
      ++best.pairs;
      for (int d = 0; d < options.directions_per_point; ++d) {
        Vec xi(n), raw(n), xibar(n);
        do {
          for (int a = 0; a < n; ++a) xi(a) = normal(rng);
        } while (xi.norm() < 1e-8);
        xi.normalize();
        do {
          for (int a = 0; a < n; ++a) raw(a) = normal(rng);
          xibar = project_null(b, xi, raw);
        } while (xibar.norm() < 1e-8);
        xibar.normalize();
        const double v = contract_cross(r, xi, xibar);
        ++best.samples;
        if (v < best.value) {
          best.value = v;
          best.pair = pair;
          best.xi = xi;
          best.xibar = xibar;
        }
      }
    }
  });

  // Serial reduction in node order: ties keep the lexicographically first pair.
  const Best* winner = nullptr;
  for (const Best& b : per_x) {
    report.samples += b.samples;
    report.pairs += b.pairs;
    if (b.samples > 0 && (winner == nullptr || b.value < winner->value)) winner = &b;
  }
  if (winner == nullptr) return report;
  report.min_value = winner->value;
  report.argmin_x = nodes[winner->pair / m];
  report.argmin_xbar = nodes[winner->pair % m];
  report.argmin_xi = winner->xi;
  report.argmin_xibar = winner->xibar;
  if (report.min_value > 1e-10) report.verdict = MtwVerdict::positive;
  else if (report.min_value >= -1e-10) report.verdict = MtwVerdict::nonnegative_with_nulls;
  else report.verdict = MtwVerdict::violated;
  return report;
}

double conformal_factor(const CostModel& model, double rho, double rho_bar, const Vec& x,
                        const Vec& xbar) {
  require(rho > 0.0 && rho_bar > 0.0, ErrorCode::nonpositive_density,
          "densities must be positive (rho = " + std::to_string(rho) +
              ", rhobar = " + std::to_string(rho_bar) + ")");
  const MixedHessian mh = mixed_hessian(model, x, xbar);
  return (std::log(rho) + std::log(rho_bar) - mh.log_det) / (2.0 * model.dims());
}

Mat2n km_metric(const CostModel& model, const Vec& x, const Vec& xbar) {
  model.require_valid(x, xbar);
  Eigen::Vector4d z = Eigen::Vector4d::Zero();
  const int n = model.dims();
  for (int a = 0; a < n; ++a) {
    z(a) = x(a);
    z(n + a) = xbar(a);
  }
  return metric_at(model, z);
}

Mat2n kmw_metric(const CostModel& model, double rho, double rho_bar, const Vec& x,
                 const Vec& xbar) {
  const double psi = conformal_factor(model, rho, rho_bar, x, xbar);
  return std::exp(2.0 * psi) * km_metric(model, x, xbar);
}

}  // namespace kmflow

#pragma once

#include <Eigen/Dense>

namespace kmflow {

// Small fixed-capacity types for per-point quantities: n <= 2 for chart
// vectors and n x n blocks, 2n <= 4 for the product-manifold metric.
using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 2, 2>;
using Mat2n = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 4, 4>;

// Eigenvalues of a symmetric 1x1 or 2x2 matrix, ascending.
inline Vec symmetric_eigenvalues(const Mat& m) {
  Vec ev(m.rows());
  if (m.rows() == 1) {
    ev(0) = m(0, 0);
    return ev;
  }
  const double a = m(0, 0), b = 0.5 * (m(0, 1) + m(1, 0)), d = m(1, 1);
  const double mean = 0.5 * (a + d);
  const double r = std::hypot(0.5 * (a - d), b);
  ev(0) = mean - r;
  ev(1) = mean + r;
  return ev;
}

inline double small_det(const Mat& m) {
  if (m.rows() == 1) return m(0, 0);
  return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
}

// Cramer's rule for 1x1 and 2x2 systems; the caller guarantees det != 0.
inline Vec small_solve(const Mat& m, const Vec& rhs) {
  Vec x(m.rows());
  if (m.rows() == 1) {
    x(0) = rhs(0) / m(0, 0);
    return x;
  }
  const double det = small_det(m);
  x(0) = (m(1, 1) * rhs(0) - m(0, 1) * rhs(1)) / det;
  x(1) = (m(0, 0) * rhs(1) - m(1, 0) * rhs(0)) / det;
  return x;
}

inline Mat small_inverse(const Mat& m) {
  Mat inv(m.rows(), m.cols());
  if (m.rows() == 1) {
    inv(0, 0) = 1.0 / m(0, 0);
    return inv;
  }
  const double det = small_det(m);
  inv(0, 0) = m(1, 1) / det;
  inv(0, 1) = -m(0, 1) / det;
  inv(1, 0) = -m(1, 0) / det;
  inv(1, 1) = m(0, 0) / det;
  return inv;
}

}  // namespace kmflow

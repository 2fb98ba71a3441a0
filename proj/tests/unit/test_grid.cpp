#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "kmflow/errors.hpp"
#include "kmflow/grid.hpp"

using namespace kmflow;

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

Grid grid1(int n, double period = 1.0) {
  const int r[] = {n};
  const double p[] = {period};
  return make_grid(1, r, p);
}

Grid grid2(int n0, int n1) {
  const int r[] = {n0, n1};
  const double p[] = {1.0, 1.0};
  return make_grid(2, r, p);
}

template <class F>
ScalarField sample(const Grid& g, F f) {
  ScalarField out(g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    out[k] = g.dims() == 1 ? f(g.coordinate(k, 0), 0.0) : f(g.coordinate(k, 0), g.coordinate(k, 1));
  }
  return out;
}

double max_error(const ScalarField& a, const ScalarField& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace

TEST_CASE("make_grid builds 1-D and 2-D grids") {
  const Grid g = grid1(64);
  CHECK(g.dims() == 1);
  CHECK(g.spacing(0) == doctest::Approx(1.0 / 64));
  CHECK(g.size() == 64);
  CHECK(grid2(32, 32).size() == 1024);
}

TEST_CASE("make_grid rejects unsupported input") {
  const int r3[] = {16, 16, 16};
  const double p3[] = {1.0, 1.0, 1.0};
  try {
    make_grid(3, r3, p3);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::unsupported_dimension);
  }
  const int small[] = {4};
  const double p[] = {1.0};
  CHECK_THROWS_AS(make_grid(1, small, p), Error);
  const int ok[] = {16};
  const double bad[] = {0.0};
  CHECK_THROWS_AS(make_grid(1, ok, bad), Error);
}

TEST_CASE("indexing wraps periodically") {
  const Grid g = grid2(8, 10);
  CHECK(g.index(-1, 0) == g.index(7, 0));
  CHECK(g.index(0, -1) == g.index(0, 9));
  CHECK(g.index(8, 10) == g.index(0, 0));
  const auto mi = g.multi_index(g.index(3, 4));
  CHECK(mi[0] == 3);
  CHECK(mi[1] == 4);
}

TEST_CASE("wrap_displacement maps into the half-open period") {
  CHECK(wrap_displacement(0.5, 1.0) == 0.5);
  CHECK(wrap_displacement(-0.5, 1.0) == 0.5);
  CHECK(wrap_displacement(0.75, 1.0) == doctest::Approx(-0.25));
  CHECK(wrap_displacement(-1.2, 1.0) == doctest::Approx(-0.2));
  CHECK(wrap_coordinate(-0.25, 1.0) == doctest::Approx(0.75));
  CHECK(wrap_coordinate(1.0, 1.0) == 0.0);
}

TEST_CASE("first derivative of sin meets the stencil accuracy") {
  const Grid g = grid1(256);
  const ScalarField f = sample(g, [](double x, double) { return std::sin(two_pi * x); });
  const ScalarField exact = sample(g, [](double x, double) { return two_pi * std::cos(two_pi * x); });
  CHECK(max_error(diff(f, 0, 1, 2), exact) < 1e-3);
  CHECK(max_error(diff(f, 0, 1, 4), exact) < 1e-7);
}

TEST_CASE("second derivative of sin approximates -4 pi^2 sin") {
  const Grid g = grid1(256);
  const ScalarField f = sample(g, [](double x, double) { return std::sin(two_pi * x); });
  const ScalarField exact = sample(g, [](double x, double) { return -two_pi * two_pi * std::sin(two_pi * x); });
  CHECK(max_error(diff(f, 0, 2, 2), exact) < 1e-2);
  CHECK(max_error(diff(f, 0, 2, 4), exact) < 1e-5);
}

TEST_CASE("derivatives of a constant vanish") {
  const Grid g = grid2(16, 16);
  const ScalarField c(g, 3.5);
  for (int axis = 0; axis < 2; ++axis) {
    for (int order = 1; order <= 2; ++order) {
      CHECK(max_error(diff(c, axis, order), ScalarField(g)) == 0.0);
    }
  }
}

TEST_CASE("accuracy-4 stencils are exact on cubics") {
  // A cubic is not periodic, so check interior nodes whose stencil does not wrap.
  const Grid g = grid1(64);
  const auto cubic = [](double x) { return 0.3 + 1.7 * x - 2.1 * x * x + 0.9 * x * x * x; };
  const ScalarField f = sample(g, [&](double x, double) { return cubic(x); });
  const ScalarField d1 = diff(f, 0, 1, 4);
  const ScalarField d2 = diff(f, 0, 2, 4);
  for (std::size_t k = 2; k + 2 < g.size(); ++k) {
    const double x = g.coordinate(k, 0);
    const double e1 = 1.7 - 4.2 * x + 2.7 * x * x;
    const double e2 = -4.2 + 5.4 * x;
    CHECK(std::abs(d1[k] - e1) < 1e-12 * std::max(1.0, std::abs(e1)) * 64);
    CHECK(std::abs(d2[k] - e2) < 1e-12 * std::max(1.0, std::abs(e2)) * 64 * 64);
  }
}

TEST_CASE("diff commutes with a one-cell translation") {
  const Grid g = grid2(16, 12);
  const ScalarField f = sample(g, [](double x, double y) { return std::exp(std::sin(two_pi * x) * std::cos(two_pi * y)); });
  ScalarField shifted(g);
  for (std::size_t k = 0; k < g.size(); ++k) {
    const auto mi = g.multi_index(k);
    shifted[k] = f[g.index(mi[0] + 1, mi[1])];
  }
  for (int axis = 0; axis < 2; ++axis) {
    for (int order = 1; order <= 2; ++order) {
      const ScalarField a = diff(shifted, axis, order);
      const ScalarField b = diff(f, axis, order);
      for (std::size_t k = 0; k < g.size(); ++k) {
        const auto mi = g.multi_index(k);
        REQUIRE(a[k] == b[g.index(mi[0] + 1, mi[1])]);
      }
    }
  }
}

TEST_CASE("optimized, reference, serial and parallel kernels agree bitwise") {
  for (const Grid& g : {grid1(40), grid2(24, 16)}) {
    const ScalarField f = sample(g, [](double x, double y) { return std::sin(two_pi * x + 0.3) * std::cos(two_pi * 2 * y); });
    for (int axis = 0; axis < g.dims(); ++axis) {
      for (int order = 1; order <= 2; ++order) {
        for (int acc : {2, 4}) {
          const ScalarField ref = diff_reference(f, axis, order, acc);
          const ScalarField ser = diff(f, axis, order, acc, Exec::serial);
          const ScalarField par = diff(f, axis, order, acc, Exec::parallel);
          for (std::size_t k = 0; k < g.size(); ++k) {
            REQUIRE(ser[k] == ref[k]);
            REQUIRE(par[k] == ref[k]);
          }
        }
      }
    }
  }
}

TEST_CASE("hessian is symmetric and mixed partials compose in ascending order") {
  const Grid g = grid2(64, 64);
  const ScalarField f = sample(g, [](double x, double y) { return std::sin(two_pi * x) * std::sin(two_pi * y); });
  const MatrixField h = hessian(f);
  const ScalarField mixed = diff(diff(f, 0, 1), 1, 1);
  for (std::size_t k = 0; k < g.size(); ++k) {
    REQUIRE(h(0, 1)[k] == h(1, 0)[k]);
    REQUIRE(h(0, 1)[k] == mixed[k]);
    const double exact = two_pi * two_pi * std::cos(two_pi * g.coordinate(k, 0)) * std::cos(two_pi * g.coordinate(k, 1));
    CHECK(std::abs(h(0, 1)[k] - exact) < 1e-3);
  }
}

TEST_CASE("jacobian rows are gradients of the components") {
  const Grid g = grid2(16, 16);
  VectorField v(g);
  v[0] = sample(g, [](double x, double y) { return std::sin(two_pi * x) + std::cos(two_pi * y); });
  v[1] = sample(g, [](double x, double y) { return std::sin(two_pi * x * 2) * std::sin(two_pi * y); });
  const MatrixField j = jacobian(v);
  for (int i = 0; i < 2; ++i) {
    const VectorField grad = gradient(v[i]);
    for (int a = 0; a < 2; ++a) CHECK(max_error(j(i, a), grad[a]) == 0.0);
  }
}

TEST_CASE("interpolation reproduces constants, nodes and smooth data") {
  const Grid g = grid1(256);
  const ScalarField c(g, 2.25);
  const double p[] = {0.3712};
  CHECK(interpolate(c, p) == doctest::Approx(2.25).epsilon(1e-15));
  const ScalarField f = sample(g, [](double x, double) { return std::sin(two_pi * x); });
  const double node[] = {g.coordinate(17, 0)};
  CHECK(interpolate(f, node) == doctest::Approx(f[17]).epsilon(1e-14));
  const double q[] = {0.123};
  CHECK(std::abs(interpolate(f, q) - std::sin(two_pi * 0.123)) < 1e-6);
}

TEST_CASE("interpolation is periodic and exact on linear data within a cell") {
  const Grid g = grid2(16, 16);
  const ScalarField f = sample(g, [](double x, double y) { return std::cos(two_pi * x) * std::sin(two_pi * y); });
  const double p[] = {0.41, 0.77};
  const double shifted[] = {0.41 + 3.0, 0.77 - 2.0};
  CHECK(interpolate(f, p) == doctest::Approx(interpolate(f, shifted)).epsilon(1e-13));

  // Catmull-Rom weights reproduce linear functions exactly on a local stencil.
  const Grid g1 = grid1(16);
  ScalarField lin(g1);
  for (std::size_t k = 0; k < g1.size(); ++k) lin[k] = 2.0 + 3.0 * g1.coordinate(k, 0);
  const double inside[] = {0.5 + 0.3 / 16};
  CHECK(interpolate(lin, inside) == doctest::Approx(2.0 + 3.0 * inside[0]).epsilon(1e-14));
}

TEST_CASE("field reductions") {
  const Grid g = grid1(8, 2.0);
  ScalarField f(g, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(f.min() == 1.0);
  CHECK(f.max() == 8.0);
  CHECK(f.integral() == doctest::Approx(36.0 * 0.25));
  CHECK(f.mean() == doctest::Approx(4.5));
  CHECK(f.all_finite());
  f[3] = std::nan("");
  CHECK_FALSE(f.all_finite());
}

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "kmflow/cost.hpp"
#include "kmflow/lagrangian.hpp"
#include "kmflow/paracomplex.hpp"

using namespace kmflow;

namespace {

Vec vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

bool close(ParaComplex a, ParaComplex b, double tol = 1e-14) { return (a - b).modulus() <= tol; }

}  // namespace

TEST_CASE("idempotent splitting") {
  const ParaComplex k = ParaComplex::k(), t = ParaComplex::tau(), tb = ParaComplex::tau_bar();
  CHECK(k * k == ParaComplex{1.0, 0.0});
  CHECK(t * t == t);
  CHECK(tb * tb == tb);
  CHECK(t * tb == ParaComplex{});
  CHECK(t + tb == ParaComplex{1.0, 0.0});
  CHECK(t - tb == k);
  CHECK(k * t == t);
  CHECK(k * tb == -tb);
  CHECK(t.conj() == tb);

  const ParaComplex a = ParaComplex::from_idempotents(2.0, -3.0);
  const ParaComplex b = ParaComplex::from_idempotents(0.5, 4.0);
  CHECK(a.tau_part() == 2.0);
  CHECK(a.tau_bar_part() == -3.0);
  CHECK(a * b == ParaComplex::from_idempotents(1.0, -12.0));
  CHECK(a.para_norm2() == doctest::Approx(-6.0));
}

TEST_CASE("exp_k lies on the unit para-circle") {
  for (double th = -5.0; th <= 5.0; th += 0.25) {
    const ParaComplex e = ParaComplex::exp_k(th);
    CHECK(std::abs(e.para_norm2() - 1.0) <= 1e-12);
    CHECK(e.re() == doctest::Approx(std::cosh(th)).epsilon(1e-14));
    CHECK(e.im() == doctest::Approx(std::sinh(th)).epsilon(1e-14));
    CHECK(e.tau_part() == doctest::Approx(std::exp(th)).epsilon(1e-14));
    CHECK(e.tau_bar_part() == doctest::Approx(std::exp(-th)).epsilon(1e-14));
  }
  CHECK(close(ParaComplex::exp_k(0.3) * ParaComplex::exp_k(0.4), ParaComplex::exp_k(0.7)));
}

TEST_CASE("integer powers") {
  const ParaComplex z{0.7, -0.2};
  CHECK(pow(z, 0) == ParaComplex{1.0, 0.0});
  CHECK(close(pow(z, 3), z * z * z));
  CHECK(pow(ParaComplex::k(), 2) == ParaComplex{1.0, 0.0});
}

TEST_CASE("exterior algebra") {
  // dz0 ^ dz1 = - dz1 ^ dz0, and repeated generators vanish.
  const ExteriorForm a = ExteriorForm::monomial(4, {0, 1}, {1.0, 0.0});
  const ExteriorForm b = ExteriorForm::monomial(4, {1, 0}, {1.0, 0.0});
  CHECK(a.coefficient(0b0011) == ParaComplex{1.0, 0.0});
  CHECK(b.coefficient(0b0011) == ParaComplex{-1.0, 0.0});
  CHECK(a.wedge(ExteriorForm::monomial(4, {1}, {1.0, 0.0})).coefficient(0b0011) == ParaComplex{});

  const ExteriorForm dx0 = ExteriorForm::monomial(4, {0}, {1.0, 0.0});
  const ExteriorForm dx2 = ExteriorForm::monomial(4, {2}, {0.0, 1.0});
  CHECK(dx0.wedge(dx2).coefficient(0b0101) == ParaComplex{0.0, 1.0});
  CHECK(dx2.wedge(dx0).coefficient(0b0101) == ParaComplex{0.0, -1.0});
  CHECK(dx2.conj().coefficient(0b0100) == ParaComplex{0.0, -1.0});
}

TEST_CASE("wedge identity for the conformal factor") {
  SUBCASE("flat cost, unit densities, n = 1") {
    const CostModel m(CostKind::torus_squared_distance, 1);
    const WedgeCheck w = wedge_identity_check(m, 1.0, 1.0, vec({0.1}), vec({0.2}));
    CHECK(w.residual < 1e-14);
    CHECK(close(w.lhs, {0.5, 0.0}));
  }
  SUBCASE("flat cost, densities 4 and 3, n = 1") {
    // e^{2 psi} = 12, omega = dx ^ dxbar / 2, so both sides are 6 dx ^ dxbar.
    const CostModel m(CostKind::torus_squared_distance, 1);
    const WedgeCheck w = wedge_identity_check(m, 4.0, 3.0, vec({0.1}), vec({0.2}));
    CHECK(w.residual < 1e-12);
    CHECK(close(w.lhs, {6.0, 0.0}, 1e-12));
    CHECK(close(w.rhs, {6.0, 0.0}, 1e-12));
  }
  SUBCASE("perturbed cost, random densities, n = 2") {
    const CostModel m(CostKind::perturbed_quadratic, 2, CostParams{0.02, {1, 1}});
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> u(0.0, 1.0), d(-0.3, 0.3), r(0.2, 5.0);
    for (int s = 0; s < 50; ++s) {
      const Vec x = vec({u(rng), u(rng)});
      const Vec xb = vec({x(0) + d(rng), x(1) + d(rng)});
      const WedgeCheck w = wedge_identity_check(m, r(rng), r(rng), x, xb);
      CHECK(w.residual < 1e-10);
      CHECK(w.lhs.im() == 0.0);
    }
  }
}

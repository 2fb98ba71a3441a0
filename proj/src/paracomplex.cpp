#include "kmflow/paracomplex.hpp"

#include <bit>
#include <vector>

#include "kmflow/errors.hpp"

namespace kmflow {

ParaComplex pow(ParaComplex z, int n) {
  ParaComplex r{1.0, 0.0};
  for (int i = 0; i < n; ++i) r = r * z;
  return r;
}

namespace {

// Sign of moving the generators of `b` past those of `a` when forming
// a ^ b in canonical order; zero when they share a generator.
int wedge_sign(unsigned a, unsigned b) {
  if (a & b) return 0;
  int swaps = 0;
  for (unsigned rest = b; rest; rest &= rest - 1) {
    const unsigned bit = rest & (~rest + 1);
    // generators of a strictly above this bit must hop over it
    swaps += std::popcount(a & ~(bit | (bit - 1)));
  }
  return (swaps % 2) ? -1 : 1;
}

}  // namespace

ExteriorForm ExteriorForm::monomial(int generators, std::initializer_list<int> gens, ParaComplex c) {
  ExteriorForm f(generators);
  std::vector<int> order(gens);
  unsigned mask = 0;
  int sign = 1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    require(order[i] >= 0 && order[i] < generators, ErrorCode::precondition,
            "generator index out of range");
    if (mask & (1u << order[i])) return f;  // repeated generator: zero form
    mask |= 1u << order[i];
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      if (order[j] < order[i]) sign = -sign;
    }
  }
  f.coeff_[mask] = static_cast<double>(sign) * c;
  return f;
}

ExteriorForm ExteriorForm::wedge(const ExteriorForm& other) const {
  ExteriorForm out(generators_);
  const unsigned top = 1u << generators_;
  for (unsigned a = 0; a < top; ++a) {
    if (coeff_[a] == ParaComplex{}) continue;
    for (unsigned b = 0; b < top; ++b) {
      if (other.coeff_[b] == ParaComplex{}) continue;
      const int s = wedge_sign(a, b);
      if (s == 0) continue;
      out.coeff_[a | b] = out.coeff_[a | b] + static_cast<double>(s) * (coeff_[a] * other.coeff_[b]);
    }
  }
  return out;
}

ExteriorForm ExteriorForm::conj() const {
  ExteriorForm out(generators_);
  for (unsigned m = 0; m < (1u << generators_); ++m) out.coeff_[m] = coeff_[m].conj();
  return out;
}

ExteriorForm operator*(ParaComplex s, const ExteriorForm& f) {
  ExteriorForm out(f.generators_);
  for (unsigned m = 0; m < (1u << f.generators_); ++m) out.coeff_[m] = s * f.coeff_[m];
  return out;
}

ExteriorForm operator+(const ExteriorForm& a, const ExteriorForm& b) {
  ExteriorForm out(a.generators_);
  for (unsigned m = 0; m < (1u << a.generators_); ++m) out.coeff_[m] = a.coeff_[m] + b.coeff_[m];
  return out;
}

}  // namespace kmflow

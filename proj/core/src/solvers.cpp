#include <cmath>
#include <complex>

#include "cinerecon/cs.hpp"
#include "cinerecon/error.hpp"

namespace cinerecon::cs {

namespace {

double norm2(std::span<const cplx> v) {
  double acc = 0.0;
  for (const auto& z : v) acc += std::norm(z);
  return acc;
}

cplx dot(std::span<const cplx> a, std::span<const cplx> b) {
  cplx acc{};
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

}  // namespace

cplx soft_threshold(cplx z, double tau) noexcept {
  const double mag = std::abs(z);
  if (mag <= tau || mag == 0.0) return cplx{};
  return z * ((mag - tau) / mag);
}

void soft_threshold(std::span<cplx> z, double tau) noexcept {
  for (auto& v : z) v = soft_threshold(v, tau);
}

CgResult cg_solve(const LinearMap& apply_a, std::span<const cplx> b, double tol, std::size_t max_iters) {
  const std::size_t n = b.size();
  CgResult res;
  res.x.assign(n, cplx{});
  const double b_norm2 = norm2(b);
  if (!std::isfinite(b_norm2)) throw NumericalError("cg_solve: right-hand side is not finite");
  if (b_norm2 == 0.0) return res;

  std::vector<cplx> r(b.begin(), b.end());
  std::vector<cplx> p = r;
  std::vector<cplx> ap(n);
  double rr = b_norm2;
  const double b_norm = std::sqrt(b_norm2);
  res.relative_residual = 1.0;

  while (res.iterations < max_iters && res.relative_residual > tol) {
    apply_a(p, ap);
    const double pap = dot(p, ap).real();
    if (!std::isfinite(pap)) throw NumericalError("cg_solve: non-finite value in A p");
    if (pap <= 0.0) throw NumericalError("cg_solve: operator is not positive definite (p^H A p <= 0)");
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < n; ++i) {
      res.x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    const double rr_next = norm2(r);
    if (!std::isfinite(rr_next)) throw NumericalError("cg_solve: residual became non-finite");
    ++res.iterations;
    res.relative_residual = std::sqrt(rr_next) / b_norm;
    const double beta = rr_next / rr;
    rr = rr_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * p[i];
  }
  return res;
}

}  // namespace cinerecon::cs

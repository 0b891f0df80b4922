#include <algorithm>
#include <cmath>
#include <string>

#include "cinerecon/cs.hpp"
#include "cinerecon/error.hpp"

namespace cinerecon::cs {

namespace {

double sq_norm(std::span<const cplx> v) {
  double acc = 0.0;
  for (const auto& z : v) acc += std::norm(z);
  return acc;
}

double l1_norm(std::span<const cplx> v) {
  double acc = 0.0;
  for (const auto& z : v) acc += std::abs(z);
  return acc;
}

void axpy(std::span<cplx> y, double a, std::span<const cplx> x) {
  for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

void CsConfig::validate() const {
  if (!(lambda_t >= 0.0)) throw ParameterError("lambda_t must be >= 0");
  if (!(lambda_w >= 0.0)) throw ParameterError("lambda_w must be >= 0");
  if (!(rho > 0.0)) throw ParameterError("rho must be > 0");
  if (max_admm_iters < 1) throw ParameterError("max_admm_iters must be >= 1");
  if (!(cg_tol > 0.0)) throw ParameterError("cg_tol must be > 0");
  if (cg_max_iters < 1) throw ParameterError("cg_max_iters must be >= 1");
}

CsConfig default_cs_config(double max_abs_adjoint) {
  CsConfig cfg;
  cfg.lambda_t = kDefaultLambdaTScale * max_abs_adjoint;
  cfg.lambda_w = kDefaultLambdaWScale * max_abs_adjoint;
  return cfg;
}

double cs_objective(const ComplexCine& x, const ComplexCine& k_us, const SamplingMask& mask,
                    const CoilSensitivities& sens, const CsConfig& cfg) {
  ComplexCine ex = sense_forward(x, sens, mask);
  auto e = ex.data();
  auto y = k_us.data();
  double fidelity = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) fidelity += std::norm(e[i] - y[i]);
  double value = 0.5 * fidelity;
  if (x.dims().frames >= 2) value += cfg.lambda_t * l1_norm(temporal_diff(x).data());
  value += cfg.lambda_w * l1_norm(haar_dwt2(x, cfg.wavelet_levels).data());
  return value;
}

CsResult admm_recon(const ComplexCine& k_us, const SamplingMask& mask, const CoilSensitivities& sens,
                    const CsConfig& cfg) {
  cfg.validate();
  k_us.expect_domain(Domain::kspace, "admm_recon");
  const auto& kd = k_us.dims();
  if (kd.coils != sens.coils) throw StructuralError("admm_recon: k-space coils do not match sensitivities");
  const CineDims xd{kd.frames, 1, kd.rows, kd.cols};
  const bool use_tv = kd.frames >= 2;
  const double rho = cfg.rho;

  const ComplexCine ehy = sense_adjoint(k_us, sens, mask);
  ComplexCine x = ehy;

  ComplexCine z1 = use_tv ? temporal_diff(x) : ComplexCine(xd, Domain::image);
  std::fill(z1.data().begin(), z1.data().end(), cplx{});
  ComplexCine u1 = z1;
  ComplexCine z2(xd, Domain::image);
  ComplexCine u2(xd, Domain::image);

  // A = E^H E + rho D^H D + rho I  (Psi^H Psi = I).
  const LinearMap apply_a = [&](std::span<const cplx> in, std::span<cplx> out) {
    ComplexCine v(xd, Domain::image, std::vector<cplx>(in.begin(), in.end()));
    ComplexCine ehe = sense_adjoint(sense_forward(v, sens, mask), sens, mask);
    auto acc = ehe.data();
    if (use_tv) axpy(acc, rho, temporal_diff_adjoint(temporal_diff(v)).data());
    axpy(acc, rho, in);
    std::copy(acc.begin(), acc.end(), out.begin());
  };

  CsResult result{x, {}};
  const double tau_t = cfg.lambda_t / rho;
  const double tau_w = cfg.lambda_w / rho;

  for (std::size_t iter = 0; iter < cfg.max_admm_iters; ++iter) {
    ComplexCine rhs = ehy;
    {
      ComplexCine w(xd, Domain::image);
      auto wd = w.data();
      for (std::size_t i = 0; i < wd.size(); ++i) wd[i] = z2.data()[i] - u2.data()[i];
      axpy(rhs.data(), rho, haar_idwt2(w, cfg.wavelet_levels).data());
    }
    if (use_tv) {
      ComplexCine v = z1;
      auto vd = v.data();
      for (std::size_t i = 0; i < vd.size(); ++i) vd[i] -= u1.data()[i];
      axpy(rhs.data(), rho, temporal_diff_adjoint(v).data());
    }

    CgResult cg = cg_solve(apply_a, rhs.data(), cfg.cg_tol, cfg.cg_max_iters);
    x = ComplexCine(xd, Domain::image, std::move(cg.x));

    ComplexCine wx = haar_dwt2(x, cfg.wavelet_levels);
    const ComplexCine z2_old = z2;
    double primal2 = 0.0;
    {
      auto z = z2.data();
      auto u = u2.data();
      auto a = wx.data();
      for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = soft_threshold(a[i] + u[i], tau_w);
        const cplx r = a[i] - z[i];
        u[i] += r;
        primal2 += std::norm(r);
      }
    }
    ComplexCine dz2(xd, Domain::image);
    for (std::size_t i = 0; i < dz2.data().size(); ++i) dz2.data()[i] = z2.data()[i] - z2_old.data()[i];
    ComplexCine dual = haar_idwt2(dz2, cfg.wavelet_levels);

    if (use_tv) {
      ComplexCine dx = temporal_diff(x);
      const ComplexCine z1_old = z1;
      auto z = z1.data();
      auto u = u1.data();
      auto a = dx.data();
      for (std::size_t i = 0; i < z.size(); ++i) {
        z[i] = soft_threshold(a[i] + u[i], tau_t);
        const cplx r = a[i] - z[i];
        u[i] += r;
        primal2 += std::norm(r);
      }
      ComplexCine dz1 = z1;
      for (std::size_t i = 0; i < z.size(); ++i) dz1.data()[i] -= z1_old.data()[i];
      axpy(dual.data(), 1.0, temporal_diff_adjoint(dz1).data());
    }

    const double primal = std::sqrt(primal2);
    const double dual_norm = rho * std::sqrt(sq_norm(dual.data()));
    const double objective = cs_objective(x, k_us, mask, sens, cfg);
    if (!std::isfinite(objective)) {
      throw NumericalError("admm_recon: objective became non-finite at iteration " + std::to_string(iter + 1));
    }
    result.trace.objective.push_back(objective);
    result.trace.primal_residual.push_back(primal);
    result.trace.dual_residual.push_back(dual_norm);

    const double stop = 1e-5 * x.norm();
    if (primal < stop && dual_norm < stop) break;
  }
  result.image = std::move(x);
  return result;
}

}  // namespace cinerecon::cs

#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "cinerecon/sampling.hpp"
#include "cinerecon/tensor.hpp"

namespace cinerecon::cs {

using sampling::SamplingMask;

// -- coil sensitivities -----------------------------------------------------

/// Low-resolution sensitivity estimate from the centre (ACS) columns of time-averaged k-space:
/// average sampled k-space over frames, keep `acs_width` centre columns under a Hamming window,
/// inverse FFT per coil, divide by the root-sum-of-squares. Pixels whose RSS is below
/// 1e-6 * max RSS are set to zero.
CoilSensitivities estimate_sensitivities(const ComplexCine& k_us, const SamplingMask& mask, std::size_t acs_width);

// -- SENSE encoding E = M F S -----------------------------------------------

/// x: single-coil image (T, 1, H, W) -> masked multi-coil k-space (T, C, H, W).
ComplexCine sense_forward(const ComplexCine& x, const CoilSensitivities& sens, const SamplingMask& mask);
/// k: multi-coil k-space -> coil-combined image, sum_c conj(s_c) * ifft2c(M k_c).
ComplexCine sense_adjoint(const ComplexCine& k, const CoilSensitivities& sens, const SamplingMask& mask);

// -- temporal finite differences -------------------------------------------

/// d[t] = x[t+1] - x[t], t = 0..T-2.
ComplexCine temporal_diff(const ComplexCine& x);
/// Exact adjoint of temporal_diff; returns T = d.frames + 1 frames.
ComplexCine temporal_diff_adjoint(const ComplexCine& d);

// -- wavelets ----------------------------------------------------------------

enum class Wavelet { haar };

/// Orthonormal multi-level 2D Haar transform of every (frame, coil) plane, Mallat layout
/// (approximation band in the top-left corner). H and W must be divisible by 2^levels.
ComplexCine haar_dwt2(const ComplexCine& img, std::size_t levels);
ComplexCine haar_idwt2(const ComplexCine& coeffs, std::size_t levels);

// -- proximal / linear algebra ----------------------------------------------

/// z * max(|z| - tau, 0) / |z|, and 0 at z = 0.
cplx soft_threshold(cplx z, double tau) noexcept;
void soft_threshold(std::span<cplx> z, double tau) noexcept;

using LinearMap = std::function<void(std::span<const cplx> in, std::span<cplx> out)>;

struct CgResult {
  std::vector<cplx> x;
  double relative_residual = 0.0;
  std::size_t iterations = 0;
};

/// Conjugate gradients for a Hermitian positive definite map, starting from x = 0.
/// Stops once ||Ax - b|| / ||b|| <= tol or after max_iters iterations.
CgResult cg_solve(const LinearMap& apply_a, std::span<const cplx> b, double tol, std::size_t max_iters);

// -- ADMM --------------------------------------------------------------------

struct CsConfig {
  double lambda_t = 0.0;
  double lambda_w = 0.0;
  double rho = 0.1;
  std::size_t max_admm_iters = 100;
  double cg_tol = 1e-6;
  std::size_t cg_max_iters = 20;
  std::size_t wavelet_levels = 2;
  Wavelet wavelet = Wavelet::haar;

  void validate() const;
};

inline constexpr double kDefaultLambdaTScale = 0.02;
inline constexpr double kDefaultLambdaWScale = 0.005;

/// Default weights scaled by max |E^H y|.
CsConfig default_cs_config(double max_abs_adjoint);

struct ObjectiveTrace {
  std::vector<double> objective;
  std::vector<double> primal_residual;
  std::vector<double> dual_residual;

  std::size_t size() const noexcept { return objective.size(); }
};

struct CsResult {
  ComplexCine image;  // (T, 1, H, W)
  ObjectiveTrace trace;
};

/// 1/2 ||E x - y||^2 + lambda_t ||D_t x||_1 + lambda_w ||Psi x||_1.
double cs_objective(const ComplexCine& x, const ComplexCine& k_us, const SamplingMask& mask,
                    const CoilSensitivities& sens, const CsConfig& cfg);

/// Two-block scaled ADMM with splittings z1 = D_t x and z2 = Psi x. The x-update is solved
/// by CG on (E^H E + rho D_t^H D_t + rho I). Stops after max_admm_iters or when both the
/// primal and dual residual norms fall below 1e-5 ||x||.
CsResult admm_recon(const ComplexCine& k_us, const SamplingMask& mask, const CoilSensitivities& sens,
                    const CsConfig& cfg);

}  // namespace cinerecon::cs

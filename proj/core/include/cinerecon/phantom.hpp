#pragma once

#include <cstddef>
#include <cstdint>

#include "cinerecon/sampling.hpp"
#include "cinerecon/tensor.hpp"

namespace cinerecon::phantom {

/// Beating-ring cine phantom. Radii are fractions of min(h, w).
struct PhantomConfig {
  std::size_t h = 64;
  std::size_t w = 64;
  std::size_t t = 12;
  std::size_t n_coils = 8;
  double r_inner = 0.12;
  double r_outer = 0.20;
  double beat_amplitude = 0.1;
  double n_beats = 1.0;
  double noise_sigma = 0.01;
  std::uint64_t seed = 7;

  /// Throws ParameterError naming the offending field.
  void validate() const;
};

inline constexpr double kBodyLevel = 0.3;
inline constexpr double kBloodLevel = 0.7;
inline constexpr double kMyocardiumLevel = 1.0;

/// Inner (blood pool) radius in pixels for frame `frame`.
double inner_radius_px(const PhantomConfig& cfg, std::size_t frame);

/// Real-valued single-coil ground truth, values in [0, 1]:
/// body ellipse 0.3, myocardial annulus 1.0, blood pool 0.7, 1-pixel raised-cosine edges.
ComplexCine generate_cine(const PhantomConfig& cfg);

/// Gaussian receive profiles centred on the image boundary with per-coil linear phase,
/// normalized so that sqrt(sum_c |s_c|^2) = 1 at every pixel.
CoilSensitivities generate_coil_maps(std::size_t h, std::size_t w, std::size_t n_coils, std::uint64_t seed);

struct Acquisition {
  ComplexCine k_full;
  ComplexCine k_us;
};

/// k_full[t, c] = fft2c(sens[c] * gt[t]) + complex Gaussian noise with E|n|^2 = (noise_sigma * peak)^2,
/// where peak is the largest coil-image magnitude; k_us = undersample(k_full, mask).
Acquisition simulate_acquisition(const ComplexCine& gt, const CoilSensitivities& sens,
                                 const sampling::SamplingMask& mask, double noise_sigma, std::uint64_t seed);

/// Coil images sens[c] * gt[t] (the noise-free multi-coil truth).
ComplexCine coil_images(const ComplexCine& gt, const CoilSensitivities& sens);

}  // namespace cinerecon::phantom

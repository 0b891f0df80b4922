#include "cinerecon/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "cinerecon/error.hpp"
#include "cinerecon/fft.hpp"
#include "cinerecon/random.hpp"

namespace cinerecon::phantom {

namespace {

// 0 outside, 1 inside, raised-cosine over one pixel centred on the boundary.
// `d` is the signed distance to the boundary in pixels, positive inside.
double smooth_inside(double d) {
  if (d <= -0.5) return 0.0;
  if (d >= 0.5) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * (d + 0.5));
}

}  // namespace

void PhantomConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) { throw ParameterError(key + ": " + why); };
  if (h < 8) fail("h", "must be >= 8");
  if (w < 8) fail("w", "must be >= 8");
  if (t < 1) fail("t", "must be >= 1");
  if (n_coils < 1) fail("n_coils", "must be >= 1");
  if (!(r_inner > 0.0)) fail("r_inner", "must be > 0");
  if (!(r_inner < r_outer)) fail("r_inner", "must be below r_outer");
  if (!(r_outer < 0.5)) fail("r_outer", "must be < 0.5");
  if (!(beat_amplitude >= 0.0 && beat_amplitude < r_inner)) fail("beat_amplitude", "must satisfy 0 <= a < r_inner");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma", "must be >= 0");
  if (!(n_beats >= 0.0)) fail("n_beats", "must be >= 0");
}

double inner_radius_px(const PhantomConfig& cfg, std::size_t frame) {
  const double scale = static_cast<double>(std::min(cfg.h, cfg.w));
  const double phase = 2.0 * std::numbers::pi * cfg.n_beats * static_cast<double>(frame) / static_cast<double>(cfg.t);
  return cfg.r_inner * scale * (1.0 + cfg.beat_amplitude * std::sin(phase));
}

ComplexCine generate_cine(const PhantomConfig& cfg) {
  cfg.validate();
  ComplexCine gt({cfg.t, 1, cfg.h, cfg.w}, Domain::image);
  const double cy = static_cast<double>(cfg.h / 2);
  const double cx = static_cast<double>(cfg.w / 2);
  const double scale = static_cast<double>(std::min(cfg.h, cfg.w));
  const double r_out = cfg.r_outer * scale;
  const double body_ry = 0.44 * static_cast<double>(cfg.h);
  const double body_rx = 0.47 * static_cast<double>(cfg.w);

  for (std::size_t t = 0; t < cfg.t; ++t) {
    const double r_in = inner_radius_px(cfg, t);
    auto plane = gt.slice(t, 0);
    for (std::size_t y = 0; y < cfg.h; ++y) {
      for (std::size_t x = 0; x < cfg.w; ++x) {
        const double dy = static_cast<double>(y) - cy;
        const double dx = static_cast<double>(x) - cx;
        const double rho = std::hypot(dy, dx);
        // Ellipse distance approximated by scaling the normalized radius by the local semi-axis.
        const double er = std::hypot(dy / body_ry, dx / body_rx);
        const double local_axis = er > 0.0 ? rho / er : std::min(body_rx, body_ry);
        const double body = smooth_inside((1.0 - er) * local_axis);
        // Nesting keeps every pixel in [0, 1].
        const double myo = std::min(smooth_inside(r_out - rho), body);
        const double blood = std::min(smooth_inside(r_in - rho), myo);
        const double v = kBodyLevel * (body - myo) + kMyocardiumLevel * (myo - blood) + kBloodLevel * blood;
        plane[y * cfg.w + x] = cplx(std::clamp(v, 0.0, 1.0), 0.0);
      }
    }
  }
  return gt;
}

CoilSensitivities generate_coil_maps(std::size_t h, std::size_t w, std::size_t n_coils, std::uint64_t seed) {
  if (n_coils < 1) throw ParameterError("n_coils must be >= 1");
  CoilSensitivities s(n_coils, h, w);
  std::mt19937_64 rng(seed);
  auto unit = [](std::mt19937_64& g) { return uniform_real(g, -1.0, 1.0); };
  const double cy = static_cast<double>(h / 2);
  const double cx = static_cast<double>(w / 2);
  const double width = 0.7 * static_cast<double>(std::min(h, w));

  for (std::size_t c = 0; c < n_coils; ++c) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(n_coils);
    const double py = cy + 0.5 * static_cast<double>(h) * std::sin(angle);
    const double px = cx + 0.5 * static_cast<double>(w) * std::cos(angle);
    const double phase0 = std::numbers::pi * unit(rng);
    // At most half a cycle of phase across the image in each direction.
    const double ky = 0.5 * unit(rng) * std::numbers::pi / static_cast<double>(h);
    const double kx = 0.5 * unit(rng) * std::numbers::pi / static_cast<double>(w);
    auto map = s.map(c);
    for (std::size_t y = 0; y < h; ++y) {
      for (std::size_t x = 0; x < w; ++x) {
        const double dy = static_cast<double>(y) - py;
        const double dx = static_cast<double>(x) - px;
        const double mag = std::exp(-(dy * dy + dx * dx) / (2.0 * width * width));
        const double phase = phase0 + ky * static_cast<double>(y) + kx * static_cast<double>(x);
        map[y * w + x] = std::polar(mag, phase);
      }
    }
  }
  for (std::size_t i = 0; i < h * w; ++i) {
    double ss = 0.0;
    for (std::size_t c = 0; c < n_coils; ++c) ss += std::norm(s.map(c)[i]);
    const double inv = 1.0 / std::sqrt(ss);
    for (std::size_t c = 0; c < n_coils; ++c) s.map(c)[i] *= inv;
  }
  return s;
}

ComplexCine coil_images(const ComplexCine& gt, const CoilSensitivities& sens) {
  gt.expect_domain(Domain::image, "coil_images");
  const auto& d = gt.dims();
  if (d.coils != 1 || sens.rows != d.rows || sens.cols != d.cols) {
    throw StructuralError("coil_images: ground truth " + d.to_string() + " does not match sensitivities");
  }
  ComplexCine out({d.frames, sens.coils, d.rows, d.cols}, Domain::image);
  for (std::size_t t = 0; t < d.frames; ++t) {
    auto src = gt.slice(t, 0);
    for (std::size_t c = 0; c < sens.coils; ++c) {
      auto map = sens.map(c);
      auto dst = out.slice(t, c);
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = map[i] * src[i];
    }
  }
  return out;
}

Acquisition simulate_acquisition(const ComplexCine& gt, const CoilSensitivities& sens,
                                 const sampling::SamplingMask& mask, double noise_sigma, std::uint64_t seed) {
  if (!(noise_sigma >= 0.0)) throw ParameterError("noise_sigma must be >= 0");
  const ComplexCine images = coil_images(gt, sens);
  ComplexCine k_full = fft2c(images);
  if (noise_sigma > 0.0) {
    double peak = 0.0;
    for (const auto& z : images.data()) peak = std::max(peak, std::abs(z));
    const double per_component = noise_sigma * peak / std::numbers::sqrt2;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (auto& z : k_full.data()) {
      const double re = normal(rng);
      const double im = normal(rng);
      z += cplx(per_component * re, per_component * im);
    }
  }
  ComplexCine k_us = sampling::undersample(k_full, mask);
  return {std::move(k_full), std::move(k_us)};
}

}  // namespace cinerecon::phantom

#include <gtest/gtest.h>

#include <cmath>

#include "cinerecon/error.hpp"
#include "cinerecon/fft.hpp"
#include "cinerecon/phantom.hpp"
#include "oracles.hpp"

namespace cr = cinerecon;
namespace ph = cinerecon::phantom;
namespace ct = cinerecon::testing;
using cr::ComplexCine;
using cr::cplx;
using cr::Domain;

namespace {

cr::sampling::SamplingMask full_mask(std::size_t t, std::size_t w) {
  cr::sampling::SamplingMask m(t, w);
  for (auto& b : m.bits) b = 1;
  return m;
}

bool bitwise_equal(const ComplexCine& a, const ComplexCine& b) {
  return a.dims() == b.dims() && std::equal(a.data().begin(), a.data().end(), b.data().begin());
}

}  // namespace

TEST(PhantomConfig, Validation) {
  ph::PhantomConfig c;
  EXPECT_NO_THROW(c.validate());
  c.r_inner = 0.25;
  EXPECT_THROW(c.validate(), cr::ParameterError);
  c = {};
  c.r_outer = 0.5;
  EXPECT_THROW(c.validate(), cr::ParameterError);
  c = {};
  c.beat_amplitude = c.r_inner;
  EXPECT_THROW(c.validate(), cr::ParameterError);
  c = {};
  c.noise_sigma = -0.1;
  EXPECT_THROW(c.validate(), cr::ParameterError);
  try {
    c = {};
    c.r_inner = 0.3;
    c.validate();
  } catch (const cr::ParameterError& e) {
    EXPECT_NE(std::string(e.what()).find("r_inner"), std::string::npos) << e.what();
  }
}

TEST(Phantom, RealValuedAndBounded) {
  const ComplexCine gt = ph::generate_cine({});
  EXPECT_EQ(gt.dims(), (cr::CineDims{12, 1, 64, 64}));
  for (const cplx& v : gt.data()) {
    EXPECT_EQ(v.imag(), 0.0);
    EXPECT_GE(v.real(), 0.0);
    EXPECT_LE(v.real(), 1.0);
  }
}

TEST(Phantom, StaticWithoutBeat) {
  ph::PhantomConfig c;
  c.beat_amplitude = 0.0;
  const ComplexCine gt = ph::generate_cine(c);
  for (std::size_t t = 1; t < c.t; ++t) {
    EXPECT_TRUE(std::equal(gt.slice(t, 0).begin(), gt.slice(t, 0).end(), gt.slice(0, 0).begin()));
  }
}

TEST(Phantom, BeatSymmetry) {
  ph::PhantomConfig c;  // T = 12, one beat
  EXPECT_NEAR(ph::inner_radius_px(c, 0), ph::inner_radius_px(c, 6), 1e-12);
  double best = 0.0;
  std::size_t arg = 0;
  for (std::size_t t = 0; t < c.t; ++t) {
    if (ph::inner_radius_px(c, t) > best) {
      best = ph::inner_radius_px(c, t);
      arg = t;
    }
  }
  EXPECT_EQ(arg, 3u);
  EXPECT_NEAR(best, c.r_inner * 64 * (1 + c.beat_amplitude), 1e-12);
}

TEST(Phantom, IntensityPlateaus) {
  const ComplexCine gt = ph::generate_cine({});
  for (double level : {0.0, ph::kBodyLevel, ph::kBloodLevel, ph::kMyocardiumLevel}) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < 64 * 64; ++i) n += std::abs(gt.slice(0, 0)[i].real() - level) <= 0.05;
    EXPECT_GT(n, 40u) << level;
  }
}

TEST(CoilMaps, RssNormalizedAndSmooth) {
  for (std::size_t coils : {1u, 3u, 8u}) {
    const auto s = ph::generate_coil_maps(64, 64, coils, 7);
    for (std::size_t p = 0; p < 64 * 64; ++p) {
      double ss = 0.0;
      for (std::size_t c = 0; c < coils; ++c) ss += std::norm(s.map(c)[p]);
      EXPECT_NEAR(std::sqrt(ss), 1.0, 1e-12);
    }
  }
  const auto s = ph::generate_coil_maps(64, 64, 8, 7);
  double gmax = 0.0;
  for (std::size_t c = 0; c < 8; ++c) {
    for (std::size_t i = 0; i + 1 < 64; ++i) {
      for (std::size_t j = 0; j + 1 < 64; ++j) {
        const cplx v = s.map(c)[i * 64 + j];
        const double g = std::hypot(std::abs(s.map(c)[(i + 1) * 64 + j] - v), std::abs(s.map(c)[i * 64 + j + 1] - v));
        gmax = std::max(gmax, g);
      }
    }
  }
  EXPECT_LT(gmax, 0.2);
}

TEST(Acquisition, NoiselessInverse) {
  ph::PhantomConfig c;
  c.h = 32;
  c.w = 32;
  c.t = 4;
  const ComplexCine gt = ph::generate_cine(c);
  cr::CoilSensitivities uniform(1, 32, 32);
  for (auto& v : uniform.data) v = 1.0;
  const auto acq = ph::simulate_acquisition(gt, uniform, full_mask(4, 32), 0.0, 1);
  const ComplexCine back = cr::ifft2c(acq.k_us);
  for (std::size_t i = 0; i < gt.data().size(); ++i) EXPECT_NEAR(std::abs(back.data()[i] - gt.data()[i]), 0.0, 1e-12);

  const auto sens = ph::generate_coil_maps(32, 32, 6, 3);
  const auto multi = ph::simulate_acquisition(gt, sens, full_mask(4, 32), 0.0, 1);
  const auto rss = cr::rss_combine(cr::ifft2c(multi.k_full));
  for (std::size_t t = 0; t < 4; ++t)
    for (std::size_t h = 0; h < 32; ++h)
      for (std::size_t w = 0; w < 32; ++w) EXPECT_NEAR(rss(t, h, w), std::abs(gt(t, 0, h, w)), 1e-10);
}

TEST(Acquisition, LinearWithoutNoiseAndReproducibleWithNoise) {
  ph::PhantomConfig c;
  c.h = 16;
  c.w = 16;
  c.t = 3;
  const ComplexCine gt = ph::generate_cine(c);
  ComplexCine scaled = gt;
  for (auto& v : scaled.data()) v *= 2.5;
  const auto sens = ph::generate_coil_maps(16, 16, 4, 2);
  std::mt19937_64 rng(1);
  const auto m = ct::random_mask(3, 16, 0.5, rng);
  const auto a = ph::simulate_acquisition(gt, sens, m, 0.0, 5);
  const auto b = ph::simulate_acquisition(scaled, sens, m, 0.0, 5);
  for (std::size_t i = 0; i < a.k_full.data().size(); ++i)
    EXPECT_NEAR(std::abs(2.5 * a.k_full.data()[i] - b.k_full.data()[i]), 0.0, 1e-12);

  const auto n1 = ph::simulate_acquisition(gt, sens, m, 0.01, 5);
  const auto n2 = ph::simulate_acquisition(gt, sens, m, 0.01, 5);
  EXPECT_TRUE(bitwise_equal(n1.k_full, n2.k_full));
  EXPECT_TRUE(bitwise_equal(n1.k_us, n2.k_us));
  EXPECT_FALSE(bitwise_equal(n1.k_full, ph::simulate_acquisition(gt, sens, m, 0.01, 6).k_full));
  EXPECT_TRUE(bitwise_equal(n1.k_us, cr::sampling::undersample(n1.k_full, m)));
}

TEST(Acquisition, NoiseLevelRelativeToPeak) {
  ph::PhantomConfig c;
  const ComplexCine gt = ph::generate_cine(c);
  const auto sens = ph::generate_coil_maps(64, 64, 8, 2);
  const auto m = full_mask(12, 64);
  const auto clean = ph::simulate_acquisition(gt, sens, m, 0.0, 9);
  const auto noisy = ph::simulate_acquisition(gt, sens, m, 0.05, 9);
  double peak = 0.0;
  const ComplexCine truth = ph::coil_images(gt, sens);
  for (const cplx& v : truth.data()) peak = std::max(peak, std::abs(v));
  double ss = 0.0;
  for (std::size_t i = 0; i < clean.k_full.data().size(); ++i) ss += std::norm(noisy.k_full.data()[i] - clean.k_full.data()[i]);
  const double sigma = std::sqrt(ss / static_cast<double>(clean.k_full.data().size()));
  EXPECT_NEAR(sigma / (0.05 * peak), 1.0, 0.02);
}

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cinerecon/error.hpp"
#include "cinerecon/metrics.hpp"
#include "oracles.hpp"

namespace cr = cinerecon;
namespace mt = cinerecon::metrics;
namespace ct = cinerecon::testing;
using cr::RealImageSequence;

namespace {

RealImageSequence random_seq(std::size_t t, std::size_t h, std::size_t w, std::uint64_t seed, double lo = 0.0,
                             double hi = 1.0) {
  std::mt19937_64 rng(seed);
  return RealImageSequence(t, h, w, ct::random_real(t * h * w, rng, lo, hi));
}

RealImageSequence constant_seq(std::size_t t, std::size_t h, std::size_t w, double v) {
  return RealImageSequence(t, h, w, std::vector<double>(t * h * w, v));
}

RealImageSequence scaled(const RealImageSequence& a, double k) {
  std::vector<double> d(a.data().begin(), a.data().end());
  for (double& v : d) v *= k;
  return RealImageSequence(a.frames(), a.rows(), a.cols(), std::move(d));
}

}  // namespace

TEST(Ssim, IdenticalIsExactlyOne) {
  const auto a = random_seq(3, 20, 17, 1);
  for (double v : mt::ssim(a, a)) EXPECT_EQ(v, 1.0);
  const auto z = constant_seq(2, 8, 8, 0.0);
  for (double v : mt::ssim(z, z)) EXPECT_EQ(v, 1.0);
}

TEST(Ssim, ZeroAgainstRandomIsLow) {
  const auto b = random_seq(1, 64, 64, 2);
  const auto z = constant_seq(1, 64, 64, 0.0);
  const double s = mt::ssim(z, b)[0];
  EXPECT_LT(s, 0.1);
  EXPECT_NEAR(s, ct::ssim_bruteforce(z.frame(0), b.frame(0), 64, 64, b.max()), 1e-12);
}

TEST(Ssim, ConstantPatchesMatchScalarFormula) {
  const auto a = constant_seq(1, 7, 7, 0.5);
  const auto b = constant_seq(1, 7, 7, 0.6);
  mt::SsimOptions o;
  o.dynamic_range = 1.0;
  const double c1 = 0.01 * 0.01;
  const double expected = (2 * 0.5 * 0.6 + c1) / (0.25 + 0.36 + c1);  // contrast term is c2 / c2
  // windowed moments via E[x^2] - E[x]^2 leave ~1e-16 variances that c2 = 9e-4 amplifies
  EXPECT_NEAR(mt::ssim(a, b, o)[0], expected, 1e-12);
  EXPECT_NEAR(mt::ssim(a, b, o)[0], ct::ssim_window_scalar(a.frame(0), b.frame(0), 1.0, 0.01, 0.03), 1e-12);
}

TEST(Ssim, MatchesBruteForceOnRandomImages) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto a = random_seq(2, 13 + seed, 9 + 2 * seed, 100 + seed);
    const auto b = random_seq(2, 13 + seed, 9 + 2 * seed, 200 + seed, 0.0, 2.0);
    const auto s = mt::ssim(a, b);
    for (std::size_t t = 0; t < 2; ++t) {
      EXPECT_NEAR(s[t], ct::ssim_bruteforce(a.frame(t), b.frame(t), a.rows(), a.cols(), b.max()), 1e-12);
      EXPECT_GE(s[t], -1.0);
      EXPECT_LE(s[t], 1.0);
    }
  }
}

TEST(Ssim, SymmetricWithFixedRange) {
  const auto a = random_seq(2, 16, 16, 3);
  const auto b = random_seq(2, 16, 16, 4);
  mt::SsimOptions o;
  o.dynamic_range = 1.0;
  const auto ab = mt::ssim(a, b, o), ba = mt::ssim(b, a, o);
  for (std::size_t t = 0; t < 2; ++t) EXPECT_NEAR(ab[t], ba[t], 1e-15);
}

TEST(Ssim, Errors) {
  EXPECT_THROW(mt::ssim(random_seq(1, 8, 8, 1), random_seq(1, 8, 9, 1)), cr::StructuralError);
  EXPECT_THROW(mt::ssim(random_seq(1, 8, 8, 1), constant_seq(1, 8, 8, 0.0)), cr::PreconditionError);
  EXPECT_THROW(mt::ssim(random_seq(1, 5, 8, 1), random_seq(1, 5, 8, 2)), cr::ParameterError);
}

TEST(Psnr, ClosedForms) {
  EXPECT_NEAR(mt::psnr_from_mse(1.0, 0.01), 20.0, 1e-12);
  EXPECT_NEAR(mt::psnr_from_mse(1.0, 1e-4), 40.0, 1e-12);
  EXPECT_EQ(mt::psnr_from_mse(1.0, 0.0), mt::kPsnrCapDb);
  EXPECT_EQ(mt::psnr_from_mse(1.0, 1e-21), mt::kPsnrCapDb);
  const auto b = random_seq(2, 8, 8, 5);
  for (double v : mt::psnr(b, b)) EXPECT_EQ(v, mt::kPsnrCapDb);

  // a = b + 0.1 everywhere: MSE = 0.01 against an explicit unit peak
  const auto one = constant_seq(1, 4, 4, 1.0);
  const auto off = constant_seq(1, 4, 4, 1.1);
  EXPECT_NEAR(mt::psnr(off, one)[0], 20.0, 1e-10);
  EXPECT_NEAR(mt::psnr(off, one, 1.0)[0], 20.0, 1e-10);
}

TEST(Psnr, StrictlyDecreasingInMse) {
  double prev = mt::psnr_from_mse(1.0, 1e-12);
  for (double mse = 2e-12; mse < 10.0; mse *= 1.7) {
    const double p = mt::psnr_from_mse(1.0, mse);
    EXPECT_LT(p, prev);
    prev = p;
  }
}

TEST(Nmse, ClosedFormsAndScaleInvariance) {
  const auto b = random_seq(2, 8, 8, 6, 0.1, 1.0);
  for (double v : mt::nmse(b, b)) EXPECT_EQ(v, 0.0);
  for (double v : mt::nmse(constant_seq(2, 8, 8, 0.0), b)) EXPECT_NEAR(v, 1.0, 1e-15);
  for (double v : mt::nmse(scaled(b, 2.0), b)) EXPECT_NEAR(v, 1.0, 1e-15);
  const auto a = random_seq(2, 8, 8, 7);
  const auto r = mt::nmse(a, b), rk = mt::nmse(scaled(a, 3.7), scaled(b, 3.7));
  for (std::size_t t = 0; t < 2; ++t) {
    EXPECT_GE(r[t], 0.0);
    EXPECT_NEAR(rk[t], r[t], 1e-13 * r[t]);
  }
  EXPECT_THROW(mt::nmse(a, constant_seq(2, 8, 8, 0.0)), cr::PreconditionError);
}

TEST(Report, CsvRows) {
  const auto b = random_seq(2, 8, 8, 8, 0.1, 1.0);
  const auto rep = mt::evaluate("zf", scaled(b, 0.9), b, 1.25);
  EXPECT_EQ(rep.ssim.size(), 2u);
  std::ostringstream os;
  mt::write_csv_header(os);
  mt::write_csv_rows(os, rep);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "method,frame,ssim,psnr_db,nmse,seconds");
  std::size_t rows = 0;
  while (std::getline(is, line)) {
    EXPECT_EQ(line.rfind("zf," + std::to_string(rows) + ",", 0), 0u) << line;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 5);
    ++rows;
  }
  EXPECT_EQ(rows, 2u);
  EXPECT_NEAR(rep.mean_nmse(), 0.01, 1e-12);
}

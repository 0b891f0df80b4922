#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "cinerecon/autodiff.hpp"
#include "cinerecon/error.hpp"
#include "cinerecon/metrics.hpp"
#include "cinerecon/params.hpp"
#include "gradient_suite.hpp"
#include "oracles.hpp"

namespace cr = cinerecon;
namespace ad = cinerecon::ad;
namespace ct = cinerecon::testing;

namespace {

std::vector<double> conv_values(std::size_t c_in, std::size_t c_out, std::size_t h, std::size_t w,
                                std::span<const double> x, std::span<const double> k, std::span<const double> b) {
  ad::Tape<double> tape;
  auto xv = tape.constant({c_in, h, w}, {x.begin(), x.end()});
  auto kv = tape.constant({c_out, c_in, 3, 3}, {k.begin(), k.end()});
  auto bv = tape.constant({c_out}, {b.begin(), b.end()});
  auto y = ad::conv2d(xv, kv, std::optional(bv));
  return {y.value().begin(), y.value().end()};
}

}  // namespace

TEST(Conv2d, IdentityKernel) {
  std::mt19937_64 rng(1);
  const auto x = ct::random_real(5 * 7, rng);
  std::vector<double> k(9, 0.0);
  k[4] = 1.0;
  const auto y = conv_values(1, 1, 5, 7, x, k, std::vector<double>{0.0});
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y[i], x[i]);
}

TEST(Conv2d, OnesKernelPaddingArithmetic) {
  const double c = 0.75;
  const auto y = conv_values(1, 1, 5, 5, std::vector<double>(25, c), std::vector<double>(9, 1.0), std::vector<double>{0.0});
  EXPECT_DOUBLE_EQ(y[2 * 5 + 2], 9 * c);
  EXPECT_DOUBLE_EQ(y[0], 4 * c);
  EXPECT_DOUBLE_EQ(y[24], 4 * c);
  EXPECT_DOUBLE_EQ(y[2], 6 * c);
}

// Covers the small-output direct path, the im2col path and multi-tile images.
TEST(Conv2d, MatchesDirectDefinition) {
  std::mt19937_64 rng(2);
  struct Case {
    std::size_t c_in, c_out, h, w;
  };
  for (Case cs : {Case{1, 1, 3, 3}, Case{2, 2, 8, 5}, Case{3, 4, 6, 6}, Case{4, 5, 7, 9}, Case{2, 16, 12, 12},
                  Case{16, 8, 24, 64}, Case{16, 2, 40, 64}, Case{18, 16, 33, 31}}) {
    const auto x = ct::random_real(cs.c_in * cs.h * cs.w, rng);
    const auto k = ct::random_real(cs.c_out * cs.c_in * 9, rng);
    const auto b = ct::random_real(cs.c_out, rng);
    const auto got = conv_values(cs.c_in, cs.c_out, cs.h, cs.w, x, k, b);
    const auto ref = ct::direct_conv3x3(x, k, b, cs.c_in, cs.c_out, cs.h, cs.w);
    double err = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) err = std::max(err, std::abs(got[i] - ref[i]));
    EXPECT_LT(err, 1e-6) << cs.c_in << "->" << cs.c_out << " " << cs.h << "x" << cs.w;
  }
}

TEST(Conv2d, FloatMatchesDirectDefinition) {
  std::mt19937_64 rng(3);
  const std::size_t c_in = 16, c_out = 16, h = 20, w = 32;
  const auto x = ct::random_real(c_in * h * w, rng);
  const auto k = ct::random_real(c_out * c_in * 9, rng, -0.1, 0.1);
  const auto b = ct::random_real(c_out, rng);
  ad::Tape<float> tape;
  auto y = ad::conv2d(tape.constant({c_in, h, w}, std::vector<float>(x.begin(), x.end())),
                      tape.constant({c_out, c_in, 3, 3}, std::vector<float>(k.begin(), k.end())),
                      std::optional(tape.constant({c_out}, std::vector<float>(b.begin(), b.end()))));
  const auto ref = ct::direct_conv3x3(x, k, b, c_in, c_out, h, w);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.value()[i], ref[i], 1e-5);
}

TEST(Conv2d, FusedReluEqualsSeparateRelu) {
  std::mt19937_64 rng(4);
  ad::Tape<double> tape;
  auto x = tape.parameter({3, 6, 6}, ct::random_real(108, rng));
  auto k = tape.parameter({5, 3, 3, 3}, ct::random_real(135, rng));
  auto b = tape.parameter({5}, ct::random_real(5, rng));
  auto fused = ad::conv2d(x, k, std::optional(b), ad::Activation::relu);
  auto separate = ad::relu(ad::conv2d(x, k, std::optional(b)));
  for (std::size_t i = 0; i < fused.numel(); ++i) EXPECT_EQ(fused.value()[i], separate.value()[i]);
}

TEST(Conv2d, ChannelMismatchIsStructuralError) {
  ad::Tape<double> tape;
  auto x = tape.constant({2, 4, 4}, std::vector<double>(32));
  auto k = tape.constant({1, 3, 3, 3}, std::vector<double>(27));
  EXPECT_THROW((void)ad::conv2d(x, k, std::nullopt), cr::StructuralError);
}

TEST(Relu, ValuesAndGradient) {
  ad::Tape<double> tape;
  auto x = tape.parameter({4}, {-1.0, 2.0, 3.0, -3.0});
  auto y = ad::relu(x);
  EXPECT_EQ(std::vector<double>(y.value().begin(), y.value().end()), (std::vector<double>{0.0, 2.0, 3.0, 0.0}));
  tape.backward(ad::sum(y));
  EXPECT_EQ(std::vector<double>(x.grad().begin(), x.grad().end()), (std::vector<double>{0.0, 1.0, 1.0, 0.0}));

  ad::Tape<double> t0;
  auto z = t0.parameter({1}, {0.0});
  t0.backward(ad::sum(ad::relu(z)));
  EXPECT_EQ(z.grad()[0], 0.0);
}

TEST(Backward, ElementaryLosses) {
  std::mt19937_64 rng(5);
  const auto v = ct::random_real(12, rng);
  ad::Tape<double> tape;
  auto x = tape.parameter({3, 4}, v);
  tape.backward(ad::sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);

  ad::Tape<double> t2;
  auto y = t2.parameter({3, 4}, v);
  t2.backward(ad::affine(ad::sum(ad::mul(y, y)), 0.5));
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_DOUBLE_EQ(y.grad()[i], v[i]);
}

TEST(Backward, AccumulatesUntilZeroGrad) {
  std::mt19937_64 rng(6);
  ad::Tape<double> tape;
  auto x = tape.parameter({2, 5, 5}, ct::random_real(50, rng));
  auto k = tape.parameter({3, 2, 3, 3}, ct::random_real(54, rng));
  auto loss = ad::sum(ad::relu(ad::conv2d(x, k, std::nullopt)));
  tape.backward(loss);
  const std::vector<double> once(k.grad().begin(), k.grad().end());
  tape.backward(loss);
  // per-tap partial sums land on a non-zero buffer the second time, so equality is to rounding
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_NEAR(k.grad()[i], 2.0 * once[i], 1e-13 * std::abs(once[i]) + 1e-15);
  tape.zero_grad();
  for (double g : k.grad()) EXPECT_EQ(g, 0.0);
  tape.backward(loss);
  for (std::size_t i = 0; i < once.size(); ++i) EXPECT_EQ(k.grad()[i], once[i]);
}

TEST(Backward, RejectsNonScalarAndDetachedLoss) {
  ad::Tape<double> tape;
  auto x = tape.parameter({3}, {1.0, 2.0, 3.0});
  EXPECT_THROW(tape.backward(ad::relu(x)), cr::StructuralError);
  auto c = tape.constant({2}, {1.0, 2.0});
  EXPECT_THROW(tape.backward(ad::sum(c)), cr::StructuralError);
  ad::Tape<double> other;
  auto y = other.parameter({1}, {1.0});
  EXPECT_THROW(tape.backward(ad::sum(y)), cr::StructuralError);
}

TEST(Backward, OperationsDoNotMutateInputs) {
  std::mt19937_64 rng(7);
  const auto xv = ct::random_real(2 * 6 * 6, rng), kv = ct::random_real(2 * 2 * 9, rng);
  ad::Tape<double> tape;
  auto x = tape.parameter({2, 6, 6}, xv);
  auto k = tape.parameter({2, 2, 3, 3}, kv);
  auto loss = ad::sum(ad::magnitude(ad::conv2d(ad::relu(x), k, std::nullopt)));
  tape.backward(loss);
  EXPECT_TRUE(std::equal(xv.begin(), xv.end(), x.value().begin()));
  EXPECT_TRUE(std::equal(kv.begin(), kv.end(), k.value().begin()));
}

TEST(Backward, RepeatableBitwise) {
  auto run = [] {
    std::mt19937_64 rng(8);
    ad::Tape<double> tape;
    auto x = tape.parameter({2, 6, 6}, ct::random_real(72, rng));
    auto k = tape.parameter({4, 2, 3, 3}, ct::random_real(72, rng));
    tape.backward(ad::sum(ad::relu(ad::conv2d(x, k, std::nullopt))));
    return std::vector<double>(k.grad().begin(), k.grad().end());
  };
  EXPECT_EQ(run(), run());
}

// Randomized finite-difference checks, 20 configurations per building block.
class GradientCheck : public ::testing::TestWithParam<std::size_t> {};

TEST_P(GradientCheck, TwentyRandomConfigs) {
  const auto& c = ct::gradient_cases()[GetParam()];
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = c.run(1000 + seed);
    EXPECT_LT(r.max_rel_error, c.tolerance) << c.name << " seed " << seed;
    EXPECT_LE(r.nonsmooth * 20, r.checked) << c.name << " seed " << seed;
  }
}

INSTANTIATE_TEST_SUITE_P(Ops, GradientCheck, ::testing::Range<std::size_t>(0, 6), [](const auto& info) {
  return ct::gradient_cases()[info.param].name;
});

// Single-precision tape: gradients of a 3-layer network agree with the double tape (itself
// checked against finite differences above) to 1e-4 relative.
TEST(GradientPrecision, FloatTapeTracksDouble) {
  std::mt19937_64 rng(9);
  const std::size_t h = 10, w = 10;
  const auto x = ct::random_real(2 * h * w, rng);
  const auto k1 = ct::random_real(8 * 2 * 9, rng, -0.4, 0.4), k2 = ct::random_real(8 * 8 * 9, rng, -0.2, 0.2),
             k3 = ct::random_real(2 * 8 * 9, rng, -0.2, 0.2);
  auto grads = [&]<typename S>(S) {
    ad::Tape<S> tape;
    auto cvt = [](const std::vector<double>& v) { return std::vector<S>(v.begin(), v.end()); };
    auto xv = tape.constant({2, h, w}, cvt(x));
    auto w1 = tape.parameter({8, 2, 3, 3}, cvt(k1));
    auto w2 = tape.parameter({8, 8, 3, 3}, cvt(k2));
    auto w3 = tape.parameter({2, 8, 3, 3}, cvt(k3));
    auto y = ad::conv2d(ad::conv2d(ad::conv2d(xv, w1, std::nullopt, ad::Activation::relu), w2, std::nullopt,
                                   ad::Activation::relu),
                        w3, std::nullopt);
    tape.backward(ad::mean(ad::mul(y, y)));
    std::vector<double> g;
    for (const auto& p : {w1, w2, w3}) g.insert(g.end(), p.grad().begin(), p.grad().end());
    return g;
  };
  const auto gd = grads(0.0);
  const auto gf = grads(0.0f);
  double gmax = 0.0;
  for (double g : gd) gmax = std::max(gmax, std::abs(g));
  for (std::size_t i = 0; i < gd.size(); ++i) EXPECT_LT(std::abs(gf[i] - gd[i]), 1e-4 * std::max(std::abs(gd[i]), 1e-2 * gmax));
}

TEST(Magnitude, EpsilonGuardAtZero) {
  ad::Tape<double> tape;
  auto x = tape.parameter({2, 1, 2}, {0.0, 3.0, 0.0, 4.0});
  auto m = ad::magnitude(x);
  EXPECT_NEAR(m.value()[0], 1e-6, 1e-12);
  EXPECT_NEAR(m.value()[1], 5.0, 1e-12);
  tape.backward(ad::sum(m));
  for (double g : x.grad()) EXPECT_TRUE(std::isfinite(g));
}

TEST(SsimOp, MatchesScalarBruteForceAndMetric) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t h = 7 + cr::uniform_index(rng, 6), w = 7 + cr::uniform_index(rng, 6);
    const auto a = ct::random_real(h * w, rng, 0.0, 1.0), b = ct::random_real(h * w, rng, 0.0, 1.0);
    ad::Tape<double> tape;
    const double range = 1.3;
    auto s = ad::ssim(tape.constant({h, w}, a), std::span<const double>(b), ad::SsimParams{7, 0.01, 0.03, range});
    const double ref = ct::ssim_bruteforce(a, b, h, w, range);
    EXPECT_NEAR(s.item(), ref, 1e-12);
    EXPECT_NEAR(cr::metrics::ssim_image(a, b, h, w, range), ref, 1e-12);
  }
}

TEST(Adam, ZeroGradientLeavesParamsAndCountsStep) {
  ad::ParamSet p;
  p.add("w", {3}, {1.0, -2.0, 0.5});
  auto before = p;
  auto st = ad::AdamState::for_params(p);
  ad::adam_step(p, {{0.0, 0.0, 0.0}}, st);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step_count, 1u);
}

TEST(Adam, FirstStepMagnitudeIsLearningRate) {
  ad::ParamSet p;
  p.add("w", {4}, {0.0, 1.0, -1.0, 2.0});
  auto before = p;
  auto st = ad::AdamState::for_params(p);
  ad::adam_step(p, {std::vector<double>(4, 1.0)}, st);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(before.at("w").values[i] - p.at("w").values[i], 1e-3, 1e-6 * 1e-3);
}

TEST(Adam, NonFiniteGradientNamesParameter) {
  ad::ParamSet p;
  p.add("first", {1}, {0.0});
  p.add("second.weight", {2}, {0.0, 0.0});
  auto st = ad::AdamState::for_params(p);
  const auto before = p;
  try {
    ad::adam_step(p, {{0.1}, {0.0, std::nan("")}}, st);
    FAIL();
  } catch (const cr::NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("second.weight"), std::string::npos);
  }
  EXPECT_EQ(p, before);
}

TEST(Adam, DeterministicSequences) {
  auto run = [] {
    ad::ParamSet p;
    std::mt19937_64 rng(11);
    p.add("w", {16}, ct::random_real(16, rng));
    auto st = ad::AdamState::for_params(p);
    for (int i = 0; i < 50; ++i) ad::adam_step(p, {ct::random_real(16, rng)}, st);
    return std::pair{p, st};
  };
  EXPECT_EQ(run(), run());
}

TEST(ParamsIo, RoundTripWithHeader) {
  std::mt19937_64 rng(12);
  ad::ParamSet p;
  p.add("a.w", {2, 3, 3, 3}, ct::random_real(54, rng));
  p.add("a.b", {2}, ct::random_real(2, rng));
  const auto stem = std::filesystem::temp_directory_path() / "cinerecon_unit" / "params";
  std::filesystem::create_directories(stem.parent_path());
  ad::write_params(stem, p, {{"kind", "test"}, {"note", "x"}});
  const auto back = ad::read_params(stem);
  EXPECT_EQ(back.params, p);
  EXPECT_EQ(back.header.at("kind"), "test");
  EXPECT_TRUE(std::filesystem::exists(ad::payload_path(stem)));
  EXPECT_TRUE(std::filesystem::exists(ad::header_path(stem)));
}

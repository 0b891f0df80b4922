#include <benchmark/benchmark.h>

#include <random>

#include "cinerecon/autodiff.hpp"
#include "cinerecon/cs.hpp"
#include "cinerecon/fft.hpp"
#include "cinerecon/network.hpp"
#include "cinerecon/phantom.hpp"
#include "cinerecon/random.hpp"

namespace cr = cinerecon;
namespace ad = cinerecon::ad;
using cr::ComplexCine;

namespace {

ComplexCine random_cine(cr::CineDims d, cr::Domain dom, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<cr::cplx> v(d.size());
  for (auto& z : v) z = {cr::uniform_real(rng, -1, 1), cr::uniform_real(rng, -1, 1)};
  return ComplexCine(d, dom, std::move(v));
}

struct Desk {
  ComplexCine gt;
  cr::CoilSensitivities sens;
  cr::sampling::SamplingMask mask;
  ComplexCine k_us;
};

const Desk& desk() {
  static const Desk d = [] {
    cr::phantom::PhantomConfig p;
    ComplexCine gt = cr::phantom::generate_cine(p);
    auto sens = cr::phantom::generate_coil_maps(p.h, p.w, p.n_coils, 1);
    cr::sampling::MaskParams mp;
    mp.lines = p.w;
    mp.frames = p.t;
    auto mask = cr::sampling::generate_lh_mask(mp);
    auto acq = cr::phantom::simulate_acquisition(gt, sens, mask, p.noise_sigma, 2);
    return Desk{std::move(gt), std::move(sens), std::move(mask), std::move(acq.k_us)};
  }();
  return d;
}

}  // namespace

static void BM_Fft2c(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const ComplexCine x = random_cine({12, 8, n, n}, cr::Domain::image, 1);
  for (auto _ : state) benchmark::DoNotOptimize(cr::fft2c(x));
  state.SetItemsProcessed(state.iterations() * 12 * 8);
}
BENCHMARK(BM_Fft2c)->Arg(64)->Arg(192)->Unit(benchmark::kMicrosecond);

static void BM_SenseNormal(benchmark::State& state) {
  const Desk& d = desk();
  for (auto _ : state) {
    benchmark::DoNotOptimize(cr::cs::sense_adjoint(cr::cs::sense_forward(d.gt, d.sens, d.mask), d.sens, d.mask));
  }
}
BENCHMARK(BM_SenseNormal)->Unit(benchmark::kMillisecond);

// Conv2d forward+backward at the shapes of the desk network (k = 16) and the full one (k = 48).
template <typename S>
static void BM_Conv2d(benchmark::State& state) {
  const auto c = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(3);
  std::vector<S> xv(c * 64 * 64), wv(c * c * 9), bv(c);
  for (auto& v : xv) v = static_cast<S>(cr::uniform_real(rng, -1, 1));
  for (auto& v : wv) v = static_cast<S>(cr::uniform_real(rng, -0.1, 0.1));
  for (auto _ : state) {
    ad::Tape<S> tape;
    auto x = tape.parameter({c, 64, 64}, xv);
    auto w = tape.parameter({c, c, 3, 3}, wv);
    auto b = tape.parameter({c}, bv);
    tape.backward(ad::sum(ad::conv2d(x, w, b, ad::Activation::relu)));
    benchmark::DoNotOptimize(w.grad().data());
  }
}
BENCHMARK_TEMPLATE(BM_Conv2d, float)->Arg(16)->Arg(48)->Unit(benchmark::kMillisecond);
BENCHMARK_TEMPLATE(BM_Conv2d, double)->Arg(16)->Unit(benchmark::kMillisecond);

static void BM_AdmmIterations(benchmark::State& state) {
  const Desk& d = desk();
  double peak = 0.0;
  for (const auto& z : cr::cs::sense_adjoint(d.k_us, d.sens, d.mask).data()) peak = std::max(peak, std::abs(z));
  cr::cs::CsConfig cfg = cr::cs::default_cs_config(peak);
  cfg.max_admm_iters = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(cr::cs::admm_recon(d.k_us, d.mask, d.sens, cfg));
}
BENCHMARK(BM_AdmmIterations)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_CrnnInference(benchmark::State& state) {
  const Desk& d = desk();
  auto model = cr::crnn::init_model(cr::crnn::ArchConfig::desk(), 7);
  for (auto _ : state) benchmark::DoNotOptimize(cr::crnn::recon_crnn(d.k_us, d.mask, model));
}
BENCHMARK(BM_CrnnInference)->Unit(benchmark::kMillisecond);

static void BM_TrainStep(benchmark::State& state) {
  const Desk& d = desk();
  auto samples = cr::crnn::samples_from_instance(d.k_us, d.sens, d.gt, d.mask);
  samples.erase(samples.begin() + 1, samples.end());
  cr::crnn::TrainOptions opts;
  opts.epochs = 1;
  auto st = cr::crnn::init_train_state(cr::crnn::ArchConfig::desk(), opts);
  for (auto _ : state) cr::crnn::train(st, samples, opts);
}
BENCHMARK(BM_TrainStep)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
